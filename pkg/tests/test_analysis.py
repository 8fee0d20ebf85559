import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest
from scipy import integrate

from gsoftmax import analysis as an
from gsoftmax.errors import DegenerateError, DomainError, ShapeError

G = an.EmpiricalGaussian
mus = st.floats(-5, 5)
sigmas = st.floats(0.05, 5)


def kl_quad(a, b):
    def integrand(x):
        la = -0.5 * ((x - a.mu) / a.sigma) ** 2 - math.log(a.sigma)
        lb = -0.5 * ((x - b.mu) / b.sigma) ** 2 - math.log(b.sigma)
        return math.exp(la) / math.sqrt(2 * math.pi) * (la - lb)
    lo, hi = a.mu - 40 * a.sigma, a.mu + 40 * a.sigma
    return integrate.quad(integrand, lo, hi, points=[a.mu], epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def t_sf_quad(t, df):
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    dens = lambda u: c * (1 + u * u / df) ** (-(df + 1) / 2)  # noqa: E731
    return 2 * integrate.quad(dens, abs(t), np.inf, epsabs=1e-14, epsrel=1e-12)[0]


@settings(max_examples=60, deadline=None)
@given(mus, sigmas, mus, sigmas)
def test_kl_matches_quadrature(m1, s1, m2, s2):
    a, b = G(m1, s1, 2), G(m2, s2, 2)
    assert an.kl_gaussian(a, b) == pytest.approx(kl_quad(a, b), abs=1e-7)


@given(mus, sigmas, mus, sigmas)
def test_kl_non_negative_and_zero_iff_identical(m1, s1, m2, s2):
    a, b = G(m1, s1, 2), G(m2, s2, 2)
    assert an.kl_gaussian(a, b) >= -1e-15
    assert an.kl_gaussian(a, a) == 0.0


def test_kl_known_value():
    # KL(N(0,1) || N(1,2)) = log 2 + (1 + 1) / 8 - 1/2
    assert an.kl_gaussian(G(0, 1, 2), G(1, 2, 2)) == pytest.approx(math.log(2) - 0.25, abs=1e-15)


def test_fit_gaussian_divisors():
    x = [1.0, 2.0, 3.0, 4.0]
    assert an.fit_gaussian(x).sigma == pytest.approx(np.std(x, ddof=1))
    assert an.fit_gaussian(x, ddof=0).sigma == pytest.approx(np.std(x))
    assert an.fit_gaussian([2.0, 2.0]).sigma == an.SIGMA_FLOOR
    with pytest.raises(DomainError):
        an.fit_gaussian([1.0])
    with pytest.raises(DomainError):
        an.fit_gaussian([1.0, float("nan")])


def test_mean_symmetric_kld_by_hand():
    fits = [G(0, 1, 2), G(1, 1, 2), G(0, 2, 2)]
    total = sum(an.kl_gaussian(fits[0], f) + an.kl_gaussian(f, fits[0]) for f in fits[1:])
    assert an.mean_symmetric_kld(fits, 0) == pytest.approx(total / 4, rel=1e-15)


@given(st.lists(st.tuples(mus, sigmas), min_size=2, max_size=6))
def test_report_fields_are_consistent(params):
    rng = np.random.default_rng(0)
    data = {i: rng.normal(m, s, 20) for i, (m, s) in enumerate(params)}
    rep = an.separability_report(data)
    for c, g in zip(rep.per_class, rep.fitted):
        assert c.ratio == c.separability / g.sigma
        assert c.compactness == 1.0 / g.sigma
        assert c.separability >= 0


def test_separated_classes_score_higher():
    rng = np.random.default_rng(1)
    near = an.separability_report({0: rng.normal(0, 1, 200), 1: rng.normal(0.5, 1, 200)})
    far = an.separability_report({0: rng.normal(0, 1, 200), 1: rng.normal(5, 1, 200)})
    assert far.mean("ratio") > near.mean("ratio")


def test_impostor_modes():
    rng = np.random.default_rng(2)
    labels = np.repeat([0, 1, 2], 50)
    feats = rng.normal(size=(150, 3))
    feats[np.arange(150), labels] += 3.0
    per = an.impostor_report(feats, labels, "per_feature")
    pooled = an.impostor_report(feats, labels, "pooled")
    assert [c.class_id for c in per.per_class] == [0, 1, 2]
    block = feats[labels == 1]
    fits = [an.fit_gaussian(block[:, j]) for j in range(3)]
    assert per.per_class[1].separability == an.mean_symmetric_kld(fits, 1)
    pos, neg = an.fit_gaussian(block[:, 1]), an.fit_gaussian(np.delete(block, 1, axis=1))
    assert pooled.per_class[1].separability == an.mean_symmetric_kld([pos, neg], 0)
    assert per.per_class[1].compactness == pooled.per_class[1].compactness


def test_impostor_validation():
    with pytest.raises(ShapeError):
        an.impostor_report(np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(DomainError):
        an.impostor_report(np.zeros((4, 2)), np.zeros(4), mode="other")
    # a class with one sample is skipped unless requested
    rep = an.impostor_report(np.arange(10.0).reshape(5, 2), [0, 0, 0, 0, 1])
    assert [c.class_id for c in rep.per_class] == [0]
    with pytest.raises(DomainError):
        an.impostor_report(np.arange(10.0).reshape(5, 2), [0, 0, 0, 0, 1], classes=[1])


def test_multilabel_report():
    rng = np.random.default_rng(3)
    targets = (rng.random((100, 3)) < 0.4).astype(int)
    scores = rng.normal(size=(100, 3)) + 2 * targets
    rep = an.multilabel_report(scores, targets)
    assert len(rep.per_class) == 3
    col = scores[:, 0]
    fits = [an.fit_gaussian(col[targets[:, 0] == 1]), an.fit_gaussian(col[targets[:, 0] == 0])]
    assert rep.per_class[0].separability == an.mean_symmetric_kld(fits, 0)


@pytest.mark.parametrize("t,df", [(0.0, 3), (1.0, 1), (2.5, 4), (-3.2, 10), (0.7, 29), (12.0, 7)])
def test_t_tail_against_density_quadrature(t, df):
    assert an.student_t_sf(t, df) == pytest.approx(t_sf_quad(t, df), abs=1e-8)


def test_paired_t_by_hand():
    a = [1.0, 2.0, 3.0, 4.0]
    b = [1.5, 1.0, 2.0, 2.5]
    d = np.subtract(a, b)
    t = d.mean() / (d.std(ddof=1) / 2)
    r = an.paired_t_test(a, b)
    assert r.statistic == pytest.approx(t, rel=1e-14)
    assert r.df == 3
    assert r.p_val == pytest.approx(t_sf_quad(t, 3), abs=1e-10)
    with pytest.raises(DegenerateError):
        an.paired_t_test([1, 2, 3], [0, 1, 2])


def test_pearson_against_covariance_formula(rng):
    a, b = rng.normal(size=30), rng.normal(size=30)
    r = an.pearson_correlation(a, b)
    cov = np.cov(a, b)
    assert abs(r.statistic - cov[0, 1] / math.sqrt(cov[0, 0] * cov[1, 1])) <= 1e-12
    t = r.statistic * math.sqrt(28 / (1 - r.statistic ** 2))
    assert r.p_val == pytest.approx(t_sf_quad(t, 28), abs=1e-10)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30), st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_affine_invariance(xs, alpha, beta):
    a = np.array(xs)
    b = np.sin(a) + np.arange(a.size)
    if np.ptp(a) < 1e-3:
        return
    r1 = an.pearson_correlation(a, b).statistic
    r2 = an.pearson_correlation(alpha * a + beta, b).statistic
    assert -1.0 <= r1 <= 1.0
    assert abs(r1 - r2) <= 1e-12


def test_pearson_edge_cases():
    assert an.pearson_correlation([1, 2, 3], [2, 4, 6]).p_val == 0.0
    with pytest.raises(DomainError):
        an.pearson_correlation([1, 1, 1], [1, 2, 3])
    with pytest.raises(DomainError):
        an.pearson_correlation([1, 2], [1, 2])
    with pytest.raises(ShapeError):
        an.paired_t_test([1, 2, 3], [1, 2])


def test_scatter_rows():
    feats = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    probs = np.array([[0.3, 0.7], [0.4, 0.6], [0.9, 0.1]])
    rows = an.scatter_rows(feats, probs, [1, 0, 1], 1)
    assert rows == [(0, 1.0, 0.3, 0), (1, 2.0, 0.7, 1), (0, 5.0, 0.9, 0), (1, 6.0, 0.1, 1)]
