import math

from hypothesis import given, strategies as st
import mpmath
import numpy as np
import pytest

from gsoftmax.errors import DomainError
from gsoftmax.special import (CDF_SATURATION, GaussianParams, erf, erfc, gaussian_cdf,
                              gaussian_cdf_grads, gaussian_pdf)

mpmath.mp.dps = 40

finite = st.floats(-50, 50, allow_nan=False)
sigmas = st.floats(1e-3, 1e3)


def mp_erf(z):
    return float(mpmath.erf(mpmath.mpf(z)))


def test_erf_matches_mpmath_on_grid():
    grid = np.linspace(-6, 6, 1001)
    ours = erf(grid)
    ref = np.array([mp_erf(z) for z in grid])
    assert np.max(np.abs(ours - ref)) < 1e-14


def test_erfc_relative_accuracy_in_tail():
    for z in np.linspace(2.5, 26, 60):
        ref = float(mpmath.erfc(mpmath.mpf(z)))
        assert erfc(z) == pytest.approx(ref, rel=1e-12, abs=0)


def test_erf_known_values():
    assert erf(0.0) == 0.0
    assert erf(1.0) == pytest.approx(0.8427007929497149, abs=1e-15)
    assert erf(10.0) == 1.0
    assert erf(-10.0) == -1.0


def test_erf_scalar_and_array_types():
    assert isinstance(erf(0.3), float)
    out = erf([[0.1, 0.2]])
    assert out.shape == (1, 2)


@given(finite)
def test_erf_is_odd(z):
    assert erf(-z) == -erf(z)


@given(finite)
def test_erf_plus_erfc_is_one(z):
    assert erf(z) + erfc(z) == pytest.approx(1.0, abs=2e-16 * 4)


def test_erf_rejects_non_finite():
    with pytest.raises(DomainError):
        erf(float("nan"))
    with pytest.raises(DomainError):
        erf([0.0, float("inf")])


def test_cdf_matches_math_erfc():
    xs = np.linspace(-7, 7, 141)
    ref = np.array([0.5 * math.erfc(-x / math.sqrt(2)) for x in xs])
    assert np.max(np.abs(gaussian_cdf(xs) - ref) / np.maximum(ref, 1e-300)) < 1e-12


def test_cdf_saturates():
    assert gaussian_cdf(CDF_SATURATION + 0.1) == 1.0
    assert gaussian_cdf(-CDF_SATURATION - 0.1) == 0.0
    assert 0.0 < gaussian_cdf(-CDF_SATURATION + 0.1) < 1e-14


def test_cdf_accepts_params_object():
    g = GaussianParams(1.0, 2.0)
    assert gaussian_cdf(1.0, g) == 0.5
    with pytest.raises(DomainError):
        GaussianParams(0.0, 0.0)


@given(finite, finite, sigmas)
def test_cdf_in_unit_interval(x, mu, sigma):
    c = gaussian_cdf(x, mu, sigma)
    assert 0.0 <= c <= 1.0


@given(st.floats(-10, 10), st.floats(0.01, 5), st.floats(-10, 10), st.floats(0.01, 5))
def test_cdf_monotone_in_x(mu, sigma, a, d):
    assert gaussian_cdf(a + d, mu, sigma) >= gaussian_cdf(a, mu, sigma)


def test_cdf_rejects_bad_sigma():
    for s in (0.0, -1.0, float("nan")):
        with pytest.raises(DomainError):
            gaussian_cdf(0.0, 0.0, s)


def test_cdf_grads_against_central_differences(rng):
    x = rng.normal(size=50)
    mu = rng.normal(size=50)
    sigma = np.exp(rng.uniform(-1, 1, 50))
    dx, dmu, dsigma = gaussian_cdf_grads(x, mu, sigma)
    h = 1e-6
    num = lambda f: (f(h) - f(-h)) / (2 * h)  # noqa: E731
    assert np.allclose(dx, num(lambda e: gaussian_cdf(x + e, mu, sigma)), atol=1e-8)
    assert np.allclose(dmu, num(lambda e: gaussian_cdf(x, mu + e, sigma)), atol=1e-8)
    assert np.allclose(dsigma, num(lambda e: gaussian_cdf(x, mu, sigma + e)), atol=1e-8)
    assert np.array_equal(dx, gaussian_pdf(x, mu, sigma))
    assert np.array_equal(dmu, -dx)
