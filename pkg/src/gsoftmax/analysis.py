"""Feature-distribution analysis: compactness, KL separability, significance.

Per class, a scalar feature is summarised by a fitted Gaussian.  Then

* compactness  = 1 / sigma
* separability = mean symmetric KL divergence to the other classes,
  ``d_i = 1/(2(m-1)) * sum_{j != i} [KL(i||j) + KL(j||i)]``
* ratio        = d_i / sigma_i

Feature dumps from a trained model (``n x m`` logits plus labels) are
turned into per-class reports by :func:`impostor_report`, which for
each ground-truth class ``c`` looks only at samples of class ``c`` and
compares the true-class feature ``x_c`` against the impostor features
``x_j, j != c``.  Two ways of treating the impostors are offered:

``"per_feature"``
    fit every impostor feature separately and average the divergences
    over all ``m - 1`` impostors.
``"pooled"``
    pool all impostor values into a single "non-c" Gaussian.

Sample standard deviations use the ``n - 1`` divisor unless ``ddof=0``
is passed; fitted sigmas are floored at ``SIGMA_FLOOR``.
"""

from dataclasses import dataclass, asdict
import math

import numpy as np
from scipy import special as sp_special

from .errors import DegenerateError, DomainError, ShapeError

__all__ = [
    "SIGMA_FLOOR",
    "EmpiricalGaussian",
    "ClassSeparability",
    "SeparabilityReport",
    "TestResult",
    "fit_gaussian",
    "kl_gaussian",
    "mean_symmetric_kld",
    "separability_report",
    "impostor_report",
    "multilabel_report",
    "paired_t_test",
    "pearson_correlation",
    "student_t_sf",
    "scatter_rows",
]

SIGMA_FLOOR = 1e-9
IMPOSTOR_MODES = ("per_feature", "pooled")


@dataclass(frozen=True)
class EmpiricalGaussian:
    mu: float
    sigma: float
    n: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be > 0")
        if self.n < 2:
            raise DomainError("a fit needs at least 2 samples")


@dataclass(frozen=True)
class ClassSeparability:
    class_id: object
    compactness: float
    separability: float
    ratio: float


@dataclass
class SeparabilityReport:
    per_class: list
    fitted: list

    def mean(self, field_name):
        return float(np.mean([getattr(c, field_name) for c in self.per_class]))

    def to_dict(self):
        return {
            "per_class": [asdict(c) for c in self.per_class],
            "fitted": [asdict(g) for g in self.fitted],
            "mean": {k: self.mean(k) for k in ("compactness", "separability", "ratio")},
        }

    def to_rows(self):
        rows = []
        for c, g in zip(self.per_class, self.fitted):
            rows.append({**asdict(c), "mu": g.mu, "sigma": g.sigma, "n": g.n})
        return rows


def fit_gaussian(samples, ddof=1):
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise DomainError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    if ddof not in (0, 1):
        raise DomainError("ddof must be 0 or 1")
    sigma = max(float(np.std(x, ddof=ddof)), SIGMA_FLOOR)
    return EmpiricalGaussian(float(np.mean(x)), sigma, int(x.size))


def kl_gaussian(a, b):
    """KL(a || b) for univariate Gaussians, closed form."""
    # scaled by b.sigma first so large but finite features do not overflow
    r = a.sigma / b.sigma
    d = (a.mu - b.mu) / b.sigma
    return -math.log(r) + 0.5 * (r * r + d * d) - 0.5


def mean_symmetric_kld(fits, i):
    m = len(fits)
    if m < 2:
        raise DomainError("need at least two distributions")
    if not 0 <= i < m:
        raise DomainError(f"class index {i} out of range")
    total = 0.0
    for j, other in enumerate(fits):
        if j != i:
            total += kl_gaussian(fits[i], other) + kl_gaussian(other, fits[i])
    return total / (2.0 * (m - 1))


def _entry(class_id, fits, i):
    d = mean_symmetric_kld(fits, i)
    sigma = fits[i].sigma
    return ClassSeparability(class_id, 1.0 / sigma, d, d / sigma)


def separability_report(features_by_class, ddof=1):
    """Report over a ``{class_id: samples}`` mapping, in mapping order."""
    if len(features_by_class) < 2:
        raise DomainError("need at least two classes")
    ids, fits = [], []
    for cid, samples in features_by_class.items():
        try:
            fits.append(fit_gaussian(samples, ddof))
        except DomainError as exc:
            raise DomainError(f"class {cid}: {exc}") from exc
        ids.append(cid)
    per_class = [_entry(cid, fits, i) for i, cid in enumerate(ids)]
    return SeparabilityReport(per_class, fits)


def impostor_report(features, labels, mode="per_feature", ddof=1, classes=None):
    """Per-ground-truth-class report from an ``n x m`` feature dump.

    Classes with fewer than two samples are skipped unless listed
    explicitly in ``classes``, in which case the fit error propagates.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise ShapeError("expected features (n, m) and labels (n,)")
    if mode not in IMPOSTOR_MODES:
        raise DomainError(f"mode must be one of {IMPOSTOR_MODES}")
    m = features.shape[1]
    if m < 2:
        raise DomainError("need at least two feature columns")
    if classes is None:
        classes = [c for c in range(m) if np.count_nonzero(labels == c) >= 2]
    per_class, fitted = [], []
    for c in classes:
        block = features[labels == c]
        try:
            if mode == "per_feature":
                fits = [fit_gaussian(block[:, j], ddof) for j in range(m)]
                entry = _entry(c, fits, c)
                fitted.append(fits[c])
            else:
                pos = fit_gaussian(block[:, c], ddof)
                neg = fit_gaussian(np.delete(block, c, axis=1), ddof)
                entry = _entry(c, [pos, neg], 0)
                fitted.append(pos)
        except DomainError as exc:
            raise DomainError(f"class {c}: {exc}") from exc
        per_class.append(entry)
    return SeparabilityReport(per_class, fitted)


def multilabel_report(scores, targets, ddof=1):
    """Per class: positives' feature vs negatives' feature, both on column ``i``.

    Classes lacking two positives or two negatives are left out.
    """
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    if scores.shape != targets.shape or scores.ndim != 2:
        raise ShapeError("scores and targets must both be (n, m)")
    per_class, fitted = [], []
    for i in range(scores.shape[1]):
        pos = scores[targets[:, i] == 1, i]
        neg = scores[targets[:, i] == 0, i]
        if pos.size < 2 or neg.size < 2:
            continue
        fits = [fit_gaussian(pos, ddof), fit_gaussian(neg, ddof)]
        per_class.append(_entry(i, fits, 0))
        fitted.append(fits[0])
    return SeparabilityReport(per_class, fitted)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_val: float
    df: int

    # keep pytest from collecting this as a test class
    __test__ = False


def student_t_sf(t, df):
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t."""
    if df <= 0:
        raise DomainError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(min(1.0, max(0.0, sp_special.betainc(0.5 * df, 0.5, x))))


def _pair(a, b, min_n):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError("inputs must have equal length")
    if a.size < min_n:
        raise DomainError(f"need at least {min_n} pairs")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("inputs must be finite")
    return a, b


def paired_t_test(a, b):
    """Two-sided paired-sample t-test of ``mean(a - b) == 0``.

    Raises DegenerateError when the differences have zero variance.
    """
    a, b = _pair(a, b, 2)
    d = a - b
    n = d.size
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateError("paired differences have zero variance")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return TestResult(t, student_t_sf(t, n - 1), n - 1)


def pearson_correlation(a, b):
    """Pearson's rho with a two-sided p-value from the t-transform."""
    a, b = _pair(a, b, 3)
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.dot(da, da))
    sbb = float(np.dot(db, db))
    if saa == 0.0 or sbb == 0.0:
        raise DomainError("correlation undefined for constant input")
    rho = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    rho = min(1.0, max(-1.0, rho))
    n = a.size
    if abs(rho) == 1.0:
        return TestResult(rho, 0.0, n - 2)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return TestResult(rho, student_t_sf(t, n - 2), n - 2)


def scatter_rows(features, probs, labels, gt_class):
    """(feature, prediction) points for samples of one ground-truth class.

    Every row is ``(output_index, x, p, is_true_class)``; rows with
    ``is_true_class == 0`` are the impostor points.
    """
    features = np.asarray(features, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    mask = np.asarray(labels) == gt_class
    rows = []
    for xs, ps in zip(features[mask], probs[mask]):
        for j, (x, p) in enumerate(zip(xs, ps)):
            rows.append((j, float(x), float(p), int(j == gt_class)))
    return rows
