"""Error function and Gaussian CDF kernels.

All functions are vectorised over NumPy arrays and broadcast their
arguments; scalar inputs give scalar (Python float) outputs.

``erf`` is evaluated in two regimes on ``a = |z|``:

* ``a < 2.5``: the all-positive series
  ``erf(a) = 2/sqrt(pi) * exp(-a^2) * sum_k 2^k a^(2k+1) / (2k+1)!!``
  which has no cancellation, 60 terms.
* ``a >= 2.5``: ``erfc(a)`` from its continued fraction
  ``exp(-a^2)/sqrt(pi) / (a + (1/2)/(a + 1/(a + (3/2)/(a + ...))))``,
  evaluated bottom-up with 40 levels.

Both stay within a few ulps of the exact value on ``[0, 6]``.  Beyond
``|z| > 6`` the result is ``+-1`` exactly (``erfc(6) ~ 2e-17``).
Odd symmetry is exact because the sign is applied after evaluating on
``|z|``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError

__all__ = [
    "GaussianParams",
    "erf",
    "erfc",
    "gaussian_pdf",
    "gaussian_cdf",
    "gaussian_cdf_grads",
    "CDF_SATURATION",
]

_SERIES_TERMS = 60
_CF_DEPTH = 40
_SPLIT = 2.5
_ERF_SATURATION = 6.0
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: Standardised distance |x - mu| / sigma beyond which the CDF is returned
#: as exactly 0 or 1.
CDF_SATURATION = 8.0


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError("GaussianParams must be finite")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")


def _as_float_array(z, name="z"):
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _unwrap(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _erf_erfc_nonneg(a):
    """Return ``(erf(a), erfc(a))`` for an array of non-negative ``a``."""
    erf_out = np.empty_like(a)
    erfc_out = np.empty_like(a)

    small = a < _SPLIT
    if np.any(small):
        s = a[small]
        s2 = s * s
        term = s.copy()
        total = s.copy()
        for k in range(1, _SERIES_TERMS):
            term = term * (2.0 * s2 / (2 * k + 1))
            total += term
        val = _TWO_OVER_SQRT_PI * np.exp(-s2) * total
        erf_out[small] = val
        erfc_out[small] = 1.0 - val

    big = ~small
    if np.any(big):
        b = a[big]
        t = b.copy()
        for k in range(_CF_DEPTH, 0, -1):
            t = b + (0.5 * k) / t
        tail = _INV_SQRT_PI * np.exp(-b * b) / t
        saturated = b > _ERF_SATURATION
        erf_out[big] = np.where(saturated, 1.0, 1.0 - tail)
        erfc_out[big] = tail
    return erf_out, erfc_out


def erf(z):
    """Error function, accurate to ~1e-15 absolute on the whole real line."""
    z = _as_float_array(z)
    flat = np.atleast_1d(z)
    val, _ = _erf_erfc_nonneg(np.abs(flat))
    val = np.copysign(val, flat)
    return _unwrap(val.reshape(z.shape))


def erfc(z):
    """Complementary error function ``1 - erf(z)``.

    Keeps relative accuracy in the right tail, where ``1 - erf(z)`` would
    cancel.
    """
    z = _as_float_array(z)
    flat = np.atleast_1d(z)
    e, c = _erf_erfc_nonneg(np.abs(flat))
    out = np.where(flat >= 0, c, 1.0 + e)
    return _unwrap(out.reshape(z.shape))


def _check_sigma(sigma):
    sigma = _as_float_array(sigma, "sigma")
    if np.any(sigma <= 0):
        raise DomainError("sigma must be strictly positive")
    return sigma


def gaussian_pdf(x, mu=0.0, sigma=1.0):
    x = _as_float_array(x, "x")
    mu = _as_float_array(mu, "mu")
    sigma = _check_sigma(sigma)
    t = (x - mu) / sigma
    return _unwrap(_INV_SQRT_2PI / sigma * np.exp(-0.5 * t * t))


def gaussian_cdf(x, mu=0.0, sigma=1.0):
    """``P(X <= x)`` for ``X ~ N(mu, sigma^2)``.

    ``mu`` may also be a :class:`GaussianParams`, in which case ``sigma``
    is ignored.  Points further than ``CDF_SATURATION`` standard
    deviations from the mean map to exactly 0 or 1.
    """
    if isinstance(mu, GaussianParams):
        mu, sigma = mu.mu, mu.sigma
    x = _as_float_array(x, "x")
    mu = _as_float_array(mu, "mu")
    sigma = _check_sigma(sigma)
    t = (x - mu) / sigma
    w = np.atleast_1d(t / math.sqrt(2.0))
    e, c = _erf_erfc_nonneg(np.abs(w))
    # lower tail via erfc keeps relative precision for very small CDF values
    out = np.where(w >= 0, 0.5 + 0.5 * e, 0.5 * c)
    tt = np.atleast_1d(t)
    out = np.where(tt > CDF_SATURATION, 1.0, out)
    out = np.where(tt < -CDF_SATURATION, 0.0, out)
    return _unwrap(out.reshape(np.shape(t)))


def gaussian_cdf_grads(x, mu=0.0, sigma=1.0):
    """Partial derivatives of the Gaussian CDF.

    Returns ``(d_dx, d_dmu, d_dsigma)`` where ``d_dx`` is the density at
    ``x``, ``d_dmu = -d_dx`` and ``d_dsigma = (mu - x) / sigma * d_dx``.
    """
    if isinstance(mu, GaussianParams):
        mu, sigma = mu.mu, mu.sigma
    x = _as_float_array(x, "x")
    mu = _as_float_array(mu, "mu")
    sigma = _check_sigma(sigma)
    diff = mu - x
    d_dx = _INV_SQRT_2PI / sigma * np.exp(-0.5 * (diff / sigma) ** 2)
    d_dmu = -d_dx
    d_dsigma = diff / sigma * d_dx
    return _unwrap(d_dx), _unwrap(d_dmu), _unwrap(d_dsigma)
