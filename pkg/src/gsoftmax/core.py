"""Single-label G-softmax predictor.

The predictor augments every logit with a scaled Gaussian CDF,

    z_i = x_i + lam * Phi(x_i; mu_i, sigma_i),    p = softmax(z),

and is trained with cross-entropy.  With ``lam == 0`` it is exactly the
ordinary softmax.

Every function accepts either one sample (shape ``(m,)``) or a batch
(shape ``(n, m)``).  For a batch the loss is the mean over samples and
all gradients are gradients of that mean.

The backward pass uses the softmax/cross-entropy kernel ``p_i - y_i``
for ``dl/dz_i``; everything else follows from the chain rule through
``z``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, ShapeError
from .special import gaussian_cdf, gaussian_cdf_grads

__all__ = [
    "ClassGaussian",
    "PredictorParams",
    "GradBundle",
    "softmax",
    "log_softmax",
    "augment_logits",
    "gsoftmax_forward",
    "cross_entropy",
    "softmax_cross_entropy",
    "gsoftmax_backward",
    "one_hot",
]


@dataclass(frozen=True)
class ClassGaussian:
    """One class's (mu, sigma), stored as ``(mu, log_sigma)``."""

    mu: float
    log_sigma: float

    @property
    def sigma(self):
        return math.exp(self.log_sigma)

    @classmethod
    def from_sigma(cls, mu, sigma):
        if not sigma > 0:
            raise DomainError(f"sigma must be > 0, got {sigma}")
        return cls(float(mu), math.log(sigma))


@dataclass
class PredictorParams:
    """Learnable state of the G-softmax head.

    ``mu`` and ``log_sigma`` are float arrays of length ``m``; they are
    mutated in place by the optimizer.
    """

    lam: float
    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        self.log_sigma = np.array(self.log_sigma, dtype=np.float64).reshape(-1)
        self.lam = float(self.lam)
        if self.mu.shape != self.log_sigma.shape:
            raise ShapeError("mu and log_sigma must have the same length")
        if self.mu.size < 2:
            raise DomainError("need at least two classes")
        if self.lam < 0 or not math.isfinite(self.lam):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam}")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.log_sigma))):
            raise DomainError("mu and sigma must be finite")

    @classmethod
    def init(cls, m, lam=1.0, mu=0.0, sigma=1.0):
        """``m`` identical classes; defaults are the standard Gaussian."""
        if sigma <= 0:
            raise DomainError("sigma must be > 0")
        return cls(lam, np.full(m, float(mu)), np.full(m, math.log(sigma)))

    @classmethod
    def from_classes(cls, lam, classes):
        return cls(lam, [c.mu for c in classes], [c.log_sigma for c in classes])

    @property
    def m(self):
        return self.mu.size

    @property
    def sigma(self):
        return np.exp(self.log_sigma)

    @property
    def classes(self):
        return [ClassGaussian(float(u), float(s)) for u, s in zip(self.mu, self.log_sigma)]

    def copy(self):
        return PredictorParams(self.lam, self.mu.copy(), self.log_sigma.copy())

    def to_dict(self):
        return {
            "lambda": self.lam,
            "classes": [{"mu": float(u), "sigma": float(s)} for u, s in zip(self.mu, self.sigma)],
        }

    @classmethod
    def from_dict(cls, doc):
        classes = doc["classes"]
        sig = [c["sigma"] for c in classes]
        if any(s <= 0 for s in sig):
            raise DomainError("sigma must be > 0")
        return cls(doc["lambda"], [c["mu"] for c in classes], np.log(sig))


@dataclass
class GradBundle:
    """Gradients of the loss w.r.t. logits and distribution parameters.

    ``d_x`` has the shape of the input; ``d_mu``/``d_sigma`` have length m.
    """

    d_x: np.ndarray
    d_mu: np.ndarray
    d_sigma: np.ndarray
    d_lambda: float = 0.0
    sigma: np.ndarray = field(default=None, repr=False)

    @property
    def d_log_sigma(self):
        return self.sigma * self.d_sigma


def _check_logits(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ShapeError(f"expected shape (m,) or (n, m), got {x.shape}")
    if x.shape[-1] < 2:
        raise DomainError("need at least two logits")
    if not np.all(np.isfinite(x)):
        raise DomainError("logits must be finite")
    return x


def softmax(x):
    x = _check_logits(x)
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(x):
    x = _check_logits(x)
    shifted = x - np.max(x, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def augment_logits(x, params):
    """Return ``(z, phi)`` with ``z = x + lam * phi``."""
    x = _check_logits(x)
    if x.shape[-1] != params.m:
        raise ShapeError(f"got {x.shape[-1]} logits for {params.m} classes")
    phi = gaussian_cdf(x, params.mu, params.sigma)
    return x + params.lam * phi, phi


def gsoftmax_forward(x, params):
    z, _ = augment_logits(x, params)
    return softmax(z)


def one_hot(labels, m):
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= m):
        raise DomainError("label out of range")
    out = np.zeros(labels.shape + (m,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def _check_targets(y, shape):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != shape:
        raise ShapeError(f"labels shape {y.shape} does not match {shape}")
    if np.any(y < 0) or not np.allclose(y.sum(axis=-1), 1.0, rtol=0, atol=1e-12):
        raise DomainError("single-label targets must be non-negative and sum to 1")
    return y


def cross_entropy(p, y):
    """``-sum_i y_i log p_i``; mean over rows for a batch."""
    p = np.asarray(p, dtype=np.float64)
    y = _check_targets(y, p.shape)
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    per = -np.sum(np.where(y > 0, y * logp, 0.0), axis=-1)
    return float(np.mean(per))


def _batch_scale(x):
    return 1.0 if x.ndim == 1 else 1.0 / x.shape[0]


def softmax_cross_entropy(x, y):
    """Plain softmax baseline: returns ``(loss, d_x)``."""
    x = _check_logits(x)
    y = _check_targets(y, x.shape)
    logp = log_softmax(x)
    loss = float(np.mean(-np.sum(y * logp, axis=-1)))
    d_x = (np.exp(logp) - y) * _batch_scale(x)
    return loss, d_x


def gsoftmax_backward(x, y, params):
    """Loss and analytic gradients for the G-softmax cross-entropy.

    Returns ``(loss, GradBundle)``.  ``d_lambda`` is filled in too, for
    experiments that learn the CDF weight.
    """
    z, phi = augment_logits(x, params)
    x = np.asarray(x, dtype=np.float64)
    y = _check_targets(y, z.shape)
    logp = log_softmax(z)
    loss = float(np.mean(-np.sum(y * logp, axis=-1)))

    # dl/dz, already divided by batch size
    dz = (np.exp(logp) - y) * _batch_scale(z)
    dphi_dx, dphi_dmu, dphi_dsigma = gaussian_cdf_grads(x, params.mu, params.sigma)
    lam = params.lam
    d_x = dz * (1.0 + lam * dphi_dx)
    d_mu = lam * dz * dphi_dmu
    d_sigma = lam * dz * dphi_dsigma
    d_lambda = float(np.sum(dz * phi))
    if z.ndim == 2:
        d_mu = d_mu.sum(axis=0)
        d_sigma = d_sigma.sum(axis=0)
    return loss, GradBundle(d_x, d_mu, d_sigma, d_lambda, params.sigma)
