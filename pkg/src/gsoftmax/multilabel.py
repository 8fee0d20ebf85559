"""Multi-label losses with analytic gradients.

Three losses, each summed over classes and averaged over a batch:

``msml_loss``
    independent logistic cross-entropy per class on a single logit.
``dual_sigmoid_loss``
    per class, a positive feature ``x+`` scored on positives and a
    negative feature ``x-`` scored on negatives:
    ``-[y log s(x+) + (1 - y) log s(x-)]``.
``gsoftmax_multilabel_loss``
    the dual form with CDF-augmented features
    ``u+- = x+- + lam * Phi(x+-; mu+-, sigma+-)`` and a complemented
    negative term: ``-[y log s(u+) + (1 - y) log(1 - s(u-))]``.

The two dual losses are kept exactly as written; their negative terms
push the negative feature in opposite directions.  For ranking, both
are reduced to a single per-class score ``s(a+ - a-)``, where ``a+``/
``a-`` are the arguments under which the loss reads
``-[y log s(a+) + (1 - y) log s(a-)]``: ``(x+, x-)`` for the dual
sigmoid loss and ``(u+, -u-)`` for the G-softmax loss.

Log-sigmoids go through softplus so large logits never overflow.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, ShapeError
from .special import gaussian_cdf, gaussian_cdf_grads

__all__ = [
    "DualFeatureVector",
    "DualPredictorParams",
    "DualGrads",
    "sigmoid",
    "softplus",
    "msml_loss",
    "dual_sigmoid_loss",
    "gsoftmax_multilabel_loss",
    "split_dual",
    "msml_scores",
    "dual_sigmoid_scores",
    "gsoftmax_multilabel_scores",
]


def sigmoid(u):
    u = np.asarray(u, dtype=np.float64)
    e = np.exp(-np.abs(u))
    return np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(u):
    u = np.asarray(u, dtype=np.float64)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


@dataclass
class DualFeatureVector:
    x_pos: np.ndarray
    x_neg: np.ndarray

    def __post_init__(self):
        self.x_pos = np.asarray(self.x_pos, dtype=np.float64)
        self.x_neg = np.asarray(self.x_neg, dtype=np.float64)
        if self.x_pos.shape != self.x_neg.shape:
            raise ShapeError("positive and negative features differ in shape")
        if not (np.all(np.isfinite(self.x_pos)) and np.all(np.isfinite(self.x_neg))):
            raise DomainError("features must be finite")


def split_dual(outputs):
    """Split a ``2m``-wide network output into ``(x+, x-)``: first half, second half."""
    outputs = np.asarray(outputs, dtype=np.float64)
    width = outputs.shape[-1]
    if width % 2:
        raise ShapeError(f"dual output width must be even, got {width}")
    half = width // 2
    return DualFeatureVector(outputs[..., :half], outputs[..., half:])


@dataclass
class DualPredictorParams:
    lam: float
    mu_pos: np.ndarray
    log_sigma_pos: np.ndarray
    mu_neg: np.ndarray
    log_sigma_neg: np.ndarray

    def __post_init__(self):
        self.lam = float(self.lam)
        for name in ("mu_pos", "log_sigma_pos", "mu_neg", "log_sigma_neg"):
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64).reshape(-1))
        m = self.mu_pos.size
        if any(a.size != m for a in (self.log_sigma_pos, self.mu_neg, self.log_sigma_neg)):
            raise ShapeError("all dual parameter arrays must share one length")
        if self.lam < 0 or not math.isfinite(self.lam):
            raise DomainError("lambda must be finite and >= 0")

    @classmethod
    def init(cls, m, lam=1.0, mu=0.0, sigma=1.0):
        if sigma <= 0:
            raise DomainError("sigma must be > 0")
        ls = math.log(sigma)
        return cls(lam, np.full(m, float(mu)), np.full(m, ls), np.full(m, float(mu)), np.full(m, ls))

    @property
    def m(self):
        return self.mu_pos.size

    @property
    def sigma_pos(self):
        return np.exp(self.log_sigma_pos)

    @property
    def sigma_neg(self):
        return np.exp(self.log_sigma_neg)

    def copy(self):
        return DualPredictorParams(self.lam, self.mu_pos.copy(), self.log_sigma_pos.copy(),
                                   self.mu_neg.copy(), self.log_sigma_neg.copy())

    def to_dict(self):
        def side(mu, sigma):
            return [{"mu": float(u), "sigma": float(s)} for u, s in zip(mu, sigma)]

        return {
            "lambda": self.lam,
            "pos": side(self.mu_pos, self.sigma_pos),
            "neg": side(self.mu_neg, self.sigma_neg),
        }

    @classmethod
    def from_dict(cls, doc):
        def side(entries):
            sig = np.array([e["sigma"] for e in entries], dtype=np.float64)
            if np.any(sig <= 0):
                raise DomainError("sigma must be > 0")
            return [e["mu"] for e in entries], np.log(sig)

        mp, lp = side(doc["pos"])
        mn, ln = side(doc["neg"])
        return cls(doc["lambda"], mp, lp, mn, ln)


@dataclass
class DualGrads:
    d_pos: np.ndarray
    d_neg: np.ndarray
    d_mu_pos: np.ndarray
    d_sigma_pos: np.ndarray
    d_mu_neg: np.ndarray
    d_sigma_neg: np.ndarray
    d_lambda: float = 0.0


def _check_binary(y, shape):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != shape:
        raise ShapeError(f"labels shape {y.shape} does not match {shape}")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("multi-label targets must be 0 or 1")
    return y


def _reduce(per_sample, ndim):
    return float(np.mean(per_sample.sum(axis=-1))) if ndim == 2 else float(per_sample.sum())


def _scale(ndim, shape):
    return 1.0 if ndim == 1 else 1.0 / shape[0]


def msml_loss(x, y):
    """Multi-label soft-margin loss; returns ``(loss, d_x)``."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("logits must be finite")
    y = _check_binary(y, x.shape)
    per = y * softplus(-x) + (1.0 - y) * softplus(x)
    d_x = (sigmoid(x) - y) * _scale(x.ndim, x.shape)
    return _reduce(per, x.ndim), d_x


def dual_sigmoid_loss(f, y):
    """Dual-feature logistic loss; returns ``(loss, d_pos, d_neg)``."""
    y = _check_binary(y, f.x_pos.shape)
    xp, xn = f.x_pos, f.x_neg
    per = y * softplus(-xp) + (1.0 - y) * softplus(-xn)
    s = _scale(xp.ndim, xp.shape)
    d_pos = y * (sigmoid(xp) - 1.0) * s
    d_neg = (1.0 - y) * (sigmoid(xn) - 1.0) * s
    return _reduce(per, xp.ndim), d_pos, d_neg


def _augment(x, mu, sigma, lam):
    phi = gaussian_cdf(x, mu, sigma)
    return x + lam * phi, phi


def gsoftmax_multilabel_loss(f, y, params):
    """G-softmax multi-label loss; returns ``(loss, DualGrads)``."""
    xp, xn = f.x_pos, f.x_neg
    if xp.shape[-1] != params.m:
        raise ShapeError(f"got {xp.shape[-1]} features for {params.m} classes")
    y = _check_binary(y, xp.shape)
    lam = params.lam
    up, phi_p = _augment(xp, params.mu_pos, params.sigma_pos, lam)
    un, phi_n = _augment(xn, params.mu_neg, params.sigma_neg, lam)
    per = y * softplus(-up) + (1.0 - y) * softplus(un)

    s = _scale(xp.ndim, xp.shape)
    d_up = y * (sigmoid(up) - 1.0) * s
    d_un = (1.0 - y) * sigmoid(un) * s
    gx_p, gm_p, gs_p = gaussian_cdf_grads(xp, params.mu_pos, params.sigma_pos)
    gx_n, gm_n, gs_n = gaussian_cdf_grads(xn, params.mu_neg, params.sigma_neg)

    blocks = [lam * d_up * gm_p, lam * d_up * gs_p, lam * d_un * gm_n, lam * d_un * gs_n]
    if xp.ndim == 2:
        blocks = [b.sum(axis=0) for b in blocks]
    grads = DualGrads(
        d_pos=d_up * (1.0 + lam * gx_p),
        d_neg=d_un * (1.0 + lam * gx_n),
        d_mu_pos=blocks[0],
        d_sigma_pos=blocks[1],
        d_mu_neg=blocks[2],
        d_sigma_neg=blocks[3],
        d_lambda=float(np.sum(d_up * phi_p) + np.sum(d_un * phi_n)),
    )
    return _reduce(per, xp.ndim), grads


def msml_scores(x):
    return sigmoid(x)


def dual_sigmoid_scores(f):
    return sigmoid(f.x_pos - f.x_neg)


def gsoftmax_multilabel_scores(f, params):
    up, _ = _augment(f.x_pos, params.mu_pos, params.sigma_pos, params.lam)
    un, _ = _augment(f.x_neg, params.mu_neg, params.sigma_neg, params.lam)
    return sigmoid(up + un)
