"""Finite-difference checks of the analytic loss gradients.

Each trial draws a random configuration, evaluates the analytic
gradients, and compares every entry with a central difference
``(f(w + h) - f(w - h)) / 2h`` of the scalar loss.  The reference losses
are re-evaluated from the forward definitions (CDF, log-softmax,
softplus) with all perturbations batched along a leading axis; they do
not touch any backward code.

The reference functions return per-class loss terms.  The +h and -h
term vectors are subtracted elementwise and then summed with
``math.fsum``, so unperturbed terms cancel exactly; differencing two
rounded totals instead would leave an error of one ulp of the total
(about 1e-14 for a loss near 100), i.e. ~1e-9 in the quotient.

Relative error is ``|a - n| / max(|a|, |n|, REL_FLOOR)``.  The floor
keeps entries that are zero up to rounding (e.g. the sigma gradient at
``x == mu``) from producing 0/0.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import core, multilabel
from .special import gaussian_cdf

__all__ = ["FD_STEP", "REL_FLOOR", "TOLERANCE", "BlockStat", "GradcheckReport",
           "run_gradcheck", "relative_error"]

FD_STEP = 1e-5
REL_FLOOR = 1e-4
TOLERANCE = 1e-5
CLASS_COUNTS = (2, 10, 100)
LAMBDAS = (0.0, 0.5, 1.0)
SIGMA_RANGE = (0.1, 10.0)

SINGLE_BLOCKS = ("x", "mu", "sigma")
MULTI_BLOCKS = ("pos", "neg", "mu_pos", "sigma_pos", "mu_neg", "sigma_neg")


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    den = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return np.abs(analytic - numeric) / den


def _perturbed(base, h):
    """Stack ``base`` with +h / -h on each coordinate: shape ``(2, m, m)``."""
    m = base.size
    eye = np.eye(m) * h
    return np.stack([base + eye, base - eye])


def _exact_sum(terms):
    flat = terms.reshape(-1, terms.shape[-1])
    return np.array([math.fsum(row) for row in flat]).reshape(terms.shape[:-1])


def _central(terms, h):
    return _exact_sum(terms[0] - terms[1]) / (2.0 * h)


# forward-only per-class loss terms; leading axes are perturbation batches

def _gsoftmax_loss_rows(x, mu, sigma, lam, y):
    z = x + lam * gaussian_cdf(x, mu, sigma)
    shifted = z - z.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return -y * logp


def _multilabel_loss_rows(xp, xn, mp, sp, mn, sn, lam, y):
    up = xp + lam * gaussian_cdf(xp, mp, sp)
    un = xn + lam * gaussian_cdf(xn, mn, sn)
    return y * multilabel.softplus(-up) + (1 - y) * multilabel.softplus(un)


def _draw_gaussians(rng, m):
    lo, hi = np.log(SIGMA_RANGE[0]), np.log(SIGMA_RANGE[1])
    sigma = np.exp(rng.uniform(lo, hi, m))
    mu = rng.uniform(-2.0, 2.0, m)
    x = mu + sigma * rng.normal(0.0, 1.5, m)
    return x, mu, sigma


def check_single_label(rng, m, lam):
    """Return ``{block: (analytic, numeric)}`` for one random configuration."""
    x, mu, sigma = _draw_gaussians(rng, m)
    y = core.one_hot(rng.integers(m), m)
    params = core.PredictorParams(lam, mu, np.log(sigma))
    # sigma from the stored log is what the analytic side sees
    sigma = params.sigma
    _, g = core.gsoftmax_backward(x, y, params)
    h = FD_STEP
    num_x = _central(_gsoftmax_loss_rows(_perturbed(x, h), mu, sigma, lam, y), h)
    num_mu = _central(_gsoftmax_loss_rows(x, _perturbed(mu, h), sigma, lam, y), h)
    num_sigma = _central(_gsoftmax_loss_rows(x, mu, _perturbed(sigma, h), lam, y), h)
    return {"x": (g.d_x, num_x), "mu": (g.d_mu, num_mu), "sigma": (g.d_sigma, num_sigma)}


def check_multi_label(rng, m, lam):
    xp, mp, sp = _draw_gaussians(rng, m)
    xn, mn, sn = _draw_gaussians(rng, m)
    y = (rng.random(m) < 0.5).astype(np.float64)
    params = multilabel.DualPredictorParams(lam, mp, np.log(sp), mn, np.log(sn))
    sp, sn = params.sigma_pos, params.sigma_neg
    _, g = multilabel.gsoftmax_multilabel_loss(multilabel.DualFeatureVector(xp, xn), y, params)
    h = FD_STEP
    P = lambda a: _perturbed(a, h)  # noqa: E731
    f = _multilabel_loss_rows
    return {
        "pos": (g.d_pos, _central(f(P(xp), xn, mp, sp, mn, sn, lam, y), h)),
        "neg": (g.d_neg, _central(f(xp, P(xn), mp, sp, mn, sn, lam, y), h)),
        "mu_pos": (g.d_mu_pos, _central(f(xp, xn, P(mp), sp, mn, sn, lam, y), h)),
        "sigma_pos": (g.d_sigma_pos, _central(f(xp, xn, mp, P(sp), mn, sn, lam, y), h)),
        "mu_neg": (g.d_mu_neg, _central(f(xp, xn, mp, sp, P(mn), sn, lam, y), h)),
        "sigma_neg": (g.d_sigma_neg, _central(f(xp, xn, mp, sp, mn, P(sn), lam, y), h)),
    }


@dataclass
class BlockStat:
    max_rel_err: float = 0.0
    worst_seed: int = -1
    worst_index: int = -1
    max_abs: float = 0.0

    def update(self, analytic, numeric, seed):
        err = relative_error(analytic, numeric)
        k = int(np.argmax(err))
        if err[k] > self.max_rel_err or self.worst_seed < 0:
            self.max_rel_err, self.worst_seed, self.worst_index = float(err[k]), seed, k
        self.max_abs = max(self.max_abs, float(np.max(np.abs(analytic))))


@dataclass
class GradcheckReport:
    trials: int
    seed: int
    blocks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(b.max_rel_err <= TOLERANCE for b in self.blocks.values())

    def failures(self):
        return {k: b for k, b in self.blocks.items() if b.max_rel_err > TOLERANCE}

    def lines(self):
        out = []
        for name, b in self.blocks.items():
            status = "ok" if b.max_rel_err <= TOLERANCE else "FAIL"
            out.append(f"{name:24s} max_rel_err={b.max_rel_err:.3e} "
                       f"(seed={b.worst_seed}, index={b.worst_index}) {status}")
        return out


def run_gradcheck(trials=1000, seed=0, lambdas=LAMBDAS, class_counts=CLASS_COUNTS):
    """Run ``trials`` single-label and ``trials`` multi-label checks.

    Trial ``t`` uses seed ``seed + t`` and cycles through every
    (class count, lambda) combination.  Blocks are reported per loss and
    per lambda, so the lambda = 0 distribution blocks can be inspected on
    their own.
    """
    report = GradcheckReport(trials, seed)
    combos = [(m, lam) for m in class_counts for lam in lambdas]
    for t in range(trials):
        m, lam = combos[t % len(combos)]
        trial_seed = seed + t
        rng = np.random.default_rng(trial_seed)
        for prefix, check in (("single", check_single_label), ("multi", check_multi_label)):
            for block, (a, n) in check(rng, m, lam).items():
                key = f"{prefix}.{block}[lam={lam:g}]"
                report.blocks.setdefault(key, BlockStat()).update(a, n, trial_seed)
    return report
