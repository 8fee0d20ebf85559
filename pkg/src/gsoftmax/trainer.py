"""Desk-scale training: a ReLU MLP feature extractor under a chosen loss head.

The network's final linear layer produces the logits ``x`` that the
predictor consumes (``m`` wide, or ``2m`` for the dual multi-label
losses, split first half / second half).  Backpropagation is written by
hand.  Parameters, including the predictor's ``mu`` and ``log sigma``,
are updated with SGD with momentum and weight decay::

    v <- momentum * v - lr * (grad + weight_decay * w)
    w <- w + v

Training is single-threaded and bit-for-bit deterministic in the seed.
"""

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from . import core, multilabel
from .errors import DivergenceError, DomainError, ShapeError
from .metrics import binarize_predictions, per_class_average_precision, prf_metrics, ranked_from_matrix
from .special import gaussian_cdf

__all__ = [
    "LOSS_MODES",
    "MlpConfig",
    "Mlp",
    "HeadInit",
    "OptimizerState",
    "Model",
    "TrainResult",
    "FeatureDump",
    "sgd_step",
    "build_model",
    "train",
    "evaluate",
    "export_features",
]

log = logging.getLogger(__name__)

SINGLE_LABEL_MODES = ("softmax", "gsoftmax")
MULTI_LABEL_MODES = ("msml", "dual_sigmoid", "gsoftmax_multilabel")
LOSS_MODES = SINGLE_LABEL_MODES + MULTI_LABEL_MODES
DUAL_MODES = ("dual_sigmoid", "gsoftmax_multilabel")


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_dims: tuple
    output_dim: int
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(d < 1 for d in dims):
            raise DomainError(f"all layer widths must be >= 1, got {dims}")
        if self.activation != "relu":
            raise DomainError(f"unsupported activation {self.activation!r}")

    @property
    def dims(self):
        return (self.input_dim, *self.hidden_dims, self.output_dim)


class Mlp:
    """Fully connected ReLU network; the last layer is linear."""

    def __init__(self, config, weights=None, biases=None):
        self.config = config
        dims = config.dims
        if weights is None:
            rng = np.random.default_rng(config.seed)
            weights, biases = [], []
            for fan_in, fan_out in zip(dims[:-1], dims[1:]):
                limit = math.sqrt(6.0 / fan_in)
                weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
                biases.append(np.zeros(fan_out))
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for w, b, fi, fo in zip(self.weights, self.biases, dims[:-1], dims[1:]):
            if w.shape != (fi, fo) or b.shape != (fo,):
                raise ShapeError(f"layer shapes {w.shape}, {b.shape} do not match ({fi}, {fo})")

    def forward(self, x):
        """Return ``(outputs, activations)``; ``activations[k]`` feeds layer ``k``."""
        acts = [np.asarray(x, dtype=np.float64)]
        h = acts[0]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
                acts.append(h)
        return h, acts

    def backward(self, d_out, acts):
        """Gradients ``(dW list, db list)`` given d(loss)/d(outputs)."""
        dws = [None] * len(self.weights)
        dbs = [None] * len(self.weights)
        g = d_out
        for k in range(len(self.weights) - 1, -1, -1):
            dws[k] = acts[k].T @ g
            dbs[k] = g.sum(axis=0)
            if k:
                g = (g @ self.weights[k].T) * (acts[k] > 0)
        return dws, dbs

    def named_params(self):
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"W{k}", w
            yield f"b{k}", b

    def to_dict(self):
        return {
            "config": {
                "input_dim": self.config.input_dim,
                "hidden_dims": list(self.config.hidden_dims),
                "output_dim": self.config.output_dim,
                "activation": self.config.activation,
                "seed": self.config.seed,
            },
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(MlpConfig(**doc["config"]), doc["weights"], doc["biases"])


@dataclass(frozen=True)
class HeadInit:
    """Initial predictor parameters; ``learnable_lambda`` trains the CDF weight too."""

    lam: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    learnable_lambda: bool = False


@dataclass
class OptimizerState:
    """SGD hyper-parameters plus one velocity buffer per parameter name.

    ``decay_distribution=False`` exempts the predictor's parameters from
    weight decay; ``predictor_lr_mult`` scales their learning rate.
    """

    momentum: float = 0.9
    weight_decay: float = 5e-4
    decay_distribution: bool = True
    predictor_lr_mult: float = 1.0
    velocity: dict = field(default_factory=dict)


def sgd_step(params, grads, state, lr, decay=None, lr_mult=None):
    """Update every array in ``params`` in place.

    ``params`` and ``grads`` map names to arrays; ``decay``/``lr_mult``
    optionally override weight decay and rate scaling per name.
    """
    decay = decay or {}
    lr_mult = lr_mult or {}
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {w.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = state.velocity[name] = np.zeros_like(w)
        eps = decay.get(name, state.weight_decay)
        eta = lr * lr_mult.get(name, 1.0)
        v *= state.momentum
        v -= eta * (g + eps * w)
        w += v


class Model:
    """A network plus its loss head."""

    def __init__(self, mlp, mode, head=None, learnable_lambda=False):
        if mode not in LOSS_MODES:
            raise DomainError(f"unknown loss mode {mode!r}")
        self.mlp = mlp
        self.mode = mode
        self.head = head
        self.learnable_lambda = learnable_lambda
        width = mlp.config.output_dim
        if mode in DUAL_MODES and width % 2:
            raise ShapeError("dual multi-label modes need an even output width")

    @property
    def multilabel(self):
        return self.mode in MULTI_LABEL_MODES

    @property
    def num_classes(self):
        width = self.mlp.config.output_dim
        return width // 2 if self.mode in DUAL_MODES else width

    def features(self, x):
        out, _ = self.mlp.forward(x)
        return out

    def predict(self, x):
        """Class probabilities (single-label) or per-class scores (multi-label)."""
        return self.scores_from_features(self.features(x))

    def scores_from_features(self, out):
        if self.mode == "softmax":
            return core.softmax(out)
        if self.mode == "gsoftmax":
            return core.gsoftmax_forward(out, self.head)
        if self.mode == "msml":
            return multilabel.msml_scores(out)
        f = multilabel.split_dual(out)
        if self.mode == "dual_sigmoid":
            return multilabel.dual_sigmoid_scores(f)
        return multilabel.gsoftmax_multilabel_scores(f, self.head)

    def score_logits(self, out):
        """One real score per class, for the distribution analysis."""
        if self.mode not in DUAL_MODES:
            return out
        f = multilabel.split_dual(out)
        if self.mode == "dual_sigmoid":
            return f.x_pos - f.x_neg
        h = self.head
        u_pos = f.x_pos + h.lam * gaussian_cdf(f.x_pos, h.mu_pos, h.sigma_pos)
        u_neg = f.x_neg + h.lam * gaussian_cdf(f.x_neg, h.mu_neg, h.sigma_neg)
        return u_pos + u_neg

    def loss_and_grads(self, out, targets):
        """Return ``(loss, d_out, head_params, head_grads)`` for a batch."""
        mode = self.mode
        if mode == "softmax":
            loss, d_out = core.softmax_cross_entropy(out, targets)
            return loss, d_out, {}, {}
        if mode == "gsoftmax":
            loss, g = core.gsoftmax_backward(out, targets, self.head)
            params = {"mu": self.head.mu, "log_sigma": self.head.log_sigma}
            grads = {"mu": g.d_mu, "log_sigma": g.d_log_sigma}
            if self.learnable_lambda:
                params["lambda"], grads["lambda"] = self._lam_buffer(), np.array([g.d_lambda])
            return loss, g.d_x, params, grads
        if mode == "msml":
            loss, d_out = multilabel.msml_loss(out, targets)
            return loss, d_out, {}, {}
        f = multilabel.split_dual(out)
        if mode == "dual_sigmoid":
            loss, d_pos, d_neg = multilabel.dual_sigmoid_loss(f, targets)
            return loss, np.concatenate([d_pos, d_neg], axis=-1), {}, {}
        h = self.head
        loss, g = multilabel.gsoftmax_multilabel_loss(f, targets, h)
        params = {"mu_pos": h.mu_pos, "log_sigma_pos": h.log_sigma_pos,
                  "mu_neg": h.mu_neg, "log_sigma_neg": h.log_sigma_neg}
        grads = {"mu_pos": g.d_mu_pos, "log_sigma_pos": h.sigma_pos * g.d_sigma_pos,
                 "mu_neg": g.d_mu_neg, "log_sigma_neg": h.sigma_neg * g.d_sigma_neg}
        if self.learnable_lambda:
            params["lambda"], grads["lambda"] = self._lam_buffer(), np.array([g.d_lambda])
        return loss, np.concatenate([g.d_pos, g.d_neg], axis=-1), params, grads

    def _lam_buffer(self):
        if not hasattr(self, "_lam"):
            self._lam = np.array([self.head.lam])
        return self._lam

    def sync_lambda(self):
        if self.learnable_lambda and hasattr(self, "_lam"):
            # lambda >= 0 is part of the predictor contract
            self._lam[0] = max(self._lam[0], 0.0)
            self.head.lam = float(self._lam[0])

    def to_dict(self):
        return {
            "mode": self.mode,
            "learnable_lambda": self.learnable_lambda,
            "mlp": self.mlp.to_dict(),
            "head": None if self.head is None else self.head.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        mode = doc["mode"]
        head = doc.get("head")
        if head is not None:
            head = (core.PredictorParams.from_dict(head) if mode == "gsoftmax"
                    else multilabel.DualPredictorParams.from_dict(head))
        return cls(Mlp.from_dict(doc["mlp"]), mode, head, doc.get("learnable_lambda", False))


def build_model(config, mode, head_init=HeadInit()):
    """Fresh model; ``config.output_dim`` must be ``m`` (or ``2m`` for dual modes)."""
    mlp = Mlp(config)
    model = Model(mlp, mode, learnable_lambda=head_init.learnable_lambda)
    m = model.num_classes
    if mode == "gsoftmax":
        model.head = core.PredictorParams.init(m, head_init.lam, head_init.mu, head_init.sigma)
    elif mode == "gsoftmax_multilabel":
        model.head = multilabel.DualPredictorParams.init(m, head_init.lam, head_init.mu, head_init.sigma)
    return model


def _head_sigmas_ok(head):
    # log sigma can be finite while exp() overflows to inf or underflows to 0
    if head is None:
        return True
    sigmas = [head.sigma] if isinstance(head, core.PredictorParams) else [head.sigma_pos, head.sigma_neg]
    return all(np.all(np.isfinite(s) & (s > 0)) for s in sigmas)


def _targets(model, y):
    if model.multilabel:
        return np.asarray(y, dtype=np.float64)
    return core.one_hot(y, model.num_classes)


def evaluate(model, data):
    """Loss and task metrics over a full dataset.

    Single-label: accuracy plus one-vs-rest per-class AP.  Multi-label:
    mAP, per-class AP and the precision/recall/F1 block at threshold 0.5.
    """
    out = model.features(data.x)
    loss, _, _, _ = model.loss_and_grads(out, _targets(model, data.y))
    scores = model.scores_from_features(out)
    if model.multilabel:
        targets = data.y
    else:
        targets = core.one_hot(data.y, model.num_classes).astype(np.int64)
    aps, excluded = per_class_average_precision(ranked_from_matrix(scores, targets))
    result = {"loss": loss, "per_class_ap": aps, "ap_excluded": excluded,
              "mAP": float(np.mean(list(aps.values()))) if aps else float("nan")}
    if model.multilabel:
        result.update(prf_metrics(binarize_predictions(scores, targets, 0.5)))
        result["metric"] = result["mAP"]
    else:
        result["accuracy"] = float(np.mean(np.argmax(scores, axis=1) == data.y))
        result["metric"] = result["accuracy"]
    return result


@dataclass
class TrainResult:
    model: Model
    history: list
    initial_loss: float
    final_loss: float


def train(config, loss_mode, schedule, opt, train_data, test_data=None, epochs=None,
          batch_size=64, head_init=HeadInit(), seed=None):
    """Train a fresh model; returns :class:`TrainResult`.

    ``seed`` (default ``config.seed``) drives the minibatch order.  Each
    history row holds ``epoch, lr, loss`` (mean minibatch loss), the
    train metric and, with ``test_data``, the test metric.  The metric is
    accuracy for single-label modes and mAP for multi-label ones.
    """
    if batch_size < 1:
        raise DomainError("batch_size must be >= 1")
    epochs = schedule.max_epoch if epochs is None else epochs
    if epochs > schedule.max_epoch:
        raise DomainError(f"schedule covers {schedule.max_epoch} epochs, asked for {epochs}")
    if train_data.x.shape[1] != config.input_dim:
        raise ShapeError(f"data has {train_data.x.shape[1]} features, network expects {config.input_dim}")

    model = build_model(config, loss_mode, head_init)
    if model.multilabel != train_data.multilabel:
        raise DomainError(f"loss mode {loss_mode!r} does not fit this dataset's label format")
    if model.num_classes != train_data.num_classes:
        raise ShapeError(f"network has {model.num_classes} classes, data has {train_data.num_classes}")

    rng = np.random.default_rng(config.seed if seed is None else seed)
    # fresh velocity buffers: a reused OptimizerState must not leak momentum between runs
    opt = replace(opt, velocity={})
    mlp = model.mlp
    net_params = dict(mlp.named_params())
    n = len(train_data)
    initial_loss = evaluate(model, train_data)["loss"]
    history = []
    step = 0
    for epoch in range(1, epochs + 1):
        lr = schedule.rate(epoch)
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                out, acts = mlp.forward(train_data.x[idx])
            if not np.all(np.isfinite(out)):
                raise DivergenceError(f"non-finite network output at epoch {epoch}, step {step}",
                                      epoch, step)
            loss, d_out, head_params, head_grads = model.loss_and_grads(
                out, _targets(model, train_data.y[idx]))
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, step {step}", epoch, step)
            dws, dbs = mlp.backward(d_out, acts)
            grads = {}
            for k, (dw, db) in enumerate(zip(dws, dbs)):
                grads[f"W{k}"], grads[f"b{k}"] = dw, db
            params = dict(net_params)
            decay, mult = {}, {}
            for name, arr in head_params.items():
                key = "head." + name
                params[key], grads[key] = arr, head_grads[name]
                mult[key] = opt.predictor_lr_mult
                if not opt.decay_distribution:
                    decay[key] = 0.0
            sgd_step(params, grads, opt, lr, decay, mult)
            bad = next((k for k, v in params.items() if not np.all(np.isfinite(v))), None)
            if bad is None and not _head_sigmas_ok(model.head):
                bad = "head.log_sigma"
            if bad is not None:
                raise DivergenceError(f"parameter {bad} became non-finite at epoch {epoch}, step {step}",
                                      epoch, step)
            model.sync_lambda()
            batch_losses.append(loss)
            step += 1
        row = {"epoch": epoch, "lr": lr, "loss": float(np.mean(batch_losses)),
               "train_metric": evaluate(model, train_data)["metric"]}
        if test_data is not None:
            row["test_metric"] = evaluate(model, test_data)["metric"]
        history.append(row)
        log.debug("epoch %d lr=%.3g loss=%.4f", epoch, lr, row["loss"])
    final_loss = evaluate(model, train_data)["loss"]
    return TrainResult(model, history, initial_loss, final_loss)


@dataclass
class FeatureDump:
    """Network outputs (the predictor's input) for every sample."""

    labels: np.ndarray
    features: np.ndarray
    scores: np.ndarray

    def rows(self):
        """``label..., feature...`` rows; multi-label targets are spread over columns."""
        labels = self.labels if self.labels.ndim == 2 else self.labels[:, None]
        return np.concatenate([labels.astype(np.float64), self.features], axis=1)


def export_features(model, data):
    out = model.features(data.x)
    return FeatureDump(np.asarray(data.y), out, model.scores_from_features(out))
