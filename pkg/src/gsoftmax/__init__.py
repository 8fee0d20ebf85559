"""Gaussian-augmented softmax predictors with analytic gradients and analysis tools."""

from .core import (GradBundle, PredictorParams, augment_logits, cross_entropy, gsoftmax_backward,
                   gsoftmax_forward, log_softmax, one_hot, softmax, softmax_cross_entropy)
from .errors import (ConfigError, DegenerateError, DivergenceError, DomainError, FormatError,
                     GSoftmaxError, ShapeError)
from .multilabel import (DualFeatureVector, DualPredictorParams, dual_sigmoid_loss,
                         gsoftmax_multilabel_loss, msml_loss)
from .schedule import ScheduleSpec, StaircaseSpec, logspace_rate, rate_at
from .special import GaussianParams, erf, erfc, gaussian_cdf, gaussian_cdf_grads, gaussian_pdf

__version__ = "0.1.0"
