"""Fair binary classification with Wasserstein penalties on group score distributions."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .datamodel import (
    Dataset,
    DataError,
    OptimizerSpec,
    PenaltyKind,
    PenaltySpec,
    Sample,
    TrainConfig,
    validate,
)
from .empirical import (
    DiscreteCdf,
    ValueGrid,
    build_cdf,
    cor,
    exact_wasserstein,
    inverse_cdf,
    locate_bin,
    make_grid,
    w1_distance,
    w2_distance,
)
from .fairgrad import PenaltyContext, grad_w1_prediction, grad_w2_error, grad_w2_prediction
from .metrics import FairnessReport, audit, disparate_impact, dmse, equalized_odds
from .model import LogisticModel, Mlp, loss_grad
from .trainer import RunHistory, auto_lambda_update, train

__all__ = [
    "BACKEND", "Dataset", "DataError", "OptimizerSpec", "PenaltyKind", "PenaltySpec", "Sample",
    "TrainConfig", "validate", "DiscreteCdf", "ValueGrid", "build_cdf", "cor", "exact_wasserstein",
    "inverse_cdf", "locate_bin", "make_grid", "w1_distance", "w2_distance", "PenaltyContext",
    "grad_w1_prediction", "grad_w2_error", "grad_w2_prediction", "FairnessReport", "audit",
    "disparate_impact", "dmse", "equalized_odds", "LogisticModel", "Mlp", "loss_grad",
    "RunHistory", "auto_lambda_update", "train",
]
