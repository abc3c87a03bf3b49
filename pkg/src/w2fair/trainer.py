"""Mini-batch training with a Wasserstein fairness penalty.

Per batch: tabulate the two group CDFs from current scores (whole training
set, or a random subsample when it is larger than the cap), score the batch,
add ``lambda`` times the per-sample penalty gradient to the loss gradient and
backpropagate the sum.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .datamodel import Dataset, OptimizerSpec, PenaltyKind, TrainConfig
from .fairgrad import PenaltyContext, grad_w1_prediction, grad_w2_error, grad_w2_prediction
from .metrics import FairnessReport, report_from_scores
from .model import Mlp, loss_grad, penalty_value, square_loss

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


# -- optimizers ---------------------------------------------------------------


def sgd_step(params, grads, lr: float):
    """In-place ``p -= lr * g``; returns ``params``."""
    for p, g in zip(params, grads):
        p -= lr * g
    return params


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, spec: OptimizerSpec = OptimizerSpec()):
    """In-place bias-corrected Adam update; returns ``(params, state)``."""
    state.t += 1
    b1, b2 = spec.beta1, spec.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= spec.lr * (m / c1) / (np.sqrt(v / c2) + spec.eps)
    return params, state


class _Optimizer:
    def __init__(self, spec: OptimizerSpec, params):
        self.spec = spec
        self.state = AdamState.zeros_like(params) if spec.name == "adam" else None

    def step(self, params, grads):
        if self.state is None:
            sgd_step(params, grads, self.spec.lr)
        else:
            adam_step(params, grads, self.state, self.spec)


# -- automatic lambda ---------------------------------------------------------


@dataclass(frozen=True)
class AutoLambdaState:
    """Weight schedule: ``lambda = 0`` while warming, then ``alpha * d_r / d_w2``.

    ``d_r`` and ``d_w2`` are the mean absolute per-sample gradients of the loss
    and penalty terms collected during warming.
    """

    alpha: float = 0.5
    d_r: float = 0.0
    d_w2: float = 0.0
    warm_epochs: int = 3
    acc_floor: float = 0.75
    di_floor: float = 0.85
    use_dmse: bool = False
    warmed: bool = False
    sum_r: float = 0.0
    sum_w2: float = 0.0
    count: int = 0

    @property
    def lam(self) -> float:
        if not self.warmed or self.d_w2 == 0:
            return 0.0
        return self.alpha * self.d_r / self.d_w2

    def accumulate(self, loss_grads, penalty_grads) -> "AutoLambdaState":
        return replace(
            self,
            sum_r=self.sum_r + float(np.abs(loss_grads).sum()),
            sum_w2=self.sum_w2 + float(np.abs(penalty_grads).sum()),
            count=self.count + len(loss_grads),
        )

    def finish_warmup(self) -> "AutoLambdaState":
        n = max(self.count, 1)
        return replace(self, d_r=self.sum_r / n, d_w2=self.sum_w2 / n, warmed=True)


def auto_lambda_update(state: AutoLambdaState, accuracy: float, fairness: float) -> AutoLambdaState:
    """Shrink alpha by 0.9 when accuracy is too low, else grow it by 1.1 when unfair.

    ``fairness`` is the DI, or the DMSE for the error penalty.
    """
    if accuracy < state.acc_floor:
        return replace(state, alpha=state.alpha * 0.9)
    if fairness < state.di_floor:
        return replace(state, alpha=state.alpha * 1.1)
    return state


# -- history ------------------------------------------------------------------


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lam: float
    alpha: float
    train_loss: float
    w2_pred: float
    penalty: float
    train: FairnessReport
    test: FairnessReport | None = None


@dataclass
class RunHistory:
    records: list[EpochRecord] = field(default_factory=list)
    cdf_builds: int = 0

    def append(self, rec: EpochRecord):
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError("epoch indices must increase")
        self.records.append(rec)

    @property
    def lambdas(self) -> list[float]:
        return [r.lam for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        head = FairnessReport.csv_header()
        writer.writerow(
            ["epoch", "lambda", "alpha", "train_loss", "w2_pred", "penalty"]
            + [f"train_{h}" for h in head]
            + [f"test_{h}" for h in head]
        )
        for r in self.records:
            test = r.test.csv_row() if r.test else [""] * len(head)
            writer.writerow(
                [r.epoch] + [repr(float(x)) for x in (r.lam, r.alpha, r.train_loss, r.w2_pred, r.penalty)]
                + r.train.csv_row() + test
            )
        return buf.getvalue()


# -- training loop --------------------------------------------------------------


def _penalty_gradient(kind, ctx, scores, targets, groups, coarse):
    if kind is PenaltyKind.PREDICTION_W2:
        return grad_w2_prediction(ctx, scores, groups, coarse=coarse)
    if kind is PenaltyKind.ERROR_W2:
        return grad_w2_error(ctx, scores, targets, groups)
    return grad_w1_prediction(ctx, scores, groups)


def _penalty_values(kind, scores, targets):
    if kind is PenaltyKind.ERROR_W2:
        return (scores - targets) ** 2
    return scores


def _check_finite(arr, term, epoch, batch):
    if not np.isfinite(arr).all():
        raise TrainingError(f"non-finite {term} gradient at epoch {epoch}, batch {batch}")


def train(dataset: Dataset, config: TrainConfig, model: Mlp, test: Dataset | None = None):
    """Train a copy of ``model``; returns ``(trained_model, RunHistory)``."""
    if dataset.n0 == 0 or dataset.n1 == 0:
        raise TrainingError("training set must contain both groups")
    if config.batch_size > dataset.n:
        raise TrainingError(f"batch size {config.batch_size} exceeds dataset size {dataset.n}")
    pen = config.penalty
    model = model.copy()
    params = model.params
    opt = _Optimizer(config.optimizer, params)
    order_rng, sub_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(2))

    auto = None
    lam = pen.lam if pen.active else 0.0
    if pen.active and pen.auto_tune:
        auto = AutoLambdaState(
            alpha=config.alpha_init,
            warm_epochs=config.warm_epochs,
            acc_floor=config.acc_floor,
            di_floor=config.di_floor,
            use_dmse=pen.kind is PenaltyKind.ERROR_W2,
        )
        lam = 0.0

    X, y, s = dataset.X, dataset.y.astype(np.float64), dataset.s
    n, B = dataset.n, config.batch_size
    n_batches = math.ceil(n / B)
    cap = pen.subsample_cap
    history = RunHistory()
    last_report = None
    pop_idx = None

    for epoch in range(config.epochs):
        if auto is not None:
            if epoch == auto.warm_epochs:
                auto = auto.finish_warmup()
                log.info("warm-up done: d_r=%.3e d_w2=%.3e", auto.d_r, auto.d_w2)
            elif auto.warmed:
                fair = last_report.dmse if auto.use_dmse else last_report.di
                auto = auto_lambda_update(auto, last_report.accuracy, fair)
            lam = auto.lam
        order = order_rng.permutation(n)
        if pen.active and config.resample_per == "epoch" and n > cap:
            pop_idx = np.sort(sub_rng.choice(n, cap, replace=False))
        losses = []
        for b in range(n_batches):
            idx = order[b * B:(b + 1) * B]
            ctx = None
            if pen.active:
                if n <= cap:
                    pop = slice(None)
                elif config.resample_per == "batch":
                    pop = np.sort(sub_rng.choice(n, cap, replace=False))
                else:
                    pop = pop_idx
                pop_scores = model.forward(X[pop])
                values = _penalty_values(pen.kind, pop_scores, y[pop])
                ctx = PenaltyContext.from_values(values, s[pop], pen.grid_size, batch_size=len(idx))
                history.cdf_builds += 1
            Xb, yb, sb = X[idx], y[idx], s[idx]
            scores = model.forward(Xb)
            dl = loss_grad(scores, yb)
            _check_finite(dl, "loss", epoch, b)
            losses.append(square_loss(scores, yb))
            upstream = dl
            if ctx is not None:
                dw = _penalty_gradient(pen.kind, ctx, scores, yb, sb, pen.coarse)
                _check_finite(dw, "penalty", epoch, b)
                if auto is not None and not auto.warmed:
                    auto = auto.accumulate(dl, dw)
                if lam:
                    upstream = dl + lam * dw
            grads = model.backward(Xb, upstream)
            opt.step(params, grads)

        train_scores = model.forward(X)
        last_report = report_from_scores(train_scores, dataset.y, s)
        test_report = None
        if test is not None:
            test_report = report_from_scores(model.forward(test.X), test.y, test.s)
        rec = EpochRecord(
            epoch=epoch,
            lam=lam,
            alpha=auto.alpha if auto is not None else math.nan,
            train_loss=float(np.mean(losses)),
            w2_pred=penalty_value(PenaltyKind.PREDICTION_W2, train_scores, y, s),
            penalty=penalty_value(pen.kind, train_scores, y, s),
            train=last_report,
            test=test_report,
        )
        history.append(rec)
        log.info(
            "epoch %d lambda=%.4g loss=%.4f acc=%.4f di=%.4f",
            epoch, lam, rec.train_loss, last_report.accuracy, last_report.di,
        )
    return model, history
