"""Value types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when a dataset violates its structural invariants."""


class Sample(NamedTuple):
    features: Sequence[float]
    target: int
    group: int


class Violation(NamedTuple):
    row: int
    rule: str

    def __str__(self):
        return f"row {self.row}: {self.rule}"


def _as_frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with a binary target and a binary sensitive attribute per row.

    Arrays are copied and made read-only on construction.
    """

    X: np.ndarray
    y: np.ndarray
    s: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
        object.__setattr__(self, "X", _as_frozen(X, np.float64))
        object.__setattr__(self, "y", _as_frozen(np.asarray(self.y).ravel(), np.int64))
        object.__setattr__(self, "s", _as_frozen(np.asarray(self.s).ravel(), np.int64))
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(self.p))
        object.__setattr__(self, "feature_names", names)
        problems = validate(self)
        if problems:
            shown = "; ".join(str(v) for v in problems[:5])
            more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
            raise DataError(f"invalid dataset: {shown}{more}")

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], feature_names=()) -> "Dataset":
        problems = validate_samples(samples)
        if problems:
            raise DataError("invalid samples: " + "; ".join(str(v) for v in problems[:5]))
        X = np.array([list(smp.features) for smp in samples], dtype=np.float64)
        if not samples:
            X = X.reshape(0, 0)
        return cls(X, [smp.target for smp in samples], [smp.group for smp in samples], feature_names)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1]) if self.X.ndim == 2 else 0

    @property
    def n0(self) -> int:
        return int(np.count_nonzero(self.s == 0))

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.s == 1))

    def samples(self):
        for row, target, group in zip(self.X, self.y, self.s):
            yield Sample(tuple(row), int(target), int(group))

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.X[index], self.y[index], self.s[index], self.feature_names)

    def replace(self, *, X=None, y=None, s=None) -> "Dataset":
        return Dataset(
            self.X if X is None else X,
            self.y if y is None else y,
            self.s if s is None else s,
            self.feature_names,
        )


def validate_samples(samples: Sequence[Sample], p: int | None = None) -> list[Violation]:
    """Check raw samples; ``p`` defaults to the first row's feature length."""
    out = []
    if p is None and samples:
        p = len(samples[0].features)
    for i, smp in enumerate(samples):
        if smp.target not in (0, 1):
            out.append(Violation(i, f"target must be 0 or 1, got {smp.target!r}"))
        if smp.group not in (0, 1):
            out.append(Violation(i, f"group must be 0 or 1, got {smp.group!r}"))
        if len(smp.features) != p:
            out.append(Violation(i, f"feature length {len(smp.features)} != {p}"))
    return out


def validate(data) -> list[Violation]:
    """Return every invariant violation of a Dataset or a sequence of Samples.

    An empty list means the data is well formed. Violations are returned, not raised.
    """
    if not isinstance(data, Dataset):
        return validate_samples(list(data))
    out = []
    n = data.y.shape[0]
    if data.X.shape[0] != n and data.X.size:
        out.append(Violation(-1, f"feature matrix has {data.X.shape[0]} rows, targets {n}"))
    if data.s.shape[0] != n:
        out.append(Violation(-1, f"sensitive attribute has {data.s.shape[0]} rows, targets {n}"))
    for i in np.flatnonzero((data.y != 0) & (data.y != 1)):
        out.append(Violation(int(i), f"target must be 0 or 1, got {data.y[i]}"))
    for i in np.flatnonzero((data.s != 0) & (data.s != 1)):
        out.append(Violation(int(i), f"group must be 0 or 1, got {data.s[i]}"))
    if data.X.size:
        for i in np.flatnonzero(~np.isfinite(data.X).all(axis=1)):
            out.append(Violation(int(i), "non-finite feature value"))
    return out


class PenaltyKind(str, enum.Enum):
    NONE = "none"
    PREDICTION_W2 = "pred-w2"
    ERROR_W2 = "err-w2"
    PREDICTION_W1 = "pred-w1"


@dataclass(frozen=True)
class PenaltySpec:
    """Active fairness penalty and its weight.

    ``subsample_cap`` defaults to ten times the grid size.
    """

    kind: PenaltyKind = PenaltyKind.NONE
    lam: float = 0.0
    auto_tune: bool = False
    grid_size: int = 100
    subsample_cap: int | None = None
    coarse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        if self.subsample_cap is None:
            object.__setattr__(self, "subsample_cap", 10 * self.grid_size)
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.grid_size < 2:
            raise ValueError(f"grid size must be >= 2, got {self.grid_size}")
        if self.subsample_cap < self.grid_size:
            raise ValueError("subsample cap must be >= grid size")

    @property
    def active(self) -> bool:
        return self.kind is not PenaltyKind.NONE


@dataclass(frozen=True)
class OptimizerSpec:
    name: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.name not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.name!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 50
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    seed: int = 0
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    warm_epochs: int = 3
    alpha_init: float = 0.5
    acc_floor: float = 0.75
    di_floor: float = 0.85
    resample_per: str = "batch"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.resample_per not in ("batch", "epoch"):
            raise ValueError("resample_per must be 'batch' or 'epoch'")
