"""Score models: a ReLU MLP with a sigmoid output, and logistic regression.

Checkpoints are little-endian binary files::

    magic  b"W2FCKPT\\0"      8 bytes
    version, kind, n_layers  uint32 each
    dims                     uint32 * (n_layers + 1)
    per layer: weights (in x out, row-major) then biases (out), float64
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datamodel import PenaltyKind, PenaltySpec
from .empirical import exact_wasserstein

DEFAULT_HIDDEN = (64, 32, 16)
PROB_CLIP = 1e-12
FD_STEP = 1e-5

_MAGIC = b"W2FCKPT\0"
_VERSION = 1
_KIND_MLP = 1
_KIND_LOGISTIC = 2


class CheckpointError(ValueError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_features(X, p):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != p:
        raise ValueError(f"model expects {p} features, got {X.shape[1]}")
    return X


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (W.shape[1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not match {W.shape}")
            if i and self.weights[i - 1].shape[1] != W.shape[0]:
                raise ValueError(f"layer {i}: input width {W.shape[0]} breaks the chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have width 1")

    @classmethod
    def init(cls, n_in: int, hidden=DEFAULT_HIDDEN, rng=None) -> "Mlp":
        """Uniform init scaled by ``1/sqrt(fan_in)``."""
        rng = np.random.default_rng(rng)
        dims = [n_in, *hidden, 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, dims) -> "Mlp":
        return cls(
            [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])],
            [np.zeros(b) for b in dims[1:]],
        )

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        """Flat parameter list, ``[W0, b0, W1, b1, ...]`` (live references)."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def copy(self) -> "Mlp":
        return Mlp([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = sigmoid(z) if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def forward(self, X) -> np.ndarray:
        X = _check_features(X, self.dims[0])
        return self._forward(X)[-1][:, 0]

    def backward(self, X, upstream) -> list[np.ndarray]:
        """Gradients of ``sum_i upstream_i * f(X_i)`` in :attr:`params` order."""
        X = _check_features(X, self.dims[0])
        upstream = np.asarray(upstream, dtype=np.float64).ravel()
        if upstream.shape[0] != X.shape[0]:
            raise ValueError(f"{upstream.shape[0]} upstream gradients for {X.shape[0]} rows")
        acts = self._forward(X)
        out = acts[-1]
        delta = (upstream * out[:, 0] * (1.0 - out[:, 0]))[:, None]
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append(acts[i].T @ delta)
            if i:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        grads.reverse()
        return grads


@dataclass
class LogisticModel:
    theta0: float
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.theta0 = float(self.theta0)
        self.theta = np.asarray(self.theta, dtype=np.float64).ravel()
        if not (np.isfinite(self.theta0) and np.isfinite(self.theta).all()):
            raise ValueError("non-finite logistic parameters")

    @classmethod
    def zeros(cls, p: int) -> "LogisticModel":
        return cls(0.0, np.zeros(p))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(([self.theta0], self.theta))

    @classmethod
    def from_vector(cls, v) -> "LogisticModel":
        return cls(v[0], v[1:])

    def forward(self, X) -> np.ndarray:
        X = _check_features(X, self.theta.size)
        return sigmoid(self.theta0 + X @ self.theta)


def forward(model, X) -> np.ndarray:
    return model.forward(X)


def backward(model: Mlp, X, upstream) -> list[np.ndarray]:
    return model.backward(X, upstream)


def loss_grad(scores, targets) -> np.ndarray:
    """Per-sample derivative of the batch-mean square loss."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if scores.shape != targets.shape:
        raise ValueError("scores and targets differ in length")
    return 2.0 * (scores - targets) / scores.size


def square_loss(scores, targets) -> float:
    return float(np.mean((np.asarray(scores) - np.asarray(targets)) ** 2))


def penalty_value(kind: PenaltyKind, scores, targets, groups) -> float:
    """Exact empirical Wasserstein penalty on the whole set (0 for no penalty)."""
    kind = PenaltyKind(kind)
    if kind is PenaltyKind.NONE:
        return 0.0
    scores = np.asarray(scores, dtype=np.float64)
    groups = np.asarray(groups)
    values = scores
    if kind is PenaltyKind.ERROR_W2:
        values = (scores - np.asarray(targets, dtype=np.float64)) ** 2
    p = 1.0 if kind is PenaltyKind.PREDICTION_W1 else 2.0
    return exact_wasserstein(values[groups == 0], values[groups == 1], p)


def logistic_energy(model: LogisticModel, dataset, penalty: PenaltySpec) -> float:
    """Negative mean log-likelihood plus ``lambda`` times the group penalty."""
    scores = model.forward(dataset.X)
    clipped = np.clip(scores, PROB_CLIP, 1.0 - PROB_CLIP)
    y = dataset.y
    nll = -float(np.mean(y * np.log(clipped) + (1 - y) * np.log1p(-clipped)))
    if penalty.lam == 0 or not penalty.active:
        return nll
    return nll + penalty.lam * penalty_value(penalty.kind, scores, y, dataset.s)


def logistic_fd_gradient(model: LogisticModel, dataset, penalty: PenaltySpec, h: float = FD_STEP) -> np.ndarray:
    """Central differences over the p+1 parameters (2(p+1) energy evaluations)."""
    base = model.vector
    grad = np.empty_like(base)
    for k in range(base.size):
        up = base.copy()
        up[k] += h
        down = base.copy()
        down[k] -= h
        e_up = logistic_energy(LogisticModel.from_vector(up), dataset, penalty)
        e_down = logistic_energy(LogisticModel.from_vector(down), dataset, penalty)
        grad[k] = (e_up - e_down) / (2 * h)
    return grad


def logistic_fd_step(model: LogisticModel, dataset, penalty: PenaltySpec, lr: float = 0.5, h: float = FD_STEP) -> LogisticModel:
    """One full-batch gradient-descent step using finite-difference gradients."""
    if dataset.n == 0:
        raise ValueError("empty dataset")
    grad = logistic_fd_gradient(model, dataset, penalty, h)
    return LogisticModel.from_vector(model.vector - lr * grad)


def fit_logistic(dataset, penalty: PenaltySpec, iterations: int = 300, lr: float = 0.5, h: float = FD_STEP):
    model = LogisticModel.zeros(dataset.p)
    for _ in range(iterations):
        model = logistic_fd_step(model, dataset, penalty, lr, h)
    return model


def to_bytes(model) -> bytes:
    if isinstance(model, LogisticModel):
        kind = _KIND_LOGISTIC
        weights, biases = [model.theta.reshape(-1, 1)], [np.array([model.theta0])]
    else:
        kind = _KIND_MLP
        weights, biases = model.weights, model.biases
    dims = [weights[0].shape[0]] + [W.shape[1] for W in weights]
    parts = [_MAGIC, struct.pack("<3I", _VERSION, kind, len(weights)), struct.pack(f"<{len(dims)}I", *dims)]
    for W, b in zip(weights, biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def from_bytes(blob: bytes):
    if blob[:8] != _MAGIC:
        raise CheckpointError("not a checkpoint file")
    try:
        version, kind, n_layers = struct.unpack_from("<3I", blob, 8)
        if version != _VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        offset = 20
        dims = struct.unpack_from(f"<{n_layers + 1}I", blob, offset)
        offset += 4 * (n_layers + 1)
        weights, biases = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            W = np.frombuffer(blob, dtype="<f8", count=a * b, offset=offset).reshape(a, b)
            offset += 8 * a * b
            bias = np.frombuffer(blob, dtype="<f8", count=b, offset=offset)
            offset += 8 * b
            weights.append(W.astype(np.float64))
            biases.append(bias.astype(np.float64))
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"truncated checkpoint: {exc}") from exc
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes in checkpoint")
    if kind == _KIND_LOGISTIC:
        return LogisticModel(biases[0][0], weights[0][:, 0])
    if kind == _KIND_MLP:
        return Mlp(weights, biases)
    raise CheckpointError(f"unknown model kind {kind}")


def save_checkpoint(model, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_checkpoint(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return from_bytes(blob)
