"""Per-sample gradients of the Wasserstein fairness penalties.

The group CDFs are tabulated once (on a large population or subsample) and
each batch sample then costs two binary searches and two interpolations.
For a sample with value ``v`` in group ``s`` the W2 estimate is::

    (2 dtau / #B) * (v - cor(v)) / (n_s * (H_s^{j+1} - H_s^j))

where ``j`` is the bin containing ``v`` and ``cor(v)`` is the value at the
same quantile level in the other group. The bin-mass denominator is floored
at one sample so empty bins keep gradients finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .empirical import DEFAULT_PAD, DiscreteCdf, make_grid, build_cdf, w1_distance, w2_distance


@dataclass(frozen=True)
class PenaltyContext:
    cdf0: DiscreteCdf | None
    cdf1: DiscreteCdf | None
    batch_size: int | None = None

    def __post_init__(self):
        if self.cdf0 is not None and self.cdf1 is not None and self.cdf0.grid != self.cdf1.grid:
            raise ValueError("grid mismatch")

    @property
    def grid(self):
        return (self.cdf0 or self.cdf1).grid

    @property
    def dtau(self) -> float:
        return 1.0 / self.grid.J

    @classmethod
    def from_values(cls, values, groups, J: int, batch_size=None, pad: float = DEFAULT_PAD):
        """Shared grid over ``values``; a group with no members gets ``None``."""
        values = np.asarray(values, dtype=np.float64).ravel()
        groups = np.asarray(groups).ravel()
        grid = make_grid(values, J, pad)
        cdfs = []
        for g in (0, 1):
            part = values[groups == g]
            cdfs.append(build_cdf(part, grid) if part.size else None)
        return cls(cdfs[0], cdfs[1], batch_size)

    def w2(self) -> float:
        return w2_distance(self.cdf0, self.cdf1)

    def w1(self) -> float:
        return w1_distance(self.cdf0, self.cdf1)


def _terms(ctx: PenaltyContext, values, groups, mode):
    values = np.asarray(values, dtype=np.float64).ravel()
    groups = np.asarray(groups).ravel()
    if values.shape != groups.shape:
        raise ValueError("values and groups differ in length")
    out = np.zeros_like(values)
    members = [groups == 0, groups == 1]
    if not (members[0].any() and members[1].any()):
        return out
    for g in (0, 1):
        own, other = (ctx.cdf0, ctx.cdf1) if g == 0 else (ctx.cdf1, ctx.cdf0)
        if own is None or other is None:
            raise ValueError("missing group CDF")
        out[members[g]] = _kernels.transport_terms(
            own.grid.eta, own.counts, own.group_count, other.levels, values[members[g]], mode
        )
    return out


def _batch_size(ctx, values):
    return ctx.batch_size or np.asarray(values).size


def grad_w2_prediction(ctx: PenaltyContext, scores, groups, coarse: bool = False) -> np.ndarray:
    """W2 penalty gradient w.r.t. each batch score.

    ``coarse=True`` replaces the interpolated coupling by nearest grid knots.
    Returns zeros when the batch holds a single group.
    """
    mode = _kernels.MODE_W2_COARSE if coarse else _kernels.MODE_W2
    return (2.0 * ctx.dtau / _batch_size(ctx, scores)) * _terms(ctx, scores, groups, mode)


def grad_w2_on_errors(ctx: PenaltyContext, errors, groups) -> np.ndarray:
    """W2 gradient w.r.t. squared errors; ``ctx`` must be built on squared errors."""
    return grad_w2_prediction(ctx, errors, groups)


def grad_w2_error(ctx: PenaltyContext, scores, targets, groups) -> np.ndarray:
    """Gradient of the W2 distance between group squared-error distributions w.r.t. scores."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    resid = scores - np.asarray(targets, dtype=np.float64).ravel()
    terms = _terms(ctx, resid * resid, groups, _kernels.MODE_W2)
    return (4.0 * ctx.dtau / _batch_size(ctx, scores)) * terms * resid


def grad_w1_prediction(ctx: PenaltyContext, scores, groups) -> np.ndarray:
    """W1 penalty gradient; only the sign of the transport offset enters."""
    return (ctx.dtau / _batch_size(ctx, scores)) * _terms(ctx, scores, groups, _kernels.MODE_W1)
