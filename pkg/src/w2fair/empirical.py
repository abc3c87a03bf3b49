"""Empirical CDFs on regular value grids and 1-D Wasserstein distances between groups.

A :class:`DiscreteCdf` tabulates ``H(eta_j) = #{score < eta_j} / n`` at the
knots of a :class:`ValueGrid`. Between knots the CDF is taken to be linear, so
its inverse (the quantile function) is piecewise linear too.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels

DEFAULT_PAD = 0.01


@dataclass(frozen=True)
class ValueGrid:
    lo: float
    hi: float
    J: int

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"grid needs hi > lo, got [{self.lo}, {self.hi}]")
        if self.J < 1:
            raise ValueError("grid needs at least one step")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.J

    @cached_property
    def eta(self) -> np.ndarray:
        """The J+1 knots ``lo, lo + step, ..., hi`` (last one pinned to ``hi``)."""
        knots = self.lo + np.arange(self.J + 1, dtype=np.float64) * self.step
        knots[-1] = self.hi
        knots.setflags(write=False)
        return knots

    def contains(self, v) -> np.ndarray:
        v = np.asarray(v)
        return (v >= self.lo) & (v < self.hi)


def make_grid(scores, J: int, pad: float = 0.0) -> ValueGrid:
    """Regular grid spanning ``scores`` with ``hi`` strictly above the maximum.

    ``pad`` widens both ends by a fraction of the score range. If all scores
    are equal the grid falls back to ``[0, 1]`` for values inside the unit
    interval and to ``[v - 0.5, v + 0.5]`` otherwise.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError("empty score set")
    if J < 2:
        raise ValueError(f"J must be >= 2, got {J}")
    if pad < 0:
        raise ValueError("pad must be >= 0")
    mn, mx = float(scores.min()), float(scores.max())
    if not (np.isfinite(mn) and np.isfinite(mx)):
        raise ValueError("non-finite score")
    span = mx - mn
    if span <= 0:
        if 0.0 <= mn <= 1.0:
            return ValueGrid(0.0, 1.0, J)
        return ValueGrid(mn - 0.5, mn + 0.5, J)
    lo = mn - pad * span
    hi = mx + pad * span
    if hi <= mx:
        hi = mx + 4 * np.finfo(np.float64).eps * max(abs(mx), span)
    return ValueGrid(lo, hi, J)


@dataclass(frozen=True, eq=False)
class DiscreteCdf:
    """Group CDF tabulated on a grid.

    ``counts[j]`` is the number of scores strictly below knot ``j`` (j = 0..J),
    so every level is an exact multiple of ``1 / group_count``.
    """

    grid: ValueGrid
    counts: np.ndarray
    group_count: int

    @cached_property
    def levels(self) -> np.ndarray:
        """CDF at all J+1 knots, including ``eta_0 = lo``."""
        out = self.counts / self.group_count
        out.setflags(write=False)
        return out

    @property
    def values(self) -> np.ndarray:
        """``H^1 .. H^J``."""
        return self.levels[1:]

    def __eq__(self, other):
        if not isinstance(other, DiscreteCdf):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.group_count == other.group_count
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


def build_cdf(scores, grid: ValueGrid) -> DiscreteCdf:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError("empty group")
    counts = _kernels.cdf_counts(scores, grid.eta)
    counts.setflags(write=False)
    return DiscreteCdf(grid, counts, int(scores.size))


def _grid_of(obj) -> ValueGrid:
    return obj.grid if isinstance(obj, DiscreteCdf) else obj


def locate_bin(cdf_or_grid, v: float) -> tuple[int, bool]:
    """Bin ``j`` with ``eta_{j-1} <= v < eta_j`` and whether ``v`` had to be clamped."""
    idx, clamped = _kernels.locate_bins(_grid_of(cdf_or_grid).eta, np.array([v], dtype=np.float64))
    return int(idx[0]), bool(clamped[0])


def locate_bins(cdf_or_grid, values) -> tuple[np.ndarray, np.ndarray]:
    return _kernels.locate_bins(_grid_of(cdf_or_grid).eta, np.asarray(values, dtype=np.float64).ravel())


def _apply(fn, eta, levels, x):
    arr = np.asarray(x, dtype=np.float64)
    out = fn(eta, levels, arr.ravel())
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def cdf_at(cdf: DiscreteCdf, v):
    """Linearly interpolated CDF value at ``v`` (scalar or array)."""
    return _apply(_kernels.interp_levels, cdf.grid.eta, cdf.levels, v)


def inverse_cdf(cdf: DiscreteCdf, tau):
    """Piecewise-linear quantile function; flat CDF runs map to their left edge."""
    return _apply(_kernels.inverse_levels, cdf.grid.eta, cdf.levels, tau)


def cor(source: DiscreteCdf, target: DiscreteCdf, v):
    """Value at the same quantile level in ``target`` as ``v`` has in ``source``."""
    return inverse_cdf(target, cdf_at(source, v))


def _check_same_grid(a: DiscreteCdf, b: DiscreteCdf):
    if a.grid != b.grid:
        raise ValueError("grid mismatch")


def w2_distance(cdf0: DiscreteCdf, cdf1: DiscreteCdf) -> float:
    """Squared Wasserstein-2 distance, midpoint Euler sum with ``dtau = 1/J``."""
    _check_same_grid(cdf0, cdf1)
    return _kernels.quantile_distance(cdf0.grid.eta, cdf0.levels, cdf1.levels, 2.0)


def w1_distance(cdf0: DiscreteCdf, cdf1: DiscreteCdf) -> float:
    _check_same_grid(cdf0, cdf1)
    return _kernels.quantile_distance(cdf0.grid.eta, cdf0.levels, cdf1.levels, 1.0)


def group_cdfs(values, groups, J: int, pad: float = DEFAULT_PAD):
    """Shared grid over ``values`` and one CDF per group."""
    values = np.asarray(values, dtype=np.float64).ravel()
    groups = np.asarray(groups).ravel()
    grid = make_grid(values, J, pad)
    return build_cdf(values[groups == 0], grid), build_cdf(values[groups == 1], grid)


def exact_wasserstein(a, b, p: float = 2.0) -> float:
    """Exact ``W_p^p`` between two empirical distributions of any sizes.

    Integrates ``|Q_a(tau) - Q_b(tau)|^p`` over the union of the two step
    quantile functions' breakpoints. Unlike :func:`w2_distance` this is
    continuous in the sample values, which matters for finite differences.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty group")
    na, nb = a.size, b.size
    knots = np.union1d(np.arange(1, na + 1) / na, np.arange(1, nb + 1) / nb)
    knots = np.concatenate(([0.0], knots))
    widths = np.diff(knots)
    mids = 0.5 * (knots[:-1] + knots[1:])
    ia = np.minimum((mids * na).astype(np.int64), na - 1)
    ib = np.minimum((mids * nb).astype(np.int64), nb - 1)
    return float(np.sum(widths * np.abs(a[ia] - b[ib]) ** p))
