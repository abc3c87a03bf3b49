"""Pure-numpy implementations of the grid kernels.

Every function here has a twin with the same signature in ``_kernels_c.pyx``.
Conventions shared by both backends:

* ``eta`` holds the J+1 grid knots ``lo = eta[0] < eta[1] < ... < eta[J] = hi``.
* ``levels`` holds the tabulated CDF at those knots, ``levels[j] = H(eta[j])``.
* Bin ``j`` (1-based, ``1 <= j <= J``) is the half-open interval
  ``[eta[j-1], eta[j])``.
"""

import numpy as np

MODE_W2 = 0
MODE_W2_COARSE = 1
MODE_W1 = 2


def cdf_counts(scores, eta):
    """Number of scores strictly below each knot."""
    ordered = np.sort(np.asarray(scores, dtype=np.float64))
    return np.searchsorted(ordered, eta, side="left").astype(np.int64)


def locate_bins(eta, values):
    values = np.asarray(values, dtype=np.float64)
    J = eta.shape[0] - 1
    idx = np.searchsorted(eta, values, side="right").astype(np.int64)
    clamped = (idx < 1) | (idx > J)
    np.clip(idx, 1, J, out=idx)
    return idx, clamped


def interp_levels(eta, levels, values):
    values = np.asarray(values, dtype=np.float64)
    idx, _ = locate_bins(eta, values)
    left = eta[idx - 1]
    t = (values - left) / (eta[idx] - left)
    np.clip(t, 0.0, 1.0, out=t)
    return levels[idx - 1] + t * (levels[idx] - levels[idx - 1])


def inverse_levels(eta, levels, taus):
    taus = np.clip(np.asarray(taus, dtype=np.float64), levels[0], levels[-1])
    k = np.searchsorted(levels, taus, side="left")
    out = np.empty_like(taus)
    at_start = k == 0
    out[at_start] = eta[0]
    k = k[~at_start]
    lo_level = levels[k - 1]
    frac = (taus[~at_start] - lo_level) / (levels[k] - lo_level)
    out[~at_start] = eta[k - 1] + frac * (eta[k] - eta[k - 1])
    return out


def quantile_distance(eta, levels0, levels1, p):
    """Midpoint Euler sum of |Q0 - Q1|^p over J quantile steps."""
    J = eta.shape[0] - 1
    taus = (np.arange(J, dtype=np.float64) + 0.5) / J
    diff = np.abs(inverse_levels(eta, levels0, taus) - inverse_levels(eta, levels1, taus))
    return float(np.sum(diff**p) / J)


def nearest_level_index(levels, targets, hints):
    """Index whose level is closest to each target; ties resolved toward ``hints``."""
    targets = np.asarray(targets, dtype=np.float64)
    hints = np.asarray(hints, dtype=np.int64)
    J = levels.shape[0] - 1
    pos = np.searchsorted(levels, targets, side="left")
    upper = levels[np.minimum(pos, J)]
    lower = levels[np.maximum(pos - 1, 0)]
    pick_upper = (pos == 0) | ((pos <= J) & (upper - targets <= targets - lower))
    best = np.where(pick_upper, upper, lower)
    first = np.searchsorted(levels, best, side="left")
    last = np.searchsorted(levels, best, side="right") - 1
    return np.clip(hints, first, last)


def transport_terms(eta, own_counts, n_own, other_levels, values, mode):
    """Per-sample transport numerator over the local bin mass.

    Returns ``num / max(n_s * (H^{j+1} - H^j), 1)`` where ``num`` is
    ``v - cor(v)`` (refined W2), ``eta[j] - eta[j']`` (coarse W2) or its sign (W1).
    """
    values = np.asarray(values, dtype=np.float64)
    J = eta.shape[0] - 1
    own_levels = own_counts / n_own
    idx, _ = locate_bins(eta, values)
    upper = np.minimum(idx + 1, J)
    mass = (own_counts[upper] - own_counts[upper - 1]).astype(np.float64)
    np.maximum(mass, 1.0, out=mass)
    if mode == MODE_W2:
        h = interp_levels(eta, own_levels, values)
        num = values - inverse_levels(eta, other_levels, h)
    else:
        partner = nearest_level_index(other_levels, own_levels[idx], idx)
        num = eta[idx] - eta[partner]
        if mode == MODE_W1:
            num = np.sign(num)
    return num / mass
