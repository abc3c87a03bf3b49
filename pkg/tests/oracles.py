"""Independent reference computations used as test oracles.

Nothing here imports the package's grid code; each function is a direct
transcription of a definition (sorting, counting, linear scans, finite
differences).
"""

import math

import numpy as np


def sorted_matching_cost(a, b, p=2.0):
    """(1/n) sum |a_(k) - b_(k)|^p for equal-size samples."""
    a, b = np.sort(a), np.sort(b)
    assert a.size == b.size
    return float(np.mean(np.abs(a - b) ** p))


def count_below(scores, threshold):
    return sum(1 for v in scores if v < threshold)


def linear_scan_bin(knots, v):
    """1-based j with knots[j-1] <= v < knots[j], by scanning."""
    for j in range(1, len(knots)):
        if knots[j - 1] <= v < knots[j]:
            return j
    raise ValueError("outside grid")


def order_statistic_quantile(sample, tau):
    """Sample value at rank ceil(tau * n)."""
    s = np.sort(sample)
    k = max(1, math.ceil(tau * s.size))
    return float(s[k - 1])


def rank_transport(source, target, v):
    """Map v to the target order statistic at the rank v holds in source."""
    source, target = np.sort(source), np.sort(target)
    q = np.count_nonzero(source <= v) / source.size
    return order_statistic_quantile(target, q)


def central_difference(fn, x, h):
    x = np.array(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up.flat[i] += h
        down.flat[i] -= h
        out.flat[i] = (fn(up) - fn(down)) / (2 * h)
    return out


def relu(z):
    return z if z > 0 else 0.0


def mlp_score_loops(weights, biases, x):
    """Straight-line per-sample MLP evaluation with Python loops."""
    h = [float(v) for v in x]
    for layer, (W, b) in enumerate(zip(weights, biases)):
        out = []
        for k in range(W.shape[1]):
            z = b[k] + sum(h[i] * W[i, k] for i in range(len(h)))
            out.append(1.0 / (1.0 + math.exp(-z)) if layer == len(weights) - 1 else relu(z))
        h = out
    return h[0]
