"""Kernel backend selection.

The compiled extension is used when it was built; set ``W2FAIR_PURE=1`` to
force the numpy fallback (both backends are tested against each other).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("W2FAIR_PURE"):
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

MODE_W2 = _kernels_py.MODE_W2
MODE_W2_COARSE = _kernels_py.MODE_W2_COARSE
MODE_W1 = _kernels_py.MODE_W1

cdf_counts = _impl.cdf_counts
locate_bins = _impl.locate_bins
interp_levels = _impl.interp_levels
inverse_levels = _impl.inverse_levels
quantile_distance = _impl.quantile_distance
nearest_level_index = _impl.nearest_level_index
transport_terms = _impl.transport_terms


def available_backends():
    """Name -> module for every backend importable in this environment."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels_c

        out["cython"] = _kernels_c
    except ImportError:
        pass
    return out
