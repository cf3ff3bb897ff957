"""Numeric kernels for the per-frame hot path.

The compiled extension (`_ckernels`, Cython) is preferred when importable;
otherwise the NumPy implementation in `_pykernels` is used. Setting
``CBM_PURE_PYTHON=1`` forces the fallback, which is handy for debugging and
for the backend benchmark.
"""

import os

from . import _pykernels

if os.environ.get("CBM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

window_median = _impl.window_median
robust_score = _impl.robust_score
linear_fit = _impl.linear_fit
weibull_sums = _impl.weibull_sums

__all__ = ["BACKEND", "window_median", "robust_score", "linear_fit", "weibull_sums"]
