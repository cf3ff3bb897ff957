"""Pure NumPy fallback for the compiled kernels.

Both backends implement the same contracts; `tests/test_kernels.py` pins
their agreement.
"""

import math

import numpy as np

MAD_CONSISTENCY = 1.4826  # makes MAD a consistent sigma estimate for Gaussians


def window_median(values) -> float:
    """Median of a (small) window of readings."""
    return float(np.median(np.asarray(values, dtype=np.float64)))


def robust_score(values, value: float) -> float:
    """Robust z-score of `value` against a window of recent readings.

    score = |value - median| / max(1.4826 * MAD, 1e-6 + 0.01 * |median|)

    The floor keeps the score finite on constant windows (MAD = 0).
    """
    arr = np.asarray(values, dtype=np.float64)
    med = float(np.median(arr))
    mad = float(np.median(np.abs(arr - med)))
    scale = max(MAD_CONSISTENCY * mad, 1e-6 + 0.01 * abs(med))
    return abs(value - med) / scale


def linear_fit(x, y):
    """Least-squares line fit. Returns (slope, intercept, residual_rms).

    The intercept is expressed in the raw x coordinates (value at x = 0).
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.size != ya.size or xa.size == 0:
        raise ValueError("x and y must be non-empty and of equal length")
    xm = float(xa.mean())
    ym = float(ya.mean())
    dx = xa - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ValueError("degenerate time axis: all x identical")
    slope = float(dx @ (ya - ym)) / sxx
    intercept = ym - slope * xm
    resid = ya - (intercept + slope * xa)
    rms = math.sqrt(float(resid @ resid) / xa.size)
    return slope, intercept, rms


def weibull_sums(logt, beta: float):
    """Exponentially weighted sums used by the Weibull profile likelihood.

    With m = max(logt) and w_i = exp(beta * (logt_i - m)), returns
    (sum w, sum w*logt, sum w*logt^2). The common exp(-beta*m) factor keeps
    the sums overflow-free; it cancels in the score ratios, and callers
    recover the unshifted log-sum as log(sum w) + beta * m.
    """
    lt = np.asarray(logt, dtype=np.float64)
    m = float(lt.max())
    w = np.exp(beta * (lt - m))
    return float(w.sum()), float(w @ lt), float(w @ (lt * lt))
