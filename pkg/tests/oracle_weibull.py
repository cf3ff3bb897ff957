"""Independent grid-search oracle for the Weibull MLE.

Evaluates the profile log-likelihood over a dense shape grid with the scale
profiled out analytically, entirely in NumPy and independent of the package's
fitting path. Used to pin the safeguarded root-find.
"""

import numpy as np


def grid_profile_argmax(lifetimes, lo=0.1, hi=10.0, step=0.001):
    """Shape value maximizing the profile log-likelihood on the grid."""
    grid = np.arange(lo, hi + step / 2, step)
    logt = np.log(np.asarray(lifetimes, dtype=np.float64))
    n = logt.size
    a_sum = float(logt.sum())
    m = float(logt.max())
    best_beta, best_ll = None, -np.inf
    for chunk in np.array_split(grid, 64):
        weights = np.exp(np.outer(chunk, logt - m))
        s0 = weights.sum(axis=1)
        # log sum t^b = log(s0) + b*m ; profiled scale: eta^b = sum t^b / n
        ll = (
            n * np.log(chunk)
            + (chunk - 1.0) * a_sum
            - n * (np.log(s0) + chunk * m - np.log(n))
            - n
        )
        i = int(np.argmax(ll))
        if ll[i] > best_ll:
            best_beta, best_ll = float(chunk[i]), float(ll[i])
    return best_beta
