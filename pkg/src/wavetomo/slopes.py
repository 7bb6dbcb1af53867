"""Least-squares slopes on log-log data."""
import math

import numpy as np


def fit_slope(x, y, floor=0.0):
    """Slope of log y against log x; NaN if any value is at or below ``floor``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= floor) or np.any(x <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def observed_order(errors, ratio=2.0):
    """Convergence orders between successive refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / math.log(ratio)
