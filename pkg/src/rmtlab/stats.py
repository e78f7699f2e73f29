"""Proportion estimates and slope fits shared by the estimators."""
from dataclasses import dataclass
import math

import numpy as np
from scipy import stats as _st

Z95 = 1.959963984540054


def wilson(count, trials, z=Z95):
    """Wilson score interval ``(low, high)`` for ``count`` successes."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= count <= trials:
        raise ValueError("count must lie in [0, trials]")
    p = count / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if count == 0 else max(0.0, centre - half)
    hi = 1.0 if count == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class ConcentrationEstimate:
    """A probability estimate with its 95% Wilson interval."""

    p_hat: float
    trials: int
    ci_low: float
    ci_high: float
    count: int
    window_center: object = 0.0

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("trials must be positive")

    @classmethod
    def from_count(cls, count, trials, window_center=0.0, z=Z95):
        lo, hi = wilson(count, trials, z)
        return cls(count / trials, int(trials), lo, hi, int(count), window_center)

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    points: int


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``.

    Returns ``None`` when fewer than two usable (positive) points remain.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return None
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if keep.sum() == 2:
        s = (ly[1] - ly[0]) / (lx[1] - lx[0])
        return SlopeFit(float(s), float(ly[0] - s * lx[0]), float("nan"), 2)
    r = _st.linregress(lx, ly)
    return SlopeFit(float(r.slope), float(r.intercept), float(r.stderr), int(keep.sum()))


def log_grid(lo, hi, per_decade=12):
    """Log-spaced grid from ``lo`` to ``hi`` inclusive."""
    k = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.logspace(math.log10(lo), math.log10(hi), k)
