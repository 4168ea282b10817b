"""Log-log slope fits for scaling experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import InvalidParam


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """OLS slope of ``log y`` on ``log x`` and its standard error.

    Needs at least three points with strictly positive coordinates.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise InvalidParam("need at least 3 (x, y) points")
    if np.any(~np.isfinite(pts)) or np.any(pts <= 0):
        raise InvalidParam("log-log fit needs finite, strictly positive x and y")
    res = stats.linregress(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return float(res.slope), float(res.stderr)


@dataclass(frozen=True)
class SlopeFit:
    axis: str
    slope: float
    stderr: float
    window: tuple[float, float]
    fixed: dict
    metric: str

    @property
    def passed(self) -> bool:
        return self.window[0] <= self.slope <= self.window[1]

    def as_dict(self) -> dict:
        return {
            "axis": self.axis,
            "slope": self.slope,
            "stderr": self.stderr,
            "window": list(self.window),
            "pass": self.passed,
            "fixed": self.fixed,
            "metric": self.metric,
        }
