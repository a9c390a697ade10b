"""Small fitting helpers shared by the studies."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError


def loglog_slope(xs, ys) -> tuple[float, float]:
    """Least-squares slope and its standard error on (log x, log y).

    Degenerate inputs (fewer than two distinct x values, or nonpositive y)
    cannot be fitted and raise with a diagnostic.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 2:
        raise DomainError("need at least two (x, y) points")
    if np.unique(x).size < 2:
        raise DomainError("degenerate fit: no variation in x")
    if np.any(x <= 0.0):
        raise DomainError("x values must be positive for a log-log fit")
    if np.any(y <= 0.0):
        raise DomainError("degenerate fit: nonpositive y values, slope undefined")
    lx = np.log(x)
    ly = np.log(y)
    var = float(np.sum((lx - lx.mean()) ** 2))
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / var)
    resid = ly - (ly.mean() + slope * (lx - lx.mean()))
    dof = x.size - 2
    stderr = float(np.sqrt(np.sum(resid**2) / dof / var)) if dof > 0 else math.nan
    return slope, stderr
