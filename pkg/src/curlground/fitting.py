"""Least-squares power-law fits shared by every rate and decay check."""

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci95: tuple
    rms_residual: float
    n: int

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "ci95": list(self.ci95), "rms_residual": self.rms_residual, "n": self.n}


def loglog_fit(x, y):
    """Fit log y = intercept + slope * log x by ordinary least squares.

    Returns None when fewer than two strictly positive pairs are available
    (e.g. a quantity that vanishes identically).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return None
    lx, ly = np.log(x[ok]), np.log(y[ok])
    if ok.sum() == 2:
        slope = (ly[1] - ly[0]) / (lx[1] - lx[0])
        intercept = ly[0] - slope * lx[0]
        return SlopeFit(float(slope), float(intercept), 0.0, (float(slope), float(slope)), 0.0, 2)
    res = stats.linregress(lx, ly)
    n = int(ok.sum())
    half = stats.t.ppf(0.975, n - 2) * res.stderr
    resid = ly - (res.intercept + res.slope * lx)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr),
                    (float(res.slope - half), float(res.slope + half)),
                    float(np.sqrt(np.mean(resid**2))), n)


def observed_order(errors, spacings):
    """Convergence order from an error ladder (slope of log err vs log h)."""
    fit = loglog_fit(spacings, errors)
    return float("nan") if fit is None else fit.slope
