"""Concentrating profiles phi_eps = eps^(-1/2) Phi(x/eps) and the energy threshold.

The rates checked here are

    int |phi_eps|^q            ~ eps^(3 - q/2)      q = 2..5, flat for q = 6
    ||phi_eps^-||, |phi_eps^-|_2, |phi_eps^-|_inf  <=  O(eps)
    |phi_eps^+|_5^5            <=  O(eps^(1/2))
    ||phi_eps^+||^2 - form     =   O(eps^2)
    |int phi^6 - int (phi^+)^6| <= O(eps^(3/2))

and the level sup of J over the fiber R phi_eps^+ (+) E- is compared with
S_hat^(3/2)/3.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import grid as _grid
from .errors import InvalidArgument, NoFiberMax, ResolutionError
from .fitting import loglog_fit
from .grid import Field
from .nehari import fiber_maximize
from .sobolev import half_mass_radius
from .spectral import project, split_norms

DEFAULT_LADDER = (0.5, 0.35, 0.25, 0.18, 0.125, 0.09)
MIN_CORE_CELLS = 4
ZERO_FLOOR = 1e-10  # relative to S_hat^(3/2)

# name -> (expected slope, tolerance, two_sided)
RATES = {
    "q2": (2.0, 0.15, True),
    "q3": (1.5, 0.15, True),
    "q4": (1.0, 0.15, True),
    "q5": (0.5, 0.15, True),
    "q6": (0.0, 0.05, True),
    "minus_norm": (1.0, 0.15, False),
    "minus_l2": (1.0, 0.15, False),
    "minus_linf": (1.0, 0.15, False),
    "plus_l5": (0.5, 0.15, False),
    "plus_norm_defect": (2.0, 0.3, False),
    "sixth_defect": (1.5, 0.3, False),
}


class _Profile:
    """Bilinear interpolant of Phi with the zero axis row, zero outside."""

    def __init__(self, Phi):
        g = Phi.grid
        r = np.concatenate([[0.0], g.r])
        vals = np.vstack([np.zeros((1, g.n_z)), Phi.values])
        self.interp = RegularGridInterpolator((r, g.z), vals, bounds_error=False, fill_value=0.0)
        self.core = half_mass_radius(Phi)
        self.Phi = Phi

    def __call__(self, R, Z):
        pts = np.stack([np.ravel(R), np.ravel(Z)], axis=-1)
        return self.interp(pts).reshape(np.shape(R))


_PROFILE_CACHE = {}


def _profile(Phi):
    key = id(Phi)
    hit = _PROFILE_CACHE.get(key)
    if hit is None or hit.Phi is not Phi:
        hit = _Profile(Phi)
        _PROFILE_CACHE.clear()
        _PROFILE_CACHE[key] = hit
    return hit


def make_phi_eps(Phi, eps, grid):
    """Sample eps^(-1/2) Phi(r/eps, x3/eps) on ``grid``.

    Raises ``ResolutionError`` when the rescaled core (half L^6 mass radius)
    is narrower than four cells of ``grid``.
    """
    if not 0 < eps <= 1:
        raise InvalidArgument(f"eps must lie in (0, 1], got {eps}")
    prof = _profile(Phi)
    core = eps * prof.core
    if core < MIN_CORE_CELLS * grid.h:
        raise ResolutionError(
            f"eps={eps}: core radius {core:.4g} spans fewer than {MIN_CORE_CELLS} cells (h={grid.h:.4g})")
    return Field.sample(grid, lambda R, Z: eps**-0.5 * prof(R / eps, Z / eps))


@dataclass
class ScalingReport:
    eps_values: list
    rows: list
    slopes: dict
    passes: dict
    S_hat: float
    dim_minus: int
    sixth_drift: float
    span_decades: float
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.passes.values())

    def to_dict(self):
        return {
            "eps_values": self.eps_values,
            "rows": self.rows,
            "slopes": {k: (None if v is None else v.as_dict()) for k, v in self.slopes.items()},
            "expected": {k: {"slope": e, "tol": t, "two_sided": two} for k, (e, t, two) in RATES.items()},
            "passes": self.passes,
            "passed": self.passed,
            "S_hat": self.S_hat,
            "dim_minus": self.dim_minus,
            "sixth_drift": self.sixth_drift,
            "span_decades": self.span_decades,
            "notes": self.notes,
        }

    def csv_rows(self):
        out = []
        for row in self.rows:
            for k, v in row.items():
                if k != "eps":
                    out.append((row["eps"], k, v))
        return out


def measure(phi, split, S_hat):
    """All per-eps quantities for one sampled profile."""
    plus, minus = project(split, phi)
    n_plus, n_minus = split_norms(split, phi)
    form = _grid.dirichlet_energy(phi) + _grid.centrifugal_energy(phi)
    row = {f"q{q}": _grid.integrate_power(phi, q) for q in (2, 3, 4, 5, 6)}
    six_plus = _grid.integrate_power(plus, 6)
    row.update({
        "minus_norm": n_minus,
        "minus_l2": float(np.sqrt(_grid.integrate_power(minus, 2))),
        "minus_linf": _grid.sup_norm(minus),
        "plus_l5": _grid.integrate_power(plus, 5),
        "plus_norm_sq": n_plus**2,
        "form": form,
        "plus_norm_defect": abs(n_plus**2 - form),
        "plus_norm_raw": abs(n_plus**2 - S_hat**1.5),
        "sixth_plus": six_plus,
        "sixth_defect": abs(row["q6"] - six_plus),
    })
    return row


def lemma22_report(Phi, split, eps_ladder=DEFAULT_LADDER, S_hat=None):
    """Measure every rate on ``split.op.grid`` and fit log-log slopes.

    ``plus_norm_defect`` compares ||phi^+||^2 with the same-grid value of
    int |grad phi|^2 + phi^2/r^2; ``plus_norm_raw`` compares it with
    S_hat^(3/2) and also carries the discretization drift of the form. Rates
    whose quantity vanishes identically (E- = {0}) pass vacuously.
    """
    eps = [float(e) for e in eps_ladder]
    if len(eps) < 5:
        raise InvalidArgument("the eps ladder needs at least 5 points")
    if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0 or eps[0] > 1:
        raise InvalidArgument("the eps ladder must be strictly descending in (0, 1]")
    if S_hat is None:
        S_hat = float(_grid.integrate_power(Phi, 6) ** (2.0 / 3.0))
    g = split.op.grid
    rows = []
    for e in eps:
        row = measure(make_phi_eps(Phi, e, g), split, S_hat)
        row["eps"] = e
        rows.append(row)

    slopes, passes, notes = {}, {}, []
    for name, (expect, tol, two_sided) in RATES.items():
        vals = np.array([row[name] for row in rows])
        if np.all(vals <= ZERO_FLOOR * S_hat**1.5):
            slopes[name] = None
            passes[name] = True
            notes.append(f"{name}: zero to round-off, rate holds vacuously")
            continue
        fit = loglog_fit(eps, vals)
        slopes[name] = fit
        if fit is None:
            passes[name] = False
        elif two_sided:
            passes[name] = abs(fit.slope - expect) <= tol
        else:
            passes[name] = fit.slope >= expect - tol
    six = np.array([row["q6"] for row in rows])
    drift = float((six.max() - six.min()) / S_hat**1.5)
    passes["sixth_drift"] = drift <= 0.01
    raw = loglog_fit(eps, [row["plus_norm_raw"] for row in rows])
    slopes["plus_norm_raw"] = raw
    return ScalingReport(eps, rows, slopes, passes, float(S_hat), split.dim_minus, drift,
                         float(np.log10(eps[0] / eps[-1])), notes)


@dataclass
class ThresholdReport:
    eps: float
    sup_J: float
    level: float
    gap: float
    t: float
    certified: bool
    no_fiber_max: bool = False
    threshold_failed: bool = False
    nehari_residual: float = float("nan")
    minus_residual: float = float("nan")
    suggestion: str = ""

    def to_dict(self):
        return dict(self.__dict__)


def threshold_check(params, Phi, eps, S_hat, tol=1e-10):
    """sup of J over R phi_eps^+ (+) E- against the level S_hat^(3/2)/3."""
    level = S_hat**1.5 / 3.0
    phi = make_phi_eps(Phi, eps, params.operator.grid)
    try:
        fr = fiber_maximize(params, phi, tol=tol)
    except NoFiberMax as exc:
        return ThresholdReport(float(eps), float("nan"), level, float("nan"), 0.0, False,
                               no_fiber_max=True, suggestion=str(exc))
    gap = level - fr.J
    failed = not gap > 0
    return ThresholdReport(float(eps), float(fr.J), float(level), float(gap), float(fr.t),
                           not failed, threshold_failed=failed,
                           nehari_residual=fr.nehari_residual, minus_residual=fr.minus_residual,
                           suggestion="decrease eps or refine the grid" if failed else "")


@dataclass
class ThresholdLadder:
    reports: list
    monotone: bool
    direction: str
    all_certified: bool

    def to_dict(self):
        return {"reports": [r.to_dict() for r in self.reports], "monotone": self.monotone,
                "direction": self.direction, "all_certified": self.all_certified}


def threshold_ladder(params, Phi, S_hat, eps_ladder=DEFAULT_LADDER, tol=1e-10):
    """threshold_check over a ladder, with the monotonicity of the gap.

    ``direction`` is "increasing" when the gap grows along the ladder order,
    "decreasing" when it shrinks, and "mixed" otherwise.
    """
    reports = [threshold_check(params, Phi, e, S_hat, tol) for e in eps_ladder]
    gaps = np.array([r.gap for r in reports])
    diffs = np.diff(gaps)
    if np.all(diffs > 0):
        direction = "increasing"
    elif np.all(diffs < 0):
        direction = "decreasing"
    else:
        direction = "mixed"
    return ThresholdLadder(reports, direction != "mixed", direction,
                           all(r.certified for r in reports))
