"""Energy, Nehari-Pankov fibers and the ground-state level c = inf_N J.

    J(u) = 1/2 B(u, u) - 1/p int |u|^p - 1/6 int u^6,   B(u, u) = x^T K x.

For a direction w in E+ the fiber R+ w (+) E- is finite dimensional on the
grid, and J restricted to it has a unique interior maximum m(w) on the
Nehari-Pankov manifold N. The level c is found by minimizing the reduced
functional w -> J(m(w)) over the unit sphere of E+; by the envelope theorem
its gradient is t P+ (grad J)(m(w)), so no derivative of m(w) is needed.

Fiber coordinates are taken with respect to the basis w/||w||, e_k/|l_k|^(1/2),
which is orthonormal for the split norm. In these coordinates the quadratic
part of J is (t^2 - |c|^2)/2.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.optimize import brentq

from . import grid as _grid
from .errors import InvalidArgument, NoFiberMax, NumericFailure, RegimeError

MAX_RESTARTS = 8


@dataclass(eq=False)
class EnergyParams:
    """Exponent, operator and its spectral split, with the regime gate."""

    p: float
    operator: object = field(repr=False)
    split: object = field(repr=False)

    def __post_init__(self):
        p = float(self.p)
        if not 2.0 < p < 6.0:
            raise InvalidArgument(f"p must lie in the open interval (2, 6), got {p}")
        if self.split.op is not self.operator:
            raise InvalidArgument("split was computed for a different operator")
        if self.split.dim_minus > 0 and p <= 4.0:
            raise RegimeError(
                f"p = {p} with dim E- = {self.split.dim_minus}: the indefinite case needs p in (4, 6)")
        self.p = p

    @property
    def dim_minus(self):
        return self.split.dim_minus


def _f(x, p):
    ax = np.abs(x)
    return ax ** (p - 2.0) * x + x**5


def _fprime(x, p):
    return (p - 1.0) * np.abs(x) ** (p - 2.0) + 5.0 * x**4


def _energy_vec(params, x):
    op = params.operator
    w = op.weights
    return float(0.5 * x @ (op.stiffness @ x) - np.sum(w * np.abs(x) ** params.p) / params.p
                 - np.sum(w * x**6) / 6.0)


def energy(params, u):
    """J(u)."""
    return _energy_vec(params, params.operator.vec(u))


def grad_energy(params, u):
    """W-Riesz representative of J'(u): Lu - |u|^(p-2) u - u^5 at interior nodes."""
    op = params.operator
    x = op.vec(u)
    return op.field(op.matrix @ x - _f(x, params.p))


def pde_residual(params, u):
    """||Lu - |u|^(p-2) u - u^5||_W / ||u^5||_W."""
    op = params.operator
    x = op.vec(u)
    r = op.matrix @ x - _f(x, params.p)
    den = np.sum(op.weights * x**10)
    if den == 0:
        return 0.0
    return float(np.sqrt(np.sum(op.weights * r**2) / den))


class _Fiber:
    """J on R w (+) E- in split-orthonormal coordinates y = (t, c)."""

    def __init__(self, params, w_plus):
        op, sp_ = params.operator, params.split
        self.p = params.p
        self.W = op.weights
        a = float(w_plus @ (op.stiffness @ w_plus))
        scale = float(w_plus @ (self.W * w_plus))
        if not a > 1e-14 * max(scale, 1e-300) * op.norm_estimate:
            raise NoFiberMax(f"direction has non-positive form B(w, w) = {a:.3e}")
        self.a = a
        cols = [w_plus / np.sqrt(a)]
        if sp_.dim_minus:
            cols.append(sp_.vectors / np.sqrt(np.abs(sp_.eigenvalues)))
        self.B = np.column_stack(cols)
        self.D = np.concatenate([[1.0], -np.ones(sp_.dim_minus)])

    def point(self, y):
        return self.B @ y

    def value(self, y):
        x = self.point(y)
        return float(0.5 * np.sum(self.D * y**2) - np.sum(self.W * np.abs(x) ** self.p) / self.p
                     - np.sum(self.W * x**6) / 6.0)

    def grad(self, y):
        x = self.point(y)
        return self.D * y - self.B.T @ (self.W * _f(x, self.p))

    def hess(self, y):
        x = self.point(y)
        return np.diag(self.D) - self.B.T @ ((self.W * _fprime(x, self.p))[:, None] * self.B)

    def ray_root(self):
        """t > 0 with d/dt J(t w) = 0, ignoring E-."""
        x = self.B[:, 0]
        b = np.sum(self.W * np.abs(x) ** self.p)
        d = np.sum(self.W * x**6)

        def phi(t):
            return 1.0 - t ** (self.p - 2.0) * b - t**4 * d

        hi = 1.0
        while phi(hi) > 0:
            hi *= 2.0
        return brentq(phi, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def residuals(self, y):
        g = self.grad(y)
        n = np.linalg.norm(y)
        return float(abs(y @ g) / n**2), float(np.max(np.abs(g[1:]), initial=0.0) / n)

    def newton(self, y, tol, max_iter=100):
        """Levenberg-damped Newton ascent; returns (y, converged)."""
        f = self.value(y)
        for _ in range(max_iter):
            g = self.grad(y)
            if np.max(np.abs(g)) <= tol * np.linalg.norm(y):
                return y, True
            H = self.hess(y)
            M = -H
            shift = 0.0
            while True:
                try:
                    L = np.linalg.cholesky(M + shift * np.eye(len(y)))
                    break
                except np.linalg.LinAlgError:
                    shift = max(2.0 * shift, 1e-8 * (1.0 + np.abs(M).max()))
            step = np.linalg.solve(L.T, np.linalg.solve(L, g))
            alpha, slope = 1.0, float(g @ step)
            while True:
                y_new = y + alpha * step
                f_new = self.value(y_new)
                if f_new >= f + 1e-4 * alpha * slope or alpha < 1e-12:
                    break
                alpha *= 0.5
            if alpha < 1e-12:
                return y, False
            y, f = y_new, f_new
        g = self.grad(y)
        return y, bool(np.max(np.abs(g)) <= tol * np.linalg.norm(y))

    def is_max(self, y):
        return y[0] > 0 and np.linalg.eigvalsh(self.hess(y)).max() < 0


@dataclass
class FiberResult:
    t: float
    coeffs: np.ndarray
    J: float
    m: object = field(repr=False)
    nehari_residual: float = 0.0
    minus_residual: float = 0.0
    norm: float = 0.0
    y: np.ndarray = field(default=None, repr=False)

    def __iter__(self):
        return iter((self.t, self.coeffs, self.J))


def _plus_part(params, x):
    E = params.split.vectors
    if params.dim_minus == 0:
        return x
    return x - E @ (E.T @ (params.operator.weights * x))


def _fiber_solve(params, x_w, tol, y0=None, seed=0):
    fib = _Fiber(params, _plus_part(params, x_w))
    candidates = []
    starts = []
    if y0 is not None:
        starts.append(np.asarray(y0, float))
    t0 = fib.ray_root()
    starts.append(np.concatenate([[t0], np.zeros(params.dim_minus)]))
    for y in starts:
        y, ok = fib.newton(y.copy(), tol)
        if ok and fib.is_max(y):
            candidates.append(y)
            break
    if not candidates:
        rng = np.random.default_rng(seed)
        m = params.dim_minus
        for _ in range(MAX_RESTARTS):
            y = np.concatenate([[t0 * rng.uniform(0.3, 2.0)],
                                0.3 * t0 * rng.standard_normal(m) / np.sqrt(max(m, 1))])
            y, ok = fib.newton(y, tol)
            if ok and fib.is_max(y):
                candidates.append(y)
    if not candidates:
        raise NumericFailure("fiber maximization failed from every start")
    y = max(candidates, key=fib.value)
    return fib, y


def fiber_maximize(params, w, tol=1e-8, y0=None, seed=0):
    """Maximize J over R+ w (+) E-.

    ``w`` is replaced by its E+ component (this leaves the fiber unchanged).
    Returns a ``FiberResult`` that unpacks as ``(t, coeffs, J)``: the point is
    m = t P+ w + sum_k coeffs[k] e_k with W-orthonormal eigenvectors e_k.
    """
    x_w = params.operator.vec(w)
    fib, y = _fiber_solve(params, x_w, tol, y0, seed)
    return _fiber_result(params, fib, y)


def _fiber_result(params, fib, y):
    x = fib.point(y)
    r1, r2 = fib.residuals(y)
    lam = np.abs(params.split.eigenvalues)
    return FiberResult(float(y[0] / np.sqrt(fib.a)), y[1:] / np.sqrt(lam), fib.value(y),
                       params.operator.field(x), r1, r2, float(np.linalg.norm(y)), y)


def nehari_residuals(params, u):
    """(|<J'(u), u>| / ||u||^2, max_k |<J'(u), e_k>| / ||u||) with e_k split-normalized."""
    op, spl = params.operator, params.split
    x = op.vec(u)
    g = op.stiffness @ x - op.weights * _f(x, params.p)
    if spl.dim_minus:
        cm = spl.vectors.T @ (op.weights * x)
        xp = x - spl.vectors @ cm
        norm2 = float(xp @ (op.stiffness @ xp) + np.sum(np.abs(spl.eigenvalues) * cm**2))
        gm = (spl.vectors / np.sqrt(np.abs(spl.eigenvalues))).T @ g
        r2 = float(np.max(np.abs(gm)) / np.sqrt(norm2))
    else:
        norm2 = float(x @ (op.stiffness @ x))
        r2 = 0.0
    if norm2 <= 0:
        return 0.0, 0.0
    return float(abs(x @ g) / norm2), r2


def energy_identity_gap(params, u):
    """|J(u) - (1/2 - 1/p) int |u|^p - 1/3 int u^6|, which vanishes on N."""
    p = params.p
    rhs = (0.5 - 1.0 / p) * _grid.integrate_power(u, p) + _grid.integrate_power(u, 6) / 3.0
    return abs(energy(params, u) - rhs)


@dataclass
class GroundStateOptions:
    tol: float = 1e-6
    fiber_tol: float = 1e-10
    max_iter: int = 500
    starts: tuple = ("gaussian",)
    n_random: int = 1
    seed: int = 0
    S_hat: float = None
    polish: bool = True
    polish_rtol: float = 1e-3
    bump_width: float = 1.0


@dataclass
class GroundStateResult:
    u: object
    c: float
    nehari_residual: float
    pde_residual: float
    threshold_margin: float
    energy_identity_gap: float
    history: list = field(default_factory=list, repr=False)
    minus_residual: float = 0.0
    norm: float = 0.0
    norm_floor: float = 0.0
    stationarity: float = 0.0
    iterations: int = 0
    start: str = ""
    polished: bool = False
    warnings: list = field(default_factory=list)
    runs: list = field(default_factory=list)

    def summary(self):
        return {
            "c": self.c,
            "nehari_residual": self.nehari_residual,
            "minus_residual": self.minus_residual,
            "pde_residual": self.pde_residual,
            "threshold_margin": self.threshold_margin,
            "energy_identity_gap": self.energy_identity_gap,
            "norm": self.norm,
            "norm_floor": self.norm_floor,
            "stationarity": self.stationarity,
            "iterations": self.iterations,
            "start": self.start,
            "polished": self.polished,
            "warnings": list(self.warnings),
            "runs": self.runs,
        }


def _smooth_random(params, rng):
    op = params.operator
    shift = min(0.0, float(op.v_nodes.min())) - 1.0
    return op.solve(op.weights * np.abs(rng.standard_normal(op.size)), shift=shift)


def _start_vectors(params, opts, directions):
    op = params.operator
    R, Z = op.grid.mesh()
    R, Z = R[:-1, 1:-1].ravel(), Z[:-1, 1:-1].ravel()
    rng = np.random.default_rng(opts.seed)
    out = []
    for kind in opts.starts:
        if kind == "gaussian":
            s = opts.bump_width
            out.append(("gaussian", R * np.exp(-(R**2 + Z**2) / s**2)))
        elif kind == "random":
            out.append(("random", _smooth_random(params, rng)))
        else:
            raise InvalidArgument(f"unknown start {kind!r}")
    for i in range(opts.n_random):
        out.append((f"random{i}", _smooth_random(params, rng)))
    for name, d in directions:
        out.append((name, op.vec(d)))
    return out


def _k_norm(K, x):
    return float(np.sqrt(max(x @ (K @ x), 0.0)))


def _descend(params, x_start, opts):
    """Riemannian gradient descent of w -> J(m(w)) on the unit sphere of E+."""
    op = params.operator
    K, W = op.stiffness, op.weights
    w = _plus_part(params, x_start)
    w = w / _k_norm(K, w)
    fib, y = _fiber_solve(params, w, opts.fiber_tol)
    J = fib.value(y)
    history = []
    norm_floor = np.inf
    prev = None
    alpha = None
    res = np.inf
    for it in range(1, opts.max_iter + 1):
        m = fib.point(y)
        t = y[0]
        g = t * _plus_part(params, m - op.solve(W * _f(m, params.p)))
        g -= (w @ (K @ g)) * w
        gnorm = _k_norm(K, g)
        mnorm = float(np.linalg.norm(y))
        norm_floor = min(norm_floor, mnorm)
        res = gnorm / (t * mnorm)
        history.append({"iter": it, "J": J, "stationarity": res, "norm": mnorm})
        if res <= opts.tol:
            return w, fib, y, J, res, it, history, norm_floor
        if prev is None:
            alpha = 0.1 / gnorm
        else:
            s, dg = w - prev[0], g - prev[1]
            sy = float(s @ (K @ dg))
            alpha = float(s @ (K @ s)) / sy if sy > 0 else 10.0 * alpha
            alpha = min(max(alpha, 1e-8 / gnorm), 1.0 / gnorm)
        while True:
            w_new = _plus_part(params, w - alpha * g)
            w_new /= _k_norm(K, w_new)
            try:
                fib_new, y_new = _fiber_solve(params, w_new, opts.fiber_tol, y0=y)
                J_new = fib_new.value(y_new)
            except (NoFiberMax, NumericFailure):
                J_new = np.inf
            if J_new <= J - 1e-4 * alpha * gnorm**2 or alpha * gnorm < 1e-12:
                break
            alpha *= 0.5
        if not np.isfinite(J_new):
            break
        prev = (w, g)
        w, fib, y, J = w_new, fib_new, y_new, J_new
    raise NumericFailure(f"reduced descent stalled at stationarity {res:.3e}", residual=res,
                         last_iterate=op.field(fib.point(y)))


def _polish(params, x, max_iter=20):
    """Newton on Lu = f(u) from a near-stationary point; returns (x, ok)."""
    op = params.operator
    K, W = op.stiffness, op.weights

    def resid(x):
        return K @ x - W * _f(x, params.p)

    r = resid(x)
    scale = np.linalg.norm(W * x**5)
    for _ in range(max_iter):
        if np.linalg.norm(r) <= 1e-13 * scale:
            return x, True
        Jm = (K - sp.diags(W * _fprime(x, params.p))).tocsc()
        try:
            dx = sla.spsolve(Jm, -r)
        except RuntimeError:
            return x, False
        if not np.all(np.isfinite(dx)):
            return x, False
        x_new = x + dx
        r_new = resid(x_new)
        if np.linalg.norm(r_new) >= np.linalg.norm(r):
            return x, np.linalg.norm(r) <= 1e-10 * scale
        x, r = x_new, r_new
    return x, np.linalg.norm(r) <= 1e-10 * scale


def minimize_on_manifold(params, opts=None, directions=()):
    """Compute the ground-state level c = inf_N J by multistart reduced descent.

    ``directions`` is an iterable of ``(name, Field)`` extra starting
    directions, e.g. the E+ part of a concentrating profile. The lowest
    level wins; ties go to the smaller Nehari residual. A final Newton
    polish on the full equation is kept only if it leaves the level
    unchanged to ``opts.polish_rtol``.
    """
    opts = GroundStateOptions() if opts is None else opts
    op = params.operator
    runs, best, last_err = [], None, None
    for name, x0 in _start_vectors(params, opts, list(directions)):
        try:
            w, fib, y, J, res, it, hist, floor = _descend(params, x0, opts)
        except (NumericFailure, NoFiberMax) as exc:
            runs.append({"start": name, "converged": False, "error": str(exc)})
            last_err = exc
            continue
        r1, _ = fib.residuals(y)
        runs.append({"start": name, "converged": True, "c": J, "stationarity": res,
                     "iterations": it, "nehari_residual": r1})
        key = (round(J, 10), r1)
        if best is None or key < best[0]:
            best = (key, name, fib, y, J, res, it, hist, floor)
    if best is None:
        raise NumericFailure("ground-state descent failed from every start",
                             residual=getattr(last_err, "residual", None),
                             last_iterate=getattr(last_err, "last_iterate", None))
    _, name, fib, y, J, res, it, hist, floor = best
    x = fib.point(y)
    polished = False
    if opts.polish:
        x_new, ok = _polish(params, x)
        if ok:
            J_new = _energy_vec(params, x_new)
            if abs(J_new - J) <= opts.polish_rtol * abs(J) and J_new > 0:
                x, J, polished = x_new, J_new, True
    u = op.field(x)
    r1, r2 = nehari_residuals(params, u)
    margin = np.nan if opts.S_hat is None else opts.S_hat**1.5 / 3.0 - J
    warnings = []
    if opts.S_hat is None:
        warnings.append("threshold not checked: S_hat not supplied")
    elif margin <= 0:
        warnings.append("c is not below S_hat^(3/2)/3: the minimizer may be concentrating")
    from .spectral import split_norm

    return GroundStateResult(
        u=u, c=float(J), nehari_residual=r1, pde_residual=pde_residual(params, u),
        threshold_margin=float(margin), energy_identity_gap=energy_identity_gap(params, u),
        history=hist, minus_residual=r2, norm=split_norm(params.split, u),
        norm_floor=float(floor), stationarity=float(res), iterations=it, start=name,
        polished=polished, warnings=warnings, runs=runs)


@dataclass
class GeometryReport:
    R: float
    sup_boundary: float
    sup_found: bool
    max_minus: float
    rho: list
    min_sphere: list
    quadratic_coefficient: float
    rho_slope: float


def geometry_check(params, direction, R=1.0, rho=(0.05, 0.025, 0.0125), samples=32, seed=0,
                   max_doublings=30):
    """Mountain-pass geometry on the fiber of ``direction`` and on E+ spheres.

    (i) Samples u = t w + u- with t >= 0 and ||u|| = R, doubling R until the
    sampled sup of J is <= 0. Pure E- points (t = 0) are always included.
    (ii) Samples J on E+ spheres of the given radii; min J / rho^2 should
    tend to 1/2.
    """
    from .fitting import loglog_fit

    rho = sorted((float(r) for r in rho), reverse=True)
    if not rho or min(rho) <= 0 or max(rho) >= R:
        raise InvalidArgument("need 0 < rho < R")
    rng = np.random.default_rng(seed)
    op = params.operator
    fib = _Fiber(params, _plus_part(params, op.vec(direction)))
    m = params.dim_minus
    dirs = rng.standard_normal((samples, 1 + m))
    dirs[:, 0] = np.abs(dirs[:, 0])
    pure = np.eye(1 + m)  # the ray itself and each E- axis
    dirs = np.vstack([dirs, pure, -pure[1:]])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    minus = dirs[dirs[:, 0] == 0]
    max_minus = max((fib.value(R * d) for d in minus), default=-np.inf)

    radius, found = float(R), False
    for _ in range(max_doublings):
        sup = max(fib.value(radius * d) for d in dirs)
        if sup <= 0:
            found = True
            break
        radius *= 2.0
    mins = []
    xs = [_plus_part(params, _smooth_random(params, rng)) for _ in range(samples)]
    xs = [x / _k_norm(op.stiffness, x) for x in xs]
    for r in rho:
        mins.append(min(_energy_vec(params, r * x) for x in xs))
    fit = loglog_fit(rho, mins)
    return GeometryReport(radius, float(sup), found, float(max_minus), rho,
                          [float(v) for v in mins], float(mins[-1] / rho[-1] ** 2),
                          float("nan") if fit is None else fit.slope)
