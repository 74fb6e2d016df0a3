"""The azimuthal lift U(x) = (u(r, x3)/r) (-x2, x1, 0) and its diagnostics.

U is divergence free and |U| = |u|. Under the lift

    curl curl U = [(-Delta + 1/r^2) u] e_theta,
    |grad U|^2  = u_r^2 + u_x3^2 + u^2/r^2        (pointwise, Frobenius),
    |curl U|^2  = u_x3^2 + (u_r + u/r)^2,

and the last two agree after integration because int 2 u u_r / r dx is the
integral of d/dr (u^2) over the half plane, which vanishes. The energy of U
therefore equals J(u).

Fields are interpolated bilinearly for point samples. The curl-curl check
needs second derivatives, so it uses a bicubic spline of the odd extension
u(-r, x3) = -u(r, x3).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline, RegularGridInterpolator

from . import grid as _grid
from .errors import InvalidArgument
from .grid import Field
from .nehari import energy


def _as_points(points):
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[-1] != 3:
        raise InvalidArgument("points must have shape (n, 3)")
    return pts


def _bilinear(u):
    g = u.grid
    r = np.concatenate([[0.0], g.r])
    vals = np.vstack([np.zeros((1, g.n_z)), u.values])
    interp = RegularGridInterpolator((r, g.z), vals, bounds_error=False, fill_value=0.0)

    def f(R, Z):
        R, Z = np.broadcast_arrays(R, Z)
        return interp(np.stack([R.ravel(), Z.ravel()], axis=-1)).reshape(R.shape)

    return f


class _Spline:
    """C^2 bicubic interpolant of u on the odd extension in r."""

    def __init__(self, u):
        g = u.grid
        r = np.concatenate([-g.r[::-1], [0.0], g.r])
        vals = np.vstack([-u.values[::-1], np.zeros((1, g.n_z)), u.values])
        self.spl = RectBivariateSpline(r, g.z, vals, kx=3, ky=3, s=0)
        self.r_max, self.z_max = g.r_max, g.z_max

    def __call__(self, R, Z, dr=0, dz=0):
        R, Z = np.broadcast_arrays(np.asarray(R, float), np.asarray(Z, float))
        out = self.spl.ev(R.ravel(), Z.ravel(), dx=dr, dy=dz).reshape(R.shape)
        outside = (np.abs(R) > self.r_max) | (np.abs(Z) > self.z_max)
        return np.where(outside, 0.0, out)


def _scalar_callable(u, smooth=False):
    """u as a function of (R, Z) arrays; Fields are interpolated."""
    if isinstance(u, Field):
        return _Spline(u) if smooth else _bilinear(u)
    if callable(u):
        return u
    raise InvalidArgument("u must be a Field or a callable u(r, x3)")


def _lift_values(f, pts):
    x1, x2, x3 = pts[..., 0], pts[..., 1], pts[..., 2]
    r = np.sqrt(x1 * x1 + x2 * x2)
    s = f(r, x3) / r
    return np.stack([-x2 * s, x1 * s, np.zeros_like(s)], axis=-1)


@dataclass
class VectorSample:
    points: np.ndarray
    U_values: np.ndarray
    u_values: np.ndarray
    source: object = field(repr=False, default=None)


def _min_radius(u):
    return u.grid.dr if isinstance(u, Field) else 0.0


def lift(u, points):
    """Sample U at 3-D ``points`` (bilinear interpolation for Fields)."""
    pts = _as_points(points)
    r = np.hypot(pts[:, 0], pts[:, 1])
    r_min = _min_radius(u)
    if np.any(r < max(r_min, 1e-300)):
        raise InvalidArgument(f"points must stay at least one cell ({r_min:.3g}) off the axis")
    f = _scalar_callable(u)
    U = _lift_values(f, pts)
    return VectorSample(pts, U, f(r, pts[:, 2]), u)


def lift_function(u):
    """U as a callable on arrays of points of shape (..., 3)."""
    f = _scalar_callable(u)
    return lambda pts: _lift_values(f, np.asarray(pts))


def default_probes(grid_or_extent, n_r=6, n_z=7, n_theta=5, inner=0.2, outer=0.8, seed=0):
    """Cylindrical shell inner*r_max <= r <= outer*r_max, |x3| <= outer*z_max."""
    if isinstance(grid_or_extent, _grid.AxiGrid):
        r_max, z_max = grid_or_extent.r_max, grid_or_extent.z_max
    else:
        r_max, z_max = grid_or_extent
    rng = np.random.default_rng(seed)
    r = np.linspace(inner * r_max, outer * r_max, n_r)
    z = np.linspace(-outer * z_max, outer * z_max, n_z)
    theta = 2 * np.pi * (np.arange(n_theta) + rng.uniform(size=n_theta)) / n_theta
    R, Zg, T = np.meshgrid(r, z, theta, indexing="ij")
    return np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel(), Zg.ravel()], axis=-1)


def _jacobian_complex(Ufun, pts, h=1e-30):
    """dU_i/dx_j by complex-step differentiation (analytic callables only)."""
    jac = np.empty(pts.shape[:-1] + (3, 3))
    for j in range(3):
        z = pts.astype(complex)
        z[..., j] += 1j * h
        jac[..., :, j] = np.imag(Ufun(z)) / h
    return jac


def _jacobian_fd(Ufun, pts, h):
    jac = np.empty(pts.shape[:-1] + (3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        jac[..., :, j] = (Ufun(pts + e) - Ufun(pts - e)) / (2 * h)
    return jac


def _curl_from_jac(jac):
    return np.stack([jac[..., 2, 1] - jac[..., 1, 2],
                     jac[..., 0, 2] - jac[..., 2, 0],
                     jac[..., 1, 0] - jac[..., 0, 1]], axis=-1)


def divergence_residual(u, probes, step=None):
    """max |div U| over ``probes``.

    Callables are differentiated by complex step, so an analytic u gives
    zero to rounding. Fields are lifted through their bicubic spline and
    differenced centrally with ``step`` (default: a quarter cell). The lift
    of any smooth profile is solenoidal, so what remains is the O(step^2)
    error of the difference quotients.
    """
    pts = _as_points(probes)
    if isinstance(u, Field):
        if not np.any(u.values):
            return 0.0
        step = u.grid.h / 4.0 if step is None else float(step)
        f = _Spline(u)
        jac = _jacobian_fd(lambda q: _lift_values(f, q), pts, step)
    else:
        jac = _jacobian_complex(lift_function(u), pts)
    return float(np.max(np.abs(np.trace(jac, axis1=-2, axis2=-1))))


def curl_density(u, points):
    """|curl U|^2 at points, for an analytic u (complex step)."""
    jac = _jacobian_complex(lift_function(u), _as_points(points))
    return np.sum(_curl_from_jac(jac) ** 2, axis=-1)


def gradient_density(u, points):
    """Frobenius |grad U|^2 at points, for an analytic u (complex step)."""
    jac = _jacobian_complex(lift_function(u), _as_points(points))
    return np.sum(jac**2, axis=(-2, -1))


def _nonlinear(U, p):
    mag = np.linalg.norm(U, axis=-1, keepdims=True)
    out = mag**4 * U
    if p is not None:
        out = out + mag ** (p - 2.0) * U
    return out, mag[..., 0]


def _scale(mag, p):
    s = mag**5 if p is None else mag ** (p - 1.0) + mag**5
    return float(np.max(s))


def _potential_at(V, pts):
    if V is None:
        return np.zeros(pts.shape[:-1])
    r = np.hypot(pts[..., 0], pts[..., 1])
    return np.asarray(V(r, pts[..., 2]), float)


def curlcurl_residual(u, V, p, probes, step=None):
    """max |curl curl U + V U - |U|^(p-2) U - |U|^4 U| / max(|U|^(p-1) + |U|^5).

    The curl is applied twice by nested central differences of the lifted
    field with step ``step`` (default: 1/20 of the grid spacing, or 1e-3 for
    callables). Fields are interpolated by a bicubic spline. ``p=None``
    keeps only the quintic term and ``V=None`` means V = 0.
    """
    pts = _as_points(probes)
    if isinstance(u, Field) and not np.any(u.values):
        return 0.0
    f = _scalar_callable(u, smooth=True)
    if step is None:
        step = u.grid.h / 20.0 if isinstance(u, Field) else 1e-3
    Ufun = lambda q: _lift_values(f, q)  # noqa: E731

    def curl(q):
        return _curl_from_jac(_jacobian_fd(Ufun, q, step))

    cc = _curl_from_jac(_jacobian_fd(curl, pts, step))
    U = Ufun(pts)
    nl, mag = _nonlinear(U, p)
    res = cc + _potential_at(V, pts)[..., None] * U - nl
    scale = _scale(mag, p)
    if scale == 0:
        return float(np.max(np.linalg.norm(res, axis=-1)))
    return float(np.max(np.linalg.norm(res, axis=-1)) / scale)


def scalar_probe_residual(u, V, p, probes):
    """The scalar equation's residual at the same probes and in the same units.

    Uses exact derivatives of the same spline that ``curlcurl_residual``
    differentiates numerically, so the ratio of the two isolates the lift.
    """
    pts = _as_points(probes)
    if isinstance(u, Field) and not np.any(u.values):
        return 0.0
    s = _Spline(u) if isinstance(u, Field) else None
    if s is None:
        raise InvalidArgument("scalar_probe_residual needs a Field")
    r = np.hypot(pts[:, 0], pts[:, 1])
    z = pts[:, 2]
    val = s(r, z)
    lap = s(r, z, dr=2) + s(r, z, dr=1) / r + s(r, z, dz=2)
    mag = np.abs(val)
    nl = mag**4 * val + (0.0 if p is None else mag ** (p - 2.0) * val)
    res = -lap + val / r**2 + _potential_at(V, pts) * val - nl
    scale = _scale(mag, p)
    return float(np.max(np.abs(res)) / scale) if scale else float(np.max(np.abs(res)))


def vector_energy(u, params):
    """I(U) with |grad U|^2 = u_r^2 + u_x3^2 + u^2/r^2 and |U| = |u| in cylindrical form."""
    g = u.grid
    R, Z = g.mesh()
    grad_sq = _grid.dirichlet_energy(u) + _grid.centrifugal_energy(u)
    pot = float(np.sum(g.weights * params.operator.potential(R, Z) * u.values**2))
    return (0.5 * (grad_sq + pot) - _grid.integrate_power(u, params.p) / params.p
            - _grid.integrate_power(u, 6) / 6.0)


def energy_equivalence(u, params):
    """(I(U), J(u)); equal to rounding because the densities coincide."""
    return float(vector_energy(u, params)), float(energy(params, u))


def curl_energy(u):
    """Discrete int |curl U|^2 on cell edges.

    (u_r + u/r)^2 is formed on radial edges at r_(j-1/2) and u_x3^2 on axial
    edges; this converges to int |grad u|^2 + u^2/r^2 at second order.
    """
    g = u.grid
    pad = np.vstack([np.zeros((1, g.n_z)), u.values])
    r_mid = g.r - 0.5 * g.dr
    w_z = g.weights[0] / (2.0 * np.pi * g.r[0] * g.dr)
    ur = np.diff(pad, axis=0) / g.dr
    um = 0.5 * (pad[1:] + pad[:-1])
    radial = 2.0 * np.pi * g.dr * np.sum(r_mid[:, None] * w_z[None, :] * (ur + um / r_mid[:, None]) ** 2)
    w_r = g.weights[:, 0] / (0.5 * g.dz)
    axial = np.sum(w_r[:, None] * np.diff(u.values, axis=1) ** 2) / g.dz
    return float(radial + axial)


def transported_norm(u, q, theta=0.7):
    """int |U|^q d^3x with |U| formed from the lifted components at the nodes."""
    g = u.grid
    R, Z = g.mesh()
    pts = np.stack([R * np.cos(theta), R * np.sin(theta), Z], axis=-1)
    s = u.values / R
    U = np.stack([-pts[..., 1] * s, pts[..., 0] * s, np.zeros_like(s)], axis=-1)
    mag = np.linalg.norm(U, axis=-1)
    return float(np.sum(g.weights * mag**q))
