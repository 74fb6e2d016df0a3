"""Truncated axisymmetric grid, fields and the discrete calculus on them.

The half-plane {(r, x3) : r > 0} is cut to (0, r_max] x [-z_max, z_max] and
sampled uniformly. The axis r = 0 is not a node: the first radial node sits
at dr, and u(0, x3) = 0 enters the stencils as a ghost value. Nodes on
r = r_max and |x3| = z_max carry homogeneous Dirichlet data.

Integrals are taken with respect to the three-dimensional measure
dx = 2 pi r dr dx3, using the trapezoid rule in both directions. With the
ghost axis node (weight 0) the rule integrates constants exactly, so the
weights sum to the cylinder volume pi r_max^2 * 2 z_max.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

MIN_NODES = 8


@dataclass(frozen=True, eq=False)
class AxiGrid:
    r_max: float
    z_max: float
    n_r: int
    n_z: int
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    dr: float = field(repr=False)
    dz: float = field(repr=False)
    weights: np.ndarray = field(repr=False)
    boundary_mask: np.ndarray = field(repr=False)

    @property
    def grid_id(self):
        return (float(self.r_max), float(self.z_max), int(self.n_r), int(self.n_z))

    @property
    def shape(self):
        return (self.n_r, self.n_z)

    @property
    def interior(self):
        return ~self.boundary_mask

    @property
    def n_interior(self):
        return (self.n_r - 1) * (self.n_z - 2)

    @property
    def h(self):
        """Coarsest spacing."""
        return max(self.dr, self.dz)

    def mesh(self):
        return np.meshgrid(self.r, self.z, indexing="ij")

    def interior_weights(self):
        return self.weights[:-1, 1:-1].ravel()

    def __eq__(self, other):
        return isinstance(other, AxiGrid) and self.grid_id == other.grid_id

    def __hash__(self):
        return hash(self.grid_id)


def build_grid(r_max, z_max, n_r, n_z):
    """Uniform tensor grid on (0, r_max] x [-z_max, z_max].

    Radial nodes are ``dr * (1..n_r)`` with ``dr = r_max / n_r``; the ``n_z``
    axial nodes include both ends, so ``dz = 2 z_max / (n_z - 1)``. Use an odd
    ``n_z`` to have a node on x3 = 0 and ``n_z = 2 n_r + 1`` for square cells
    when ``r_max == z_max``.
    """
    if not (np.isfinite(r_max) and np.isfinite(z_max)) or r_max <= 0 or z_max <= 0:
        raise InvalidArgument(f"domain sizes must be positive, got r_max={r_max}, z_max={z_max}")
    if int(n_r) != n_r or int(n_z) != n_z or n_r < MIN_NODES or n_z < MIN_NODES:
        raise InvalidArgument(f"need integer n_r, n_z >= {MIN_NODES}, got {n_r}, {n_z}")
    n_r, n_z = int(n_r), int(n_z)
    r_max, z_max = float(r_max), float(z_max)

    dr = r_max / n_r
    r = dr * np.arange(1, n_r + 1)
    z = np.linspace(-z_max, z_max, n_z)
    dz = 2.0 * z_max / (n_z - 1)

    w_r = 2.0 * np.pi * r * dr
    w_r[-1] *= 0.5
    w_z = np.full(n_z, dz)
    w_z[[0, -1]] *= 0.5
    weights = np.outer(w_r, w_z)

    boundary = np.zeros((n_r, n_z), dtype=bool)
    boundary[-1, :] = True
    boundary[:, [0, -1]] = True

    for a in (r, z, weights, boundary):
        a.setflags(write=False)
    return AxiGrid(r_max, z_max, n_r, n_z, r, z, dr, dz, weights, boundary)


def grid_with_spacing(r_max, z_max, h):
    """Grid with dr = dz = h; both extents must be multiples of h."""
    n_r = r_max / h
    n_z = 2 * z_max / h
    if abs(n_r - round(n_r)) > 1e-9 or abs(n_z - round(n_z)) > 1e-9:
        raise InvalidArgument(f"extents ({r_max}, {z_max}) are not multiples of h={h}")
    return build_grid(r_max, z_max, int(round(n_r)), int(round(n_z)) + 1)


class Field:
    """Real scalar u(r, x3) sampled on an ``AxiGrid``.

    Values vanish on the Dirichlet nodes; the array is read-only.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise InvalidArgument(f"values have shape {values.shape}, grid needs {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("field values must be finite")
        if np.any(values[grid.boundary_mask] != 0.0):
            raise InvalidArgument("field must vanish on the Dirichlet boundary")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def sample(cls, grid, func):
        """Evaluate ``func(R, Z)`` on the mesh and zero the boundary nodes."""
        R, Z = grid.mesh()
        values = np.array(np.broadcast_to(func(R, Z), grid.shape), dtype=float)
        values[grid.boundary_mask] = 0.0
        return cls(grid, values)

    @classmethod
    def from_interior(cls, grid, vec):
        values = np.zeros(grid.shape)
        values[:-1, 1:-1] = np.asarray(vec, dtype=float).reshape(grid.n_r - 1, grid.n_z - 2)
        return cls(grid, values)

    @property
    def grid_id(self):
        return self.grid.grid_id

    def interior_vector(self):
        return self.values[:-1, 1:-1].ravel()

    def _check(self, other):
        if not isinstance(other, Field):
            return
        if other.grid.grid_id != self.grid.grid_id:
            raise InvalidArgument(
                f"fields live on different grids {self.grid.grid_id} and {other.grid.grid_id}"
            )

    def _operand(self, other):
        self._check(other)
        return other.values if isinstance(other, Field) else other

    def __add__(self, other):
        return Field(self.grid, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._operand(other))

    def __rsub__(self, other):
        return Field(self.grid, self._operand(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Field):
            raise InvalidArgument("division by a field is not supported")
        return Field(self.grid, self.values / scalar)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __repr__(self):
        return f"Field(grid={self.grid.grid_id}, max|u|={np.abs(self.values).max():.4g})"


def extend_by_zero(u, grid):
    """Embed ``u`` into a larger grid with the same spacing, centred in x3."""
    _require_field(u)
    g = u.grid
    if not (np.isclose(g.dr, grid.dr) and np.isclose(g.dz, grid.dz)):
        raise InvalidArgument("grids must share dr and dz")
    shift = (grid.n_z - g.n_z) / 2
    if grid.n_r < g.n_r or shift < 0 or shift != int(shift):
        raise InvalidArgument(f"grid {grid.grid_id} does not contain {g.grid_id}")
    shift = int(shift)
    values = np.zeros(grid.shape)
    values[: g.n_r, shift: shift + g.n_z] = u.values
    return Field(grid, values)


def _require_field(u):
    if not isinstance(u, Field):
        raise InvalidArgument(f"expected a Field, got {type(u).__name__}")


def integrate(u):
    _require_field(u)
    return float(np.sum(u.grid.weights * u.values))


def integrate_power(u, q):
    """Return the integral of |u|^q over R^3 (cylindrical measure)."""
    _require_field(u)
    if not np.isfinite(q) or q < 1:
        raise InvalidArgument(f"q must be >= 1, got {q}")
    return float(np.sum(u.grid.weights * np.abs(u.values) ** q))


def inner(u, v):
    """Weighted inner product <u, v>_W."""
    _require_field(u)
    u._check(v)
    return float(np.sum(u.grid.weights * u.values * v.values))


def _staggered(u, v):
    # Radial edges include the one from the ghost axis node (value 0) to r_1.
    g = u.grid
    pad_u = np.vstack([np.zeros((1, g.n_z)), u.values])
    pad_v = np.vstack([np.zeros((1, g.n_z)), v.values])
    r_mid = g.r - 0.5 * g.dr
    w_z = g.weights[0] / (2.0 * np.pi * g.r[0] * g.dr)  # trapezoid weights in x3
    dur = np.diff(pad_u, axis=0)
    dvr = np.diff(pad_v, axis=0)
    radial = 2.0 * np.pi / g.dr * np.sum(r_mid[:, None] * w_z[None, :] * dur * dvr)

    w_r = g.weights[:, 0] / (0.5 * g.dz)  # 2 pi r dr, halved at r_max
    duz = np.diff(u.values, axis=1)
    dvz = np.diff(v.values, axis=1)
    axial = np.sum(w_r[:, None] * duz * dvz) / g.dz
    return radial + axial


def dirichlet_form(u, v):
    """Discrete counterpart of the integral of grad u . grad v.

    Differences live on cell edges and carry the edge-midpoint radius, which
    makes this the exact summation-by-parts partner of the five-point
    stencil used by ``curlground.operator``.
    """
    _require_field(u)
    u._check(v)
    return float(_staggered(u, v))


def dirichlet_energy(u):
    return dirichlet_form(u, u)


def centrifugal_energy(u):
    """Integral of u^2 / r^2."""
    _require_field(u)
    g = u.grid
    return float(np.sum(g.weights * u.values**2 / g.r[:, None] ** 2))


def e_norm(u):
    """(int |grad u|^2 + u^2/r^2 + u^2 dx)^(1/2)."""
    return float(np.sqrt(dirichlet_energy(u) + centrifugal_energy(u) + integrate_power(u, 2)))


def sup_norm(u):
    _require_field(u)
    return float(np.abs(u.values).max())
