"""The operator L = -Delta + 1/r^2 + V on an ``AxiGrid``.

Here Delta = d_r^2 + (1/r) d_r + d_x3^2. The radial part is discretized with
central differences, which for -(u_rr + u_r/r) gives exactly the flux form
-(1/r)(r u_r)_r with edge radii r +- dr/2. Multiplying the rows by the
quadrature weights therefore yields a symmetric stiffness matrix K = W L,
and u^T K u is the discrete quadratic form
int |grad u|^2 + u^2/r^2 + V u^2 dx.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidArgument
from .grid import Field

BUILTINS = {
    "cos2pi_z": lambda R, Z, a: a * np.cos(2.0 * np.pi * Z),
    "well_r": lambda R, Z, a: -a * np.exp(-(R**2)),
    "ring_r": lambda R, Z, a: -a * np.exp(-4.0 * (R - 2.0) ** 2),
}


@dataclass(frozen=True, eq=False)
class Potential:
    """Bounded potential V(r, x3), 1-periodic in x3 unless ``period_z`` is None."""

    kind: str
    evaluator: object = field(repr=False)
    bound: float
    spec: dict = field(default_factory=dict, repr=False)
    period_z: float = 1.0

    def __call__(self, R, Z):
        return np.broadcast_to(self.evaluator(np.asarray(R, float), np.asarray(Z, float)), np.shape(R))

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls("constant", lambda R, Z: np.full(np.shape(R), value), abs(value),
                   {"kind": "constant", "value": value})

    @classmethod
    def zero(cls):
        return cls.constant(0.0)

    @classmethod
    def builtin(cls, expr, amplitude):
        names = [s.strip() for s in expr.split("+")]
        amps = np.broadcast_to(np.atleast_1d(np.asarray(amplitude, float)), (len(names),))
        unknown = [n for n in names if n not in BUILTINS]
        if unknown:
            raise InvalidArgument(f"unknown potential builtin(s) {unknown}; known: {sorted(BUILTINS)}")
        parts = [(BUILTINS[n], float(a)) for n, a in zip(names, amps)]

        def evaluate(R, Z):
            return sum(f(R, Z, a) for f, a in parts)

        amp_spec = float(amps[0]) if len(names) == 1 else [float(a) for a in amps]
        return cls("analytic-periodic", evaluate, float(np.sum(np.abs(amps))),
                   {"kind": "analytic-periodic", "expr": expr, "amplitude": amp_spec})

    @classmethod
    def tabulated(cls, r_nodes, z_nodes, values):
        """Bilinear table over r_nodes x [0, 1); x3 is reduced mod 1 and r is clamped."""
        r_nodes = np.asarray(r_nodes, float)
        z_nodes = np.asarray(z_nodes, float)
        values = np.asarray(values, float)
        if values.shape != (r_nodes.size, z_nodes.size):
            raise InvalidArgument("tabulated values must have shape (len(r), len(z))")
        if z_nodes[0] != 0.0 or z_nodes[-1] > 1.0:
            raise InvalidArgument("tabulated x3 nodes must start at 0 and stay within one period")
        if z_nodes[-1] < 1.0:  # close the period
            z_nodes = np.append(z_nodes, 1.0)
            values = np.hstack([values, values[:, :1]])
        interp = RegularGridInterpolator((r_nodes, z_nodes), values)

        def evaluate(R, Z):
            R, Z = np.broadcast_arrays(R, Z)
            pts = np.stack([np.clip(R, r_nodes[0], r_nodes[-1]), np.mod(Z, 1.0)], axis=-1)
            return interp(pts.reshape(-1, 2)).reshape(R.shape)

        return cls("tabulated", evaluate, float(np.abs(values).max()),
                   {"kind": "tabulated", "r": r_nodes.tolist(), "z": z_nodes.tolist(),
                    "values": values.tolist()})

    @classmethod
    def sum(cls, terms):
        terms = list(terms)
        if not terms:
            raise InvalidArgument("a sum potential needs at least one term")

        def evaluate(R, Z):
            return sum(t(R, Z) for t in terms)

        return cls("sum", evaluate, float(sum(t.bound for t in terms)),
                   {"kind": "sum", "terms": [t.spec for t in terms]})

    @classmethod
    def from_spec(cls, spec):
        kind = spec.get("kind")
        if kind == "constant":
            return cls.constant(spec["value"])
        if kind == "analytic-periodic":
            return cls.builtin(spec["expr"], spec["amplitude"])
        if kind == "tabulated":
            return cls.tabulated(spec["r"], spec["z"], spec["values"])
        if kind == "sum":
            return cls.sum(cls.from_spec(t) for t in spec["terms"])
        raise InvalidArgument(f"unknown potential kind {kind!r}")

    def to_spec(self):
        return dict(self.spec)


@dataclass(eq=False)
class OperatorHandle:
    grid: object
    potential: Potential
    stiffness: sp.csr_matrix = field(repr=False)
    weights: np.ndarray = field(repr=False)
    matrix: sp.csr_matrix = field(repr=False)
    v_nodes: np.ndarray = field(repr=False)
    norm_estimate: float = 0.0
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def grid_id(self):
        return self.grid.grid_id

    @property
    def size(self):
        return self.weights.size

    def vec(self, u):
        if u.grid.grid_id != self.grid.grid_id:
            raise InvalidArgument(f"field grid {u.grid.grid_id} does not match operator grid {self.grid.grid_id}")
        return u.interior_vector()

    def field(self, vec):
        return Field.from_interior(self.grid, vec)

    def symmetric_matrix(self):
        """W^-1/2 K W^-1/2, similar to L and symmetric in the Euclidean sense."""
        s = sp.diags(1.0 / np.sqrt(self.weights))
        return (s @ self.stiffness @ s).tocsc()

    def solve(self, rhs, shift=0.0):
        """Solve (K - shift W) x = rhs, caching the sparse LU per shift."""
        key = float(shift)
        if key not in self._lu:
            mat = self.stiffness - key * sp.diags(self.weights)
            self._lu[key] = sla.splu(mat.tocsc())
        return self._lu[key].solve(np.asarray(rhs, float))

    def apply_inverse(self, vec):
        """L^-1 applied to an interior vector (requires 0 not an eigenvalue)."""
        return self.solve(self.weights * vec)


def assemble(grid, V=None):
    """Assemble L for ``grid`` and potential ``V`` (default V = 0)."""
    V = Potential.zero() if V is None else V
    R, Z = grid.mesh()
    v_all = np.asarray(V(R, Z), float)
    if not np.all(np.isfinite(v_all)):
        raise InvalidArgument("potential is not finite on the grid")
    if np.abs(v_all).max() > V.bound * (1 + 1e-12) + 1e-300:
        raise InvalidArgument("potential exceeds its declared L^inf bound on the grid")

    dr, dz = grid.dr, grid.dz
    r = grid.r[:-1]
    m, n = r.size, grid.n_z - 2
    r_plus, r_minus = r + 0.5 * dr, r - 0.5 * dr
    two_pi = 2.0 * np.pi

    k_r = sp.diags(
        [-two_pi * dz * r_plus[:-1] / dr,
         two_pi * dz * (r_plus + r_minus) / dr + two_pi * dr * dz / r,
         -two_pi * dz * r_plus[:-1] / dr],
        [-1, 0, 1],
    )
    t_z = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    w = np.kron(two_pi * r * dr * dz, np.ones(n))
    v_nodes = v_all[:-1, 1:-1].ravel()

    K = (sp.kron(k_r, sp.identity(n)) + sp.kron(sp.diags(two_pi * r * dr / dz), t_z)
         + sp.diags(w * v_nodes)).tocsr()
    asym = abs(K - K.T).max()
    if asym > 1e-14 * abs(K).max():
        K = (0.5 * (K + K.T)).tocsr()

    A = (sp.diags(1.0 / w) @ K).tocsr()
    norm_est = float(abs(A).sum(axis=1).max())
    return OperatorHandle(grid, V, K, w, A, v_nodes, norm_est)


def apply(op, u):
    """Lu as a field (zero on the boundary)."""
    return op.field(op.matrix @ op.vec(u))


def quadratic_form(op, u):
    x = op.vec(u)
    return float(x @ (op.stiffness @ x))


def bilinear_form(op, u, v):
    return float(op.vec(u) @ (op.stiffness @ op.vec(v)))
