"""Spectrum of L near zero and the splitting E = E+ (+) E-.

On the truncated grid L is a symmetric pencil (K, W), so E- is spanned by
the finitely many eigenvectors with negative eigenvalue. They are computed
by shift-invert Lanczos (ARPACK via scipy) on W^-1/2 K W^-1/2 and mapped back
to W-orthonormal fields.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse.linalg as sla

from . import grid as _grid
from .errors import ConditionVViolated, InvalidArgument, NumericFailure
from .operator import quadratic_form

DEFAULT_MAXITER = 5000


def _canonical_sign(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _eigs_near(op, k, sigma, maxiter=DEFAULT_MAXITER):
    """k eigenpairs of the pencil closest to sigma, as (values, W-orthonormal vectors)."""
    n = op.size
    if k >= n - 1:
        S = op.symmetric_matrix().toarray()
        vals, vecs = sl.eigh(S)
        order = np.argsort(np.abs(vals - sigma), kind="stable")[:k]
        vals, vecs = vals[order], vecs[:, order]
    else:
        S = op.symmetric_matrix()
        v0 = np.ones(n) / np.sqrt(n)
        shift = float(sigma)
        for attempt in range(3):
            try:
                vals, vecs = sla.eigsh(S, k=k, sigma=shift, which="LM", v0=v0,
                                       maxiter=maxiter, tol=0.0)
                break
            except sla.ArpackNoConvergence as exc:
                res = None
                if exc.eigenvectors is not None and exc.eigenvectors.size:
                    res = float(np.max(np.linalg.norm(
                        S @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues, axis=0)))
                raise NumericFailure(f"ARPACK did not converge for k={k} near {sigma}",
                                     residual=res) from exc
            except RuntimeError:
                # shift hit an eigenvalue exactly; the factorization is singular
                shift = float(sigma) + (1e-10 * (1.0 + abs(sigma))) * 10**attempt
        else:
            raise NumericFailure(f"could not factorize the shifted operator near {sigma}")
        order = np.argsort(np.abs(vals - sigma), kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    vecs = _canonical_sign(vecs / np.sqrt(op.weights)[:, None])
    return vals, vecs


def spectrum_window(op, k, center=0.0):
    """The k eigenpairs nearest ``center``, ordered by |lambda - center|.

    Returns a list of ``(eigenvalue, Field)`` with W-orthonormal fields.
    """
    if int(k) != k or k < 1 or k > op.size:
        raise InvalidArgument(f"k must be an integer in [1, {op.size}], got {k}")
    vals, vecs = _eigs_near(op, int(k), float(center))
    return [(float(v), op.field(vecs[:, i])) for i, v in enumerate(vals)]


def _bottom(op, stop_above, k0=6, max_k=None):
    """Ascending lowest eigenpairs, growing k until one exceeds ``stop_above``."""
    n = op.size
    max_k = n if max_k is None else min(max_k, n)
    # -Delta_h + 1/r^2 is positive, so the spectrum lies above min V.
    sigma = min(0.0, float(op.v_nodes.min()), stop_above) - 1.0
    k = min(k0, max_k)
    while True:
        vals, vecs = _eigs_near(op, k, sigma)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if vals[-1] > stop_above or k >= max_k:
            return vals, vecs, vals[-1] > stop_above
        k = min(2 * k, max_k)


@dataclass(eq=False)
class SpectralSplit:
    op: object = field(repr=False)
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)
    gap: float
    zero_tol: float
    computed: np.ndarray = field(repr=False)

    @property
    def dim_minus(self):
        return int(self.eigenvalues.size)

    def coefficients(self, u):
        """W-inner products of u with the E- basis."""
        return self.vectors.T @ (self.op.weights * self.op.vec(u))

    def minus_field(self, coeffs):
        return self.op.field(self.vectors @ np.asarray(coeffs, float))


def split(op, zero_tol=None):
    """Compute all negative eigenpairs of L and the spectral gap at 0.

    Raises ``ConditionVViolated`` if an eigenvalue lies within ``zero_tol``
    of zero (default ``1e-8`` times a Gershgorin bound on ||L||).
    """
    zero_tol = 1e-8 * op.norm_estimate if zero_tol is None else float(zero_tol)
    vals, vecs, _ = _bottom(op, stop_above=0.0)
    nearest = float(np.min(np.abs(vals)))
    if nearest <= zero_tol:
        bad = float(vals[np.argmin(np.abs(vals))])
        raise ConditionVViolated(
            f"eigenvalue {bad:.3e} lies within zero_tol={zero_tol:.3e} of 0: 0 is (numerically) in the spectrum",
            eigenvalue=bad, zero_tol=zero_tol)
    neg = vals < 0
    return SpectralSplit(op, vals[neg], vecs[:, neg], nearest, zero_tol, vals)


def project(split, u):
    """(u_plus, u_minus) with u_minus the W-orthogonal projection onto E-."""
    x = split.op.vec(u)
    if split.dim_minus == 0:
        return u, _grid.Field.zeros(u.grid)
    x_minus = split.vectors @ (split.vectors.T @ (split.op.weights * x))
    return split.op.field(x - x_minus), split.op.field(x_minus)


def split_norms(split, u):
    """(||u+||, ||u-||) in the norm for which the form is ||u+||^2 - ||u-||^2."""
    u_plus, u_minus = project(split, u)
    q_plus = quadratic_form(split.op, u_plus)
    q_minus = -quadratic_form(split.op, u_minus)
    scale = max(1.0, _grid.e_norm(u) ** 2)
    if q_plus < -1e-12 * scale or q_minus < -1e-12 * scale:
        raise NumericFailure(
            f"inconsistent split: ||u+||^2 = {q_plus:.3e}, ||u-||^2 = {q_minus:.3e}",
            residual=min(q_plus, q_minus))
    return float(np.sqrt(max(q_plus, 0.0))), float(np.sqrt(max(q_minus, 0.0)))


def split_norm(split, u):
    plus, minus = split_norms(split, u)
    return float(np.hypot(plus, minus))


def equivalent_inner(split, u, v):
    """(u, v) = B(u+, v+) - B(u-, v-), the inner product behind ||.||."""
    x, y = split.op.vec(u), split.op.vec(v)
    K, W, E = split.op.stiffness, split.op.weights, split.vectors
    cx = E.T @ (W * x)
    cy = E.T @ (W * y)
    xp, yp = x - E @ cx, y - E @ cy
    return float(xp @ (K @ yp) - (E @ cx) @ (K @ (E @ cy)))


@dataclass
class WindowReport:
    mu: float
    n_modes: int
    complete: bool
    C0: float
    C1: float
    eigenvalues: list


def window_norm_equivalence(op, mu, samples=32, seed=0, max_modes=64):
    """Empirical constants for |u|_inf <= C0 ||u||_E <= C1 |u|_L2 on E(mu).

    Samples random combinations of the eigenvectors with eigenvalue <= mu,
    plus the eigenvectors themselves. ``complete`` is False when more than
    ``max_modes`` eigenvalues lie below ``mu`` and only the lowest were used.
    """
    if not np.isfinite(mu):
        raise InvalidArgument("mu must be finite")
    vals, vecs, complete = _bottom(op, stop_above=float(mu), max_k=max_modes)
    keep = vals <= mu
    vals, vecs = vals[keep], vecs[:, keep]
    if vals.size == 0:
        raise InvalidArgument(f"no eigenvalue of L lies below mu={mu}")
    rng = np.random.default_rng(seed)
    coeffs = np.hstack([np.eye(vals.size), rng.standard_normal((vals.size, int(samples)))])
    c0 = c1 = 0.0
    for c in coeffs.T:
        u = op.field(vecs @ c)
        en = _grid.e_norm(u)
        c0 = max(c0, _grid.sup_norm(u) / en)
        c1 = max(c1, en / np.sqrt(_grid.integrate_power(u, 2)))
    return WindowReport(float(mu), int(vals.size), bool(complete), float(c0), float(c1),
                        [float(v) for v in vals])
