"""Ground states for a zero and an indefinite potential, with lift diagnostics.

Run: python3 demos/ground_states.py   (about half a minute on one core)
"""

import numpy as np

from curlground.grid import build_grid
from curlground.nehari import EnergyParams, GroundStateOptions, minimize_on_manifold
from curlground.operator import Potential, assemble
from curlground.sobolev import SobolevOptions, solve_sobolev
from curlground.spectral import split
from curlground.vectorfield import curlcurl_residual, default_probes, energy_equivalence, scalar_probe_residual

INDEFINITE = {
    "kind": "sum",
    "terms": [
        {"kind": "constant", "value": 1.0},
        {"kind": "analytic-periodic", "expr": "cos2pi_z", "amplitude": 0.5},
        {"kind": "analytic-periodic", "expr": "well_r+ring_r", "amplitude": [3.0, 7.0]},
    ],
}


def main():
    sob = solve_sobolev(build_grid(6, 6, 96, 193), SobolevOptions())
    level = sob.S_hat**1.5 / 3
    print(f"S_hat = {sob.S_hat:.4f}, threshold S_hat^(3/2)/3 = {level:.4f}")

    grid = build_grid(3, 3, 48, 97)
    for name, spec, p in (("V = 0", None, 4.0), ("indefinite V", INDEFINITE, 5.0)):
        op = assemble(grid, None if spec is None else Potential.from_spec(spec))
        sp = split(op)
        params = EnergyParams(p, op, sp)
        gs = minimize_on_manifold(params, GroundStateOptions(S_hat=sob.S_hat))
        I, J = energy_equivalence(gs.u, params)
        probes = default_probes(grid, inner=0.1, outer=0.6)
        V = op.potential if spec is not None else None
        ratio = curlcurl_residual(gs.u, V, p, probes) / scalar_probe_residual(gs.u, V, p, probes)
        print(f"\n{name}, p = {p:g}: dim E- = {sp.dim_minus}, eigenvalues {np.round(sp.eigenvalues, 4)}")
        print(f"  c = {gs.c:.4f}  (margin to threshold {gs.threshold_margin:.4f})")
        print(f"  Nehari residual {gs.nehari_residual:.1e}, PDE residual {gs.pde_residual:.1e}")
        print(f"  |I(U) - J(u)| = {abs(I - J):.1e}, vector/scalar residual ratio {ratio:.2f}")


if __name__ == "__main__":
    main()
