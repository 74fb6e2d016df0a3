"""Gap S_hat^(3/2)/3 - sup J on the fiber of phi_eps^+, along the eps ladder.

The gap stays positive and shrinks as eps decreases, following the
eps^(3 - p/2) gain term.

Run: python3 demos/threshold_trend.py
"""

from curlground.grid import build_grid
from curlground.nehari import EnergyParams
from curlground.operator import assemble
from curlground.sobolev import SobolevOptions, solve_sobolev
from curlground.spectral import split
from curlground.threshold import threshold_ladder

LADDER = (0.5, 0.4, 0.32, 0.25, 0.2)


def main():
    sob = solve_sobolev(build_grid(6, 6, 192, 385), SobolevOptions())
    # eps <= 1/2 keeps the rescaled 6-box profile inside the 3-box.
    op = assemble(build_grid(3, 3, 96, 193))
    sp = split(op)
    print("eps    " + "".join(f"p={p:<9g}" for p in (2.5, 3, 4, 5)))
    ladders = [threshold_ladder(EnergyParams(p, op, sp), sob.Phi, sob.S_hat, LADDER) for p in (2.5, 3, 4, 5)]
    for k, eps in enumerate(LADDER):
        print(f"{eps:<7g}" + "".join(f"{lad.reports[k].gap:<11.4f}" for lad in ladders))
    print("direction along the ladder:", ", ".join(lad.direction for lad in ladders))


if __name__ == "__main__":
    main()
