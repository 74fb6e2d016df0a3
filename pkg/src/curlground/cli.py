"""Command-line interface.

Exit codes: 0 success, 1 hypothesis violation (condition (V) or regime gate),
2 numeric failure, 3 configuration error.
"""

import argparse
import csv
import json
import os
import sys
from contextlib import nullcontext

from . import __version__
from .config import DEFAULTS, from_dict
from .errors import ConfigError, CurlGroundError, HypothesisViolation, InvalidArgument, NoFiberMax, NumericFailure
from .fieldio import read_field, write_field
from .nehari import EnergyParams, minimize_on_manifold
from .operator import Potential, assemble
from .pipeline import (RunManifest, grid_from, ground_options, jsonable, lift_report, run_pipeline,
                       sobolev_options, spectrum_summary)
from .sobolev import solve_sobolev
from .spectral import split
from .threshold import lemma22_report, threshold_ladder
from .vectorfield import default_probes, lift

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3

_EPILOG = f"""\
configuration (JSON, strict; unknown keys are rejected):
  grid            {{r_max, z_max, n_r, n_z}}                  required
  potential       {{kind: constant|analytic-periodic|tabulated|sum, ...}}   required
  p               exponent in the open interval (2, 6)      required
  tolerances      default {json.dumps(DEFAULTS["tolerances"])}
                  (zero = null means 1e-8 * ||L||_est)
  sobolev         default {json.dumps(DEFAULTS["sobolev"])}
  threshold_grid  default null (use grid)
  eps_ladder      default {json.dumps(DEFAULTS["eps_ladder"])}
  starts          default {DEFAULTS["starts"]} (random multistart count)
  output_dir      default {DEFAULTS["output_dir"]!r}
  seed            default {DEFAULTS["seed"]}

exit codes: 0 ok, 1 hypothesis violation, 2 numeric failure, 3 config error
environment: CURLGROUND_THREADS caps BLAS/LAPACK threads
"""


def _grid_arg(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected n_r,n_z,r_max,z_max")
    try:
        return {"n_r": int(parts[0]), "n_z": int(parts[1]), "r_max": float(parts[2]), "z_max": float(parts[3])}
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _potential_arg(text):
    """Inline JSON, a path to a JSON file, or a bare number (constant V)."""
    if os.path.isfile(text):
        with open(text) as fh:
            return json.load(fh)
    try:
        val = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"potential is neither JSON nor a file: {exc}") from exc
    if isinstance(val, (int, float)):
        return {"kind": "constant", "value": val}
    return val


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration code, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=_u64, help="seed for random starts")
    common.add_argument("--p", type=float, help="nonlinearity exponent in (2, 6)")
    common.add_argument("--potential", type=_potential_arg, help="potential spec: JSON, file or number")
    common.add_argument("--grid", type=_grid_arg, help="n_r,n_z,r_max,z_max")
    common.add_argument("--tol", type=float, help="outer tolerance (ground state / Sobolev)")
    common.add_argument("--starts", type=int, help="number of random multistarts")

    parser = _Parser(
        prog="curlground", description="Ground states of curl-curl equations with a Sobolev critical term.",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="negative spectrum and gap at 0")
    s = sub.add_parser("sobolev", parents=[common], help="Sobolev minimizer Phi and S_hat")
    s.add_argument("--sobolev-grid", type=_grid_arg, help="grid for Phi (n_r,n_z,r_max,z_max)")
    for name, text in (("ground", "ground state on the Nehari-Pankov manifold"),
                       ("lemma22", "scaling rates of the concentrating profiles"),
                       ("threshold", "energy threshold along the eps ladder"),
                       ("lift", "vector-field lift of a profile and its residuals"),
                       ("pipeline", "all stages with a run manifest")):
        s = sub.add_parser(name, parents=[common], help=text)
        if name != "pipeline":
            s.add_argument("--phi", help="AXIFIELD dump of Phi (skips the Sobolev stage)")
        if name == "lift":
            s.add_argument("--field", help="AXIFIELD dump of the profile (default: compute the ground state)")
    return parser


def _config(args):
    data = {}
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}") from exc
    over = {"grid": args.grid, "potential": args.potential, "p": args.p, "starts": args.starts,
            "seed": args.seed, "output_dir": args.out}
    data.update({k: v for k, v in over.items() if v is not None})
    if args.tol is not None:
        data.setdefault("tolerances", {})
        data["tolerances"]["outer"] = args.tol
        data["tolerances"]["sobolev"] = args.tol
    if getattr(args, "sobolev_grid", None) is not None:
        data.setdefault("sobolev", {})["grid"] = args.sobolev_grid
    if args.command in ("spectrum", "sobolev"):
        data.setdefault("p", 4.0)  # unused by these stages
    if args.command == "sobolev":
        data.setdefault("grid", DEFAULTS["sobolev"]["grid"])
        data.setdefault("potential", {"kind": "constant", "value": 0.0})
    return from_dict(data)


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _params(cfg):
    op = assemble(grid_from(cfg.grid), Potential.from_spec(cfg.potential))
    return EnergyParams(cfg.p, op, split(op, cfg.tolerances.get("zero")))


def _phi(cfg, args):
    if getattr(args, "phi", None):
        Phi = read_field(args.phi)
        from .grid import integrate_power

        return Phi, float(integrate_power(Phi, 6) ** (2.0 / 3.0))
    res = solve_sobolev(grid_from(cfg.sobolev["grid"]), sobolev_options(cfg))
    return res.Phi, res.S_hat


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_spectrum(cfg, args, out):
    op = assemble(grid_from(cfg.grid), Potential.from_spec(cfg.potential))
    report = spectrum_summary(split(op, cfg.tolerances.get("zero")))
    _dump(report, os.path.join(out, "spectrum.json"))
    return report


def cmd_sobolev(cfg, args, out):
    res = solve_sobolev(grid_from(cfg.sobolev["grid"]), sobolev_options(cfg))
    write_field(res.Phi, os.path.join(out, "Phi.axifield"))
    report = res.summary()
    _dump(report, os.path.join(out, "sobolev.json"))
    return report


def cmd_ground(cfg, args, out):
    params = _params(cfg)
    _, S_hat = _phi(cfg, args)
    gs = minimize_on_manifold(params, ground_options(cfg, S_hat))
    write_field(gs.u, os.path.join(out, "ground.axifield"))
    report = gs.summary()
    report["S_hat"] = S_hat
    _dump(report, os.path.join(out, "ground.json"))
    return report


def cmd_lemma22(cfg, args, out):
    params = _params(cfg)
    Phi, S_hat = _phi(cfg, args)
    rep = lemma22_report(Phi, params.split, cfg.eps_ladder, S_hat)
    _dump(rep.to_dict(), os.path.join(out, "lemma22.json"))
    _write_csv(os.path.join(out, "lemma22.csv"), ["eps", "quantity", "value"], rep.csv_rows())
    return rep.to_dict()


def cmd_threshold(cfg, args, out):
    params = _params(cfg)
    Phi, S_hat = _phi(cfg, args)
    lad = threshold_ladder(params, Phi, S_hat, cfg.eps_ladder, cfg.tolerances["fiber"])
    rows = []
    for r in lad.reports:
        rows += [(r.eps, "sup_J", r.sup_J), (r.eps, "level", r.level), (r.eps, "gap", r.gap)]
    _dump(lad.to_dict(), os.path.join(out, "threshold.json"))
    _write_csv(os.path.join(out, "threshold.csv"), ["eps", "quantity", "value"], rows)
    if not lad.all_certified:
        bad = [r for r in lad.reports if not r.certified]
        raise NumericFailure(f"threshold not certified at eps={[r.eps for r in bad]}: {bad[0].suggestion}")
    return lad.to_dict()


def cmd_lift(cfg, args, out):
    params = _params(cfg)
    if args.field:
        u = read_field(args.field)
    else:
        _, S_hat = _phi(cfg, args) if args.phi else (None, None)
        u = minimize_on_manifold(params, ground_options(cfg, S_hat)).u
    if u.grid != params.operator.grid:
        raise ConfigError("field grid does not match --grid", pointer="/grid")
    report = lift_report(u, params, cfg.seed)
    sample = lift(u, default_probes(u.grid, seed=cfg.seed))
    rows = [list(x) + list(U) for x, U in zip(sample.points, sample.U_values)]
    _write_csv(os.path.join(out, "lift.csv"), ["x1", "x2", "x3", "U1", "U2", "U3"], rows)
    _dump(report, os.path.join(out, "lift.json"))
    return report


def cmd_pipeline(cfg, args, out):
    m = run_pipeline(cfg)
    return {"summary": m.summary, "manifest": os.path.join(out, "manifest.json")}


COMMANDS = {"spectrum": cmd_spectrum, "sobolev": cmd_sobolev, "ground": cmd_ground, "lemma22": cmd_lemma22,
            "threshold": cmd_threshold, "lift": cmd_lift, "pipeline": cmd_pipeline}


def _threads():
    n = os.environ.get("CURLGROUND_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def _fail(code, exc, command):
    err = {"error": type(exc).__name__, "message": str(exc), "command": command, "exit_code": code}
    for key in ("stage", "pointer", "eigenvalue", "zero_tol", "residual"):
        val = getattr(exc, key, None)
        if val is not None and not hasattr(val, "shape"):
            err[key] = val
    print(json.dumps(jsonable(err), sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        cfg = _config(args)
        os.makedirs(cfg.output_dir, exist_ok=True)
    except (ConfigError, InvalidArgument, OSError) as exc:
        return _fail(EXIT_CONFIG, exc, args.command)
    try:
        with _threads():
            report = COMMANDS[args.command](cfg, args, cfg.output_dir)
    except HypothesisViolation as exc:
        return _fail(EXIT_HYPOTHESIS, exc, args.command)
    except (ConfigError, InvalidArgument) as exc:
        return _fail(EXIT_CONFIG, exc, args.command)
    except (NumericFailure, NoFiberMax, CurlGroundError, ArithmeticError, RuntimeError) as exc:
        return _fail(EXIT_NUMERIC, exc, args.command)
    print(json.dumps(jsonable(report), sort_keys=True, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
