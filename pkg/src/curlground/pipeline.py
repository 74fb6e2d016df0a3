"""End-to-end runs: spectrum, Sobolev profile, ground state, diagnostics.

Stage order is spectrum, sobolev, ground, lift, lemma22, threshold. The
first hypothesis violation (condition (V) or the regime gate) stops the run.
Every exception leaving ``run_pipeline`` carries a ``stage`` attribute.
"""

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import grid as _grid
from .fieldio import write_field
from .grid import build_grid
from .nehari import EnergyParams, GroundStateOptions, minimize_on_manifold
from .operator import Potential, assemble
from .sobolev import SobolevOptions, solve_sobolev
from .spectral import split
from .threshold import lemma22_report, threshold_ladder
from .vectorfield import (curlcurl_residual, default_probes, divergence_residual, energy_equivalence,
                          transported_norm)


def jsonable(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


@dataclass
class RunManifest:
    config: dict
    version: str
    stages: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    error: dict = None

    def to_dict(self):
        return jsonable({"config": self.config, "version": self.version, "stages": self.stages,
                         "wall_times": self.wall_times, "summary": self.summary, "files": self.files,
                         "error": self.error})

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(config=d["config"], version=d["version"], stages=d.get("stages", {}),
                   wall_times=d.get("wall_times", {}), summary=d.get("summary", {}),
                   files=d.get("files", {}), error=d.get("error"))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def write_manifest(m, path):
    with open(path, "w") as fh:
        fh.write(m.dumps())


def read_manifest(path):
    with open(path) as fh:
        return RunManifest.loads(fh.read())


def grid_from(spec):
    return build_grid(spec["r_max"], spec["z_max"], spec["n_r"], spec["n_z"])


def spectrum_summary(sp):
    return {"eigenvalues": sp.eigenvalues.tolist(), "dim_minus": sp.dim_minus, "gap": sp.gap,
            "zero_tol": sp.zero_tol, "condition_V": True, "computed": sp.computed.tolist(),
            "grid": list(sp.op.grid.grid_id)}


def ground_options(config, S_hat):
    tol = config.tolerances
    return GroundStateOptions(tol=tol["outer"], fiber_tol=tol["fiber"], n_random=config.starts,
                              seed=config.seed, S_hat=S_hat)


def sobolev_options(config):
    s = config.sobolev
    return SobolevOptions(tol=config.tolerances["sobolev"], max_iter=s["max_iter"],
                          pin_radius=s["pin_radius"], n_random=s["n_random"], seed=config.seed)


def lift_report(u, params, seed=0):
    """Residuals of the lifted field at a probe cloud inside the grid."""
    probes = default_probes(u.grid, seed=seed)
    I, J = energy_equivalence(u, params)
    return {
        "probes": int(len(probes)),
        "divergence": divergence_residual(u, probes),
        "curlcurl": curlcurl_residual(u, params.operator.potential, params.p, probes),
        "energy_vector": I,
        "energy_scalar": J,
        "energy_gap": abs(I - J) / max(abs(J), 1e-300),
        "norm_p": transported_norm(u, params.p),
        "scalar_norm_p": _grid.integrate_power(u, params.p),
        "norm_6": transported_norm(u, 6),
        "scalar_norm_6": _grid.integrate_power(u, 6),
    }


class _Stages:
    def __init__(self, manifest):
        self.m = manifest

    def run(self, name, func):
        t0 = time.perf_counter()
        try:
            out = func()
        except Exception as exc:
            exc.stage = name
            self.m.error = {"stage": name, "type": type(exc).__name__, "message": str(exc)}
            raise
        finally:
            self.m.wall_times[name] = time.perf_counter() - t0
        return out


def run_pipeline(config, write=True):
    """Run every stage for ``config``; returns the manifest.

    With ``write`` the manifest and the field dumps (Phi, ground state) are
    stored under ``config.output_dir``. On failure the partial manifest is
    written before the exception propagates.
    """
    m = RunManifest(config=config.to_dict(), version=__version__)
    st = _Stages(m)
    out = config.output_dir
    fields = {}
    try:
        g = st.run("grid", lambda: grid_from(config.grid))
        op = st.run("assemble", lambda: assemble(g, Potential.from_spec(config.potential)))
        sp = st.run("spectrum", lambda: split(op, config.tolerances.get("zero")))
        m.stages["spectrum"] = spectrum_summary(sp)
        params = st.run("regime", lambda: EnergyParams(config.p, op, sp))

        sob = st.run("sobolev", lambda: solve_sobolev(grid_from(config.sobolev["grid"]), sobolev_options(config)))
        m.stages["sobolev"] = sob.summary()
        fields["Phi"] = sob.Phi

        gs = st.run("ground", lambda: minimize_on_manifold(params, ground_options(config, sob.S_hat)))
        m.stages["ground"] = gs.summary()
        fields["ground"] = gs.u

        m.stages["lift"] = st.run("lift", lambda: lift_report(gs.u, params, config.seed))

        if config.threshold_grid is None:
            tparams = params
        else:
            def _tsplit():
                top = assemble(grid_from(config.threshold_grid), Potential.from_spec(config.potential))
                return EnergyParams(config.p, top, split(top, config.tolerances.get("zero")))
            tparams = st.run("threshold_spectrum", _tsplit)
        rep = st.run("lemma22", lambda: lemma22_report(sob.Phi, tparams.split, config.eps_ladder, sob.S_hat))
        m.stages["lemma22"] = rep.to_dict()
        lad = st.run("threshold", lambda: threshold_ladder(tparams, sob.Phi, sob.S_hat, config.eps_ladder,
                                                           config.tolerances["fiber"]))
        m.stages["threshold"] = lad.to_dict()

        m.summary = {
            "sobolev_identity": sob.identity_gap <= 1e-6,
            "ground_nehari": gs.nehari_residual <= 1e-8,
            "ground_pde": gs.pde_residual <= 1e-6,
            "ground_below_threshold": bool(gs.threshold_margin > 0),
            "lift_energy": m.stages["lift"]["energy_gap"] <= 1e-8,
            "lemma22": rep.passed,
            "threshold_certified": lad.all_certified,
        }
        m.summary["passed"] = all(m.summary.values())
    finally:
        if write:
            os.makedirs(out, exist_ok=True)
            for name, u in fields.items():
                write_field(u, os.path.join(out, f"{name}.axifield"))
                m.files[name] = f"{name}.axifield"
            write_manifest(m, os.path.join(out, "manifest.json"))
    return m
