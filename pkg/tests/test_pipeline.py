import pytest

from curlground.config import from_dict
from curlground.errors import RegimeError
from curlground.fieldio import read_field
from curlground.pipeline import RunManifest, jsonable, read_manifest, run_pipeline

from conftest import INDEFINITE


def small_config(out, potential=None, p=3.0):
    return from_dict({
        "grid": {"r_max": 3, "z_max": 3, "n_r": 48, "n_z": 97},
        "potential": potential or {"kind": "constant", "value": 0.0},
        "p": p,
        "sobolev": {"grid": {"r_max": 4, "z_max": 4, "n_r": 64, "n_z": 129}},
        "eps_ladder": [0.6, 0.5, 0.42, 0.35, 0.3],
        "starts": 0,
        "output_dir": str(out),
    })


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    return (run_pipeline(small_config(a)), a), (run_pipeline(small_config(b)), b)


def test_pipeline_completes(runs):
    (m, out), _ = runs
    assert m.error is None
    assert set(m.stages) == {"spectrum", "sobolev", "ground", "lift", "lemma22", "threshold"}
    assert list(m.wall_times) == ["grid", "assemble", "spectrum", "regime", "sobolev", "ground", "lift",
                                  "lemma22", "threshold"]
    s = m.summary
    assert s["sobolev_identity"] and s["ground_nehari"] and s["ground_pde"] and s["ground_below_threshold"]
    assert s["lift_energy"] and s["threshold_certified"]
    assert m.stages["spectrum"]["dim_minus"] == 0
    assert m.files == {"Phi": "Phi.axifield", "ground": "ground.axifield"}
    u = read_field(out / "ground.axifield")
    assert u.grid.grid_id == (3.0, 3.0, 48, 97)


def test_manifest_round_trip(runs):
    (m, out), _ = runs
    disk = read_manifest(out / "manifest.json")
    assert disk.to_dict() == m.to_dict()
    assert RunManifest.loads(m.dumps()).dumps() == m.dumps()


def test_runs_are_reproducible(runs):
    (a, _), (b, _) = runs
    da, db = a.to_dict(), b.to_dict()
    for d in (da, db):
        d.pop("wall_times")
        d["config"].pop("output_dir")
    assert da == db


def test_regime_violation_stops_at_regime(tmp_path):
    with pytest.raises(RegimeError) as info:
        run_pipeline(small_config(tmp_path, INDEFINITE, 3.0))
    assert info.value.stage == "regime"
    m = read_manifest(tmp_path / "manifest.json")
    assert m.error["stage"] == "regime" and m.error["type"] == "RegimeError"
    assert m.stages["spectrum"]["dim_minus"] == 2 and "ground" not in m.stages


def test_jsonable():
    import numpy as np

    out = jsonable({"a": np.float64(np.nan), "b": np.arange(3), "c": (np.bool_(True), np.int32(4))})
    assert out == {"a": None, "b": [0, 1, 2], "c": [True, 4]}
