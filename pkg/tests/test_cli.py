import json

import numpy as np
import pytest

from sparsehinf import StateSpace
from sparsehinf.cli import main
from sparsehinf.statespace import save_system
from sparsehinf.synthesis import table1_plant


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, sys in [("scalar", StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]])),
                      ("eye", StateSpace.static(np.eye(2))),
                      ("unstable", StateSpace([[1.5]], [[1.0]], [[1.0]], [[0.0]]))]:
        paths[name] = tmp_path / f"{name}.json"
        save_system(sys, paths[name])
    return paths


def test_analyze_full_support_collapses(files, tmp_path, capsys):
    out = tmp_path / "res.json"
    assert main(["analyze", str(files["scalar"]), "--k", "1", "--certify", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["lower"] == pytest.approx(res["upper"], rel=1e-5)
    assert res["duality_gap"] <= 1e-5
    assert set(res) == {"k", "mode", "lower", "exact", "upper", "channels_round",
                        "channels_exact", "duality_gap", "solver_iters"}


def test_min_mode_on_identity(files, capsys):
    assert main(["analyze", str(files["eye"]), "--k", "1", "--mode", "min"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["exact"] == pytest.approx(1.0)
    assert main(["min-gain", str(files["eye"]), "--k", "1"]) == 0


def _exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.mark.parametrize("argv, code", [
    (["analyze"], 1),
    (["analyze", "x.json"], 1),
    (["bogus"], 1),
    (["analyze", "missing.json", "--k", "1"], 2),
    (["analyze", "{unstable}", "--k", "1"], 2),
    (["analyze", "{scalar}", "--k", "3"], 2),
    (["analyze", "{scalar}", "--k", "1", "--tol", "-1"], 1),
    (["experiment", "nonesuch"], 1),
])
def test_exit_codes(files, argv, code, capsys):
    argv = [a.format(**{k: str(v) for k, v in files.items()}) for a in argv]
    assert _exit_code(argv) == code


def test_synthesize_writes_controller(tmp_path, capsys):
    plant = tmp_path / "plant.json"
    plant.write_text(json.dumps(table1_plant().to_dict()))
    out = tmp_path / "ctrl.json"
    assert main(["synthesize", str(plant), "--k", "1", "--out", str(out), "--eval-k", "1"]) == 0
    meta = json.loads(out.read_text())["metadata"]
    assert meta["k"] == 1 and meta["bound"] >= meta["evaluation"]["1"] - 1e-6


def test_synthesize_unstabilizable_exit_code(tmp_path, capsys):
    data = table1_plant().to_dict()
    data["A"] = np.diag([1.5, 0.5, 0.5]).tolist()
    data["B2"] = np.zeros((3, 3)).tolist()
    plant = tmp_path / "plant.json"
    plant.write_text(json.dumps(data))
    assert main(["synthesize", str(plant), "--k", "1"]) == 3
    assert "stage" in capsys.readouterr().err


def test_export_sdpa(files, tmp_path):
    out = tmp_path / "p.dat-s"
    assert main(["export-sdpa", str(files["scalar"]), "--k", "1", "--program", "dual",
                 "--out", str(out)]) == 0
    assert out.read_text().startswith('"dual')


def test_experiment_with_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "chain", "parameters": {"k_max": 1}}))
    assert main(["experiment", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "chain.csv").exists()
    cfg.write_text(json.dumps({"experiment": "chain", "parameters": {"wrong": 1}}))
    assert main(["experiment", str(cfg)]) == 1
    assert "wrong" in capsys.readouterr().err
