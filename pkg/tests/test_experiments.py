import json

import pytest

import sparsehinf.experiments as exps
from sparsehinf.errors import InvalidInputError
from sparsehinf.experiments import ExperimentConfig, run
from sparsehinf.ksparse import SandwichResult


@pytest.mark.parametrize("data, match", [
    ({"experiment": "chain", "parameters": {"bogus": 1}}, "bogus"),
    ({"experiment": "chain", "extra": 1}, "extra"),
    ({"experiment": "nonesuch"}, "unknown experiment"),
    ({"experiment": "chain", "parameters": {"n": 2.5}}, "integer"),
    ({"experiment": "chain", "parameters": {"k_min": 3, "k_max": 2}}, "k_min"),
    ({"experiment": "er_random", "parameters": {"p_edge": 1.5}}, "p_edge"),
    ({"experiment": "synthesis_table", "parameters": {"design_k": [0]}}, "1..6"),
    ({"parameters": {}}, "experiment"),
])
def test_config_rejections(data, match):
    with pytest.raises(InvalidInputError, match=match):
        ExperimentConfig.from_dict(data)


def test_config_defaults_merge():
    cfg = ExperimentConfig("chain", {"k_max": 2})
    assert cfg.parameters["k_max"] == 2 and cfg.parameters["a"] == 0.8


def test_chain_rerun_is_byte_identical(tmp_path):
    cfg = ExperimentConfig("chain", {"k_max": 2}, str(tmp_path / "a"))
    run(cfg)
    first = (tmp_path / "a" / "chain.csv").read_bytes()
    cfg.output_dir = str(tmp_path / "b")
    run(cfg)
    assert (tmp_path / "b" / "chain.csv").read_bytes() == first
    summary = json.loads((tmp_path / "a" / "chain.json").read_text())
    assert summary["summary"]["rounding_equals_exact"] == 2
    assert all("wall_time" in r for r in summary["records"])
    header = first.decode().splitlines()[0].split(",")
    assert tuple(header) == exps.ANALYSIS_COLUMNS


def test_example1_ratio_decreasing(tmp_path):
    rep = run(ExperimentConfig("example1_gap", {"n_min": 5, "n_max": 9}, str(tmp_path)))
    ratios = [r["ratio"] for r in rep.rows]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert ratios[0] == pytest.approx(1.0, abs=1e-6)


def test_ordering_violation_is_not_written(tmp_path, monkeypatch):
    def broken(sys, k, mode="max", **kw):
        return SandwichResult(lower=5.0, upper=1.0, channels_round=(0,), k=k, mode=mode)
    monkeypatch.setattr(exps, "sandwich", broken)
    rep = run(ExperimentConfig("chain", {"k_max": 1}, str(tmp_path)))
    row = rep.rows[0]
    assert row["error"].startswith("ordering")
    assert row.get("lower") is None and row.get("upper") is None


def test_generation_failure_recorded(tmp_path):
    cfg = ExperimentConfig("er_random", {"n": 6, "p_edge": 1.0, "seeds": 1, "k_max": 2,
                                         "b_scale": 1.0}, str(tmp_path))
    monkey = exps.gen_er_random
    try:
        exps.gen_er_random = lambda *a, **kw: monkey(*a, **kw, max_draws=2)
        rep = run(cfg)
    finally:
        exps.gen_er_random = monkey
    assert rep.summary["errors"] == 1
    assert "GenerationError" in rep.rows[0]["error"]


def test_er_random_small(tmp_path):
    cfg = ExperimentConfig("er_random", {"n": 6, "p_edge": 0.3, "seeds": 2, "k_max": 3,
                                         "exact_k_max": 2}, str(tmp_path))
    rep = run(cfg)
    assert rep.summary["errors"] == 0
    assert rep.summary["compared"] == 4
    for entry in rep.summary["per_k"].values():
        assert entry["mean_upper"] >= entry["mean_lower"]
    assert all(r["exact"] is None for r in rep.rows if r["k"] == 3)


def test_synthesis_table_layout(tmp_path):
    cfg = ExperimentConfig("synthesis_table", {"design_k": [1, 6], "eval_k": [1, 2]},
                           str(tmp_path))
    rep = run(cfg)
    assert [(r["design_k"], r["eval_k"]) for r in rep.rows] == [
        (1, 1), (1, 2), (1, "hinf"), (6, 1), (6, 2), (6, "hinf")]
    text = (tmp_path / "synthesis_table.csv").read_text().splitlines()
    assert text[0] == "design_k,bound,eval_k,value,error"
