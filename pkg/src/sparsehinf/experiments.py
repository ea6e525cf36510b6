"""Config-driven experiment runner writing CSV tables and JSON summaries.

CSV files carry no timings, so reruns with the same configuration produce
identical bytes; wall times and timestamps live in the JSON summary.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, GenerationError, InvalidInputError, SparseHinfError
from .generators import (consensus_deviation, gen_chain, gen_consensus, gen_er_random,
                         gen_example1, petersen_graph)
from .hinf import hinf_norm
from .ksparse import DEFAULT_BUDGET, check_ordering, sandwich
from .linalg import spectral_radius
from .synthesis import evaluate_controller, synthesize, table1_plant

ANALYSIS_COLUMNS = ("system", "n", "m", "k", "mode", "lower", "exact", "upper", "gap",
                    "hinf", "ratio", "channels_round", "channels_exact", "error")
SYNTHESIS_COLUMNS = ("design_k", "bound", "eval_k", "value", "error")

DEFAULTS = {
    "example1_gap": {"k": 5, "n_min": 5, "n_max": 30, "tol": 1e-8},
    "chain": {"n": 5, "a": 0.8, "p": 0.1, "k_min": 1, "k_max": 5, "with_exact": True,
              "budget": DEFAULT_BUDGET, "tol": 1e-8},
    "er_random": {"n": 20, "p_edge": 0.1, "seeds": 20, "first_seed": 0, "b_scale": 0.1,
                  "k_min": 1, "k_max": 10, "exact_k_max": 5, "budget": DEFAULT_BUDGET,
                  "tol": 1e-8},
    "petersen_max_degree": {"k_min": 1, "k_max": 10, "with_exact": True,
                            "budget": DEFAULT_BUDGET, "tol": 1e-8},
    "petersen_fastest": {"k_min": 1, "k_max": 10, "with_exact": True,
                         "budget": DEFAULT_BUDGET, "tol": 1e-8},
    "synthesis_table": {"design_k": [1, 2, 3, 6], "eval_k": [1, 2, 3],
                        "budget": DEFAULT_BUDGET, "tol": 1e-8},
}
EXPERIMENTS = tuple(DEFAULTS)


def _coerce(name: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise InvalidInputError(f"parameter {name!r} must be true or false")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                                  for v in value):
            raise InvalidInputError(f"parameter {name!r} must be a list of integers")
        return list(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise InvalidInputError(f"parameter {name!r} must be an integer")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InvalidInputError(f"parameter {name!r} must be a finite number")
    return float(value)


@dataclass
class ExperimentConfig:
    """Experiment name, parameter overrides and output directory."""

    experiment: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "results"

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}; "
                                    f"choose from {', '.join(EXPERIMENTS)}")
        defaults = DEFAULTS[self.experiment]
        for key in self.parameters:
            if key not in defaults:
                raise InvalidInputError(f"unknown parameter {key!r} for {self.experiment}")
        merged = dict(defaults)
        for key, value in self.parameters.items():
            merged[key] = _coerce(key, value, defaults[key])
        _check_ranges(self.experiment, merged)
        self.parameters = merged

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InvalidInputError("configuration must be a JSON object")
        unknown = set(data) - {"experiment", "parameters", "output_dir"}
        if unknown:
            raise InvalidInputError(f"unknown configuration key {sorted(unknown)[0]!r}")
        if "experiment" not in data:
            raise InvalidInputError("configuration lacks 'experiment'")
        return cls(data["experiment"], dict(data.get("parameters", {})),
                   str(data.get("output_dir", "results")))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _check_ranges(name: str, p: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise InvalidInputError(f"{name}: {msg}")

    if "tol" in p:
        need(0 < p["tol"] < 1, "tol must lie in (0, 1)")
    if "budget" in p:
        need(p["budget"] >= 1, "budget must be positive")
    if "k_min" in p:
        need(1 <= p["k_min"] <= p["k_max"], "need 1 <= k_min <= k_max")
    if name == "example1_gap":
        need(p["k"] >= 1 and 2 <= p["n_min"] <= p["n_max"], "need k >= 1 and 2 <= n_min <= n_max")
        need(p["k"] <= p["n_min"], "k must not exceed n_min")
    elif name == "chain":
        need(p["n"] >= 1 and p["k_max"] <= 2 * p["n"] + 1, "need n >= 1 and k_max <= 2n+1")
    elif name == "er_random":
        need(p["n"] >= 1 and 0 <= p["p_edge"] <= 1, "need n >= 1 and 0 <= p_edge <= 1")
        need(p["seeds"] >= 1 and p["k_max"] <= p["n"], "need seeds >= 1 and k_max <= n")
        need(p["b_scale"] > 0, "b_scale must be positive")
    elif name.startswith("petersen"):
        need(p["k_max"] <= 10, "k_max must not exceed 10")
    elif name == "synthesis_table":
        need(p["design_k"] and p["eval_k"], "design_k and eval_k must be nonempty")
        need(all(1 <= k <= 6 for k in p["design_k"] + p["eval_k"]), "k values must lie in 1..6")


@dataclass
class ExperimentReport:
    """CSV rows plus per-row timing records and summary statistics."""

    experiment: str
    columns: tuple
    rows: list
    records: list
    summary: dict
    parameters: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({c: _cell(row.get(c)) for c in self.columns})
        return buf.getvalue()

    def summary_json(self) -> dict:
        return {"experiment": self.experiment, "parameters": self.parameters,
                "columns": list(self.columns), "summary": self.summary,
                "records": self.records,
                "created": datetime.now(timezone.utc).isoformat(timespec="seconds")}

    def write(self, output_dir) -> tuple[Path, Path]:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.experiment}.csv"
        json_path = out / f"{self.experiment}.json"
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps(self.summary_json(), indent=2, default=_jsonable))
        return csv_path, json_path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (tuple, list)):
        return " ".join(str(int(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _analysis_row(label: str, sys, k: int, p: dict, with_exact: bool, hinf: float) -> dict:
    row = {"system": label, "n": sys.n, "m": sys.m, "k": k, "mode": "max", "hinf": hinf}
    try:
        res = sandwich(sys, k, "max", with_exact=with_exact, budget=p.get("budget", DEFAULT_BUDGET), tol=p["tol"])
        check_ordering(res)
    except ConsistencyError as exc:
        row["error"] = f"ordering: {exc}"
        return row
    except SparseHinfError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(lower=res.lower, exact=res.exact, upper=res.upper, gap=res.upper - res.lower,
               ratio=res.upper / hinf if hinf > 0 else None,
               channels_round=res.channels_round, channels_exact=res.channels_exact)
    return row


def _sweep(systems, p: dict, exact_k_max: int | None = None):
    rows, records = [], []
    for label, sys, ks in systems:
        hinf = hinf_norm(sys).value
        for k in ks:
            with_exact = p.get("with_exact", True) and (exact_k_max is None or k <= exact_k_max)
            t0 = time.perf_counter()
            row = _analysis_row(label, sys, k, p, with_exact, hinf)
            rows.append(row)
            records.append({"inputs": {"system": label, "k": k},
                            **{c: row.get(c) for c in ("lower", "exact", "upper", "gap")},
                            "channels": row.get("channels_round"), "error": row.get("error"),
                            "wall_time": time.perf_counter() - t0})
    return rows, records


def _krange(p):
    return range(p["k_min"], p["k_max"] + 1)


def _run_example1(p):
    systems = [(f"example1_n{n}", gen_example1(n), [p["k"]])
               for n in range(p["n_min"], p["n_max"] + 1)]
    rows, records = _sweep(systems, {**p, "with_exact": False})
    return rows, records, {"ratios": {r["n"]: r.get("ratio") for r in rows}}


def _run_chain(p):
    sys = gen_chain(p["n"], p["a"], p["p"])
    rows, records = _sweep([(f"chain_n{p['n']}", sys, _krange(p))], p)
    agree = [r for r in rows if r.get("exact") is not None]
    return rows, records, {
        "rounding_equals_exact": sum(abs(r["lower"] - r["exact"]) <= 1e-6 * (1 + r["exact"])
                                     for r in agree),
        "compared": len(agree)}


def _run_er(p):
    systems, failed = [], []
    for seed in range(p["first_seed"], p["first_seed"] + p["seeds"]):
        try:
            sys = gen_er_random(p["n"], p["p_edge"], seed, p["b_scale"])
        except GenerationError as exc:
            failed.append({"system": f"er_seed{seed}", "error": f"GenerationError: {exc}"})
            continue
        systems.append((f"er_seed{seed}", sys, _krange(p)))
    rows, records = _sweep(systems, p, exact_k_max=p["exact_k_max"])
    rows += failed
    records += [{"inputs": {"system": r["system"]}, "error": r["error"]} for r in failed]
    per_k = {}
    for k in _krange(p):
        ok = [r for r in rows if r.get("k") == k and not r.get("error")]
        entry = {"runs": len(ok),
                 "mean_lower": float(np.mean([r["lower"] for r in ok])) if ok else None,
                 "mean_upper": float(np.mean([r["upper"] for r in ok])) if ok else None}
        ex = [r for r in ok if r.get("exact") is not None]
        if ex:
            entry["mean_exact"] = float(np.mean([r["exact"] for r in ex]))
        per_k[k] = entry
    compared = [r for r in rows if r.get("exact") is not None]
    agree = sum(abs(r["lower"] - r["exact"]) <= 1e-6 * (1 + r["exact"]) for r in compared)
    return rows, records, {"per_k": per_k, "rounding_equals_exact": agree,
                           "compared": len(compared),
                           "agreement_fraction": agree / len(compared) if compared else None}


def _run_petersen(rule):
    def runner(p):
        net = gen_consensus(petersen_graph(), rule)
        sys = consensus_deviation(net)
        rows, records = _sweep([(f"petersen_{rule}", sys, _krange(p))], p)
        return rows, records, {"rho": spectral_radius(net.A - np.full((10, 10), 0.1))}
    return runner


def _run_synthesis(p):
    plant = table1_plant()
    rows, records = [], []
    table = {}
    for dk in p["design_k"]:
        t0 = time.perf_counter()
        try:
            res = synthesize(plant, dk, tol=p["tol"])
            values = evaluate_controller(plant, res.controller, p["eval_k"], p["budget"])
        except SparseHinfError as exc:
            err = f"{type(exc).__name__}: {exc}"
            rows.append({"design_k": dk, "error": err})
            records.append({"inputs": {"design_k": dk}, "error": err,
                            "wall_time": time.perf_counter() - t0})
            continue
        for ek in list(p["eval_k"]) + ["hinf"]:
            rows.append({"design_k": dk, "bound": res.bound, "eval_k": ek, "value": values[ek]})
        table[dk] = {str(k): v for k, v in values.items()}
        records.append({"inputs": {"design_k": dk}, "bound": res.bound, "values": table[dk],
                        "attempts": res.attempts, "wall_time": time.perf_counter() - t0})
    return rows, records, {"table": table}


RUNNERS = {
    "example1_gap": _run_example1,
    "chain": _run_chain,
    "er_random": _run_er,
    "petersen_max_degree": _run_petersen("max_degree"),
    "petersen_fastest": _run_petersen("fastest_sdp"),
    "synthesis_table": _run_synthesis,
}


def run(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run one experiment; optionally write ``<name>.csv`` and ``<name>.json``."""
    p = config.parameters
    t0 = time.perf_counter()
    rows, records, summary = RUNNERS[config.experiment](p)
    summary["errors"] = sum(1 for r in rows if r.get("error"))
    summary["wall_time"] = time.perf_counter() - t0
    columns = SYNTHESIS_COLUMNS if config.experiment == "synthesis_table" else ANALYSIS_COLUMNS
    report = ExperimentReport(config.experiment, columns, rows, records, summary, dict(p))
    if write:
        report.write(config.output_dir)
    return report
