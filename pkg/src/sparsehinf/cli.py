"""Command-line entry point ``sparsehinf``.

Exit codes: 0 success, 1 usage, 2 invalid or unstable input, 3 solver or
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (BudgetError, InvalidInputError, SparseHinfError, StabilityError)
from .experiments import EXPERIMENTS, ExperimentConfig, run
from .ksparse import (DEFAULT_BUDGET, MODES, build_dual_sdp, build_lower_sdp, build_upper_sdp,
                      duality_gap, exact_exhaustive, sandwich, check_ordering)
from .sdp import export_sdpa
from .statespace import load_system, require_valid
from .synthesis import evaluate_controller, load_plant, save_controller, synthesize

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(data: dict, out) -> None:
    text = json.dumps(data, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load(path):
    try:
        return require_valid(load_system(path))
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc


def _analyze(args, mode: str) -> None:
    system = _load(args.system)
    res = sandwich(system, args.k, mode, with_exact=False, budget=args.budget, tol=args.tol)
    try:
        res.channels_exact, res.exact = exact_exhaustive(system, args.k, mode, args.budget)
    except BudgetError:
        pass
    check_ordering(res)
    gap = duality_gap(system, args.k, args.tol) if args.certify and mode == "max" else None
    _emit(res.to_dict(gap), args.out)


def cmd_analyze(args) -> None:
    _analyze(args, args.mode)


def cmd_min_gain(args) -> None:
    _analyze(args, "min")


def cmd_synthesize(args) -> None:
    try:
        plant = load_plant(args.plant)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {args.plant}: {exc.strerror}") from exc
    res = synthesize(plant, args.k, tol=args.tol)
    eval_k = args.eval_k or sorted({1, 2, 3} & set(range(1, plant.m + 1)))
    table = evaluate_controller(plant, res.controller, eval_k, args.budget)
    meta = res.metadata()
    meta["evaluation"] = {str(k): v for k, v in table.items()}
    if args.out:
        save_controller(res.controller, args.out, meta)
    print(json.dumps(meta, indent=2))


def cmd_experiment(args) -> None:
    try:
        if args.config in EXPERIMENTS:
            data = {"experiment": args.config}
        else:
            data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"{args.config} is neither an experiment name nor a readable file") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise UsageError("configuration must be a JSON object")
    if args.seed is not None:
        data.setdefault("parameters", {})["first_seed"] = args.seed
    if args.out:
        data["output_dir"] = args.out
    try:
        config = ExperimentConfig.from_dict(data)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc
    report = run(config)
    print(json.dumps({"experiment": config.experiment, "output_dir": config.output_dir,
                      "rows": len(report.rows), "errors": report.summary["errors"]}))


def cmd_export_sdpa(args) -> None:
    system = _load(args.system)
    build = {"upper": build_upper_sdp, "lower": build_lower_sdp, "dual": build_dual_sdp}
    prog = build[args.program](system, args.k)
    text = export_sdpa(prog, comment=f"{args.program} relaxation, k={args.k}")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsehinf", description="k-sparse peak-gain analysis and synthesis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, k_required=True):
        p.add_argument("--k", type=int, required=k_required, help="number of active channels")
        p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="subset budget for the exhaustive search")
        p.add_argument("--out", help="output file")

    p = sub.add_parser("analyze", help="bracket the k-sparse peak gain of a system file")
    p.add_argument("system")
    common(p)
    p.add_argument("--mode", choices=MODES, default="max")
    p.add_argument("--certify", action="store_true", help="also report the duality gap")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("min-gain", help="bracket the k-sparse minimal gain")
    p.add_argument("system")
    common(p)
    p.add_argument("--certify", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_min_gain)

    p = sub.add_parser("synthesize", help="design a controller for a plant file")
    p.add_argument("plant")
    common(p)
    p.add_argument("--eval-k", type=int, nargs="+", help="k values for the evaluation table")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("experiment", help="run a named experiment or a JSON config")
    p.add_argument("config", help=f"one of {', '.join(EXPERIMENTS)} or a config file")
    p.add_argument("--seed", type=int, help="first seed (random experiments)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-sdpa", help="write a relaxation in SDPA sparse format")
    p.add_argument("system")
    common(p)
    p.add_argument("--program", choices=("upper", "lower", "dual"), default="upper")
    p.set_defaults(func=cmd_export_sdpa)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "tol", 1e-8) <= 0 or getattr(args, "budget", 1) < 1:
            raise UsageError("--tol and --budget must be positive")
        args.func(args)
    except UsageError as exc:
        print(f"sparsehinf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, StabilityError) as exc:
        print(f"sparsehinf: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SparseHinfError as exc:
        print(f"sparsehinf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
