from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from typing import Dict, List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from src.cli.output import header_comment, write_records
from src.cli.runner import (
    BOUND_NAMES,
    NUMERICAL_ERRORS,
    CliConfigError,
    PointFailure,
    SweepRequest,
    default_jobs,
    make_request,
    run_sweep,
)
from src.cli.selftest import run_selftest, selftest_exit_code
from src.core.config import settings
from src.core.logger import setup_logger
from src.core.utils import parse_key_value, parse_number, parse_value_list
from src.optimize.types import OptimizeConfig
from src.scenarios.config_file import load_config_file
from src.scenarios.registry import get_registry
from src.scenarios.types import SCENARIO_IDS, ScenarioError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# Keys of a config file that configure the run rather than the scenario.
RUN_KEYS = {"scenario", "seed", "grid_points"}

DEFAULT_BOUNDS = {"run": "int,sup", "sweep": "int,sup", "optimize": "opt_int"}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", choices=SCENARIO_IDS, help="Scenario id")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="Scenario parameter (repeatable)")
    common.add_argument("--tau", help="Evolution time (accepts expressions such as 4*pi/3)")
    common.add_argument("--config", metavar="PATH", help="Plain-text key = value config file")
    common.add_argument("--bounds", help=f"Comma list from {{{', '.join(BOUND_NAMES)}}}")
    common.add_argument("--p", default="1", help="Norm exponent p in [1, inf]")
    common.add_argument("--w-index", type=int, default=1, help="Indicator weight index j (1-based)")
    common.add_argument("--basis", default="canonical", help="canonical | energy | delta_diag | haar:SEED | file:PATH")
    common.add_argument("--grid-points", type=int, help="Time grid size")
    common.add_argument("--seed", type=int, help="Random seed (default from settings)")
    common.add_argument("--jobs", type=int, help="Worker processes (default: available cores)")
    common.add_argument("--format", choices=("csv", "jsonl"), default=None, help="Output format")
    common.add_argument("--out", metavar="PATH", help="Output file (default: stdout)")
    common.add_argument("--no-timing", action="store_true", help="Omit the wall-time column")
    common.add_argument("--basis-samples", type=int, help="Haar samples for the optimizers")
    common.add_argument("--hillclimb-iters", type=int, help="Hill-climb iterations for the optimizers")
    common.add_argument("--log-level", default=None, help="Logging level (default from settings)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsl-toolkit", description="Quantum speed limit bounds for finite-dimensional dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    sub.add_parser("run", parents=[common], help="Evaluate bounds at a single evolution time")
    sweep = sub.add_parser("sweep", parents=[common], help="Evaluate bounds over a parameter axis")
    sweep.add_argument("--axis", required=True, help="Scenario parameter to sweep")
    sweep.add_argument("--values", required=True, help="Comma list or start:stop:count")
    sub.add_parser("optimize", parents=[common], help="Optimize the bound over p, weights and basis")

    selftest = sub.add_parser("selftest", help="Run the invariant and acceptance checks")
    selftest.add_argument("--quick", action="store_true", help="Skip the long-running checks")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--only", action="append", help="Run only the named check (repeatable)")
    selftest.add_argument("--tolerance-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    selftest.add_argument("--log-level", default=None)
    return parser


def _number(text: str, what: str) -> float:
    try:
        return parse_number(text)
    except ValueError as exc:
        raise CliConfigError(f"Invalid {what}: {text!r}", operation="args", cause=exc) from exc


def _integer(value: object, what: str) -> int:
    try:
        return int(str(value).strip())
    except ValueError as exc:
        raise CliConfigError(f"Invalid {what}: {value!r}", operation="args", cause=exc) from exc


def _collect_params(args: argparse.Namespace) -> tuple[Optional[str], Dict[str, float], Dict[str, str]]:
    """Scenario id, scenario params and run keys; precedence: config file < --param < --tau."""
    raw: Dict[str, str] = {}
    if args.config:
        raw.update(load_config_file(args.config))
    for item in args.param:
        try:
            key, value = parse_key_value(item)
        except ValueError as exc:
            raise CliConfigError(str(exc), operation="args", cause=exc) from exc
        raw[key] = value
    if args.tau is not None:
        raw["tau"] = args.tau

    run_keys = {k: raw.pop(k) for k in list(raw) if k in RUN_KEYS}
    scenario = args.scenario or run_keys.get("scenario")
    params = {key: _number(value, f"value for {key}") for key, value in raw.items()}
    return scenario, params, run_keys


def request_from_args(args: argparse.Namespace) -> SweepRequest:
    scenario, params, run_keys = _collect_params(args)
    if not scenario:
        raise CliConfigError("--scenario is required (or 'scenario = ...' in the config file)", operation="args")
    registry = get_registry()
    preset = registry.get(scenario)

    seed = args.seed if args.seed is not None else _integer(run_keys.get("seed", settings.DEFAULT_SEED), "seed")
    grid_points = args.grid_points or _integer(run_keys.get("grid_points", settings.DEFAULT_GRID_POINTS), "grid_points")
    cfg = registry.make_config(scenario, params, grid_points=grid_points, seed=seed)

    if args.command == "sweep":
        axis = args.axis
        try:
            values = parse_value_list(args.values)
        except ValueError as exc:
            raise CliConfigError(str(exc), operation="args", cause=exc) from exc
    else:
        axis = "tau"
        tau = params.get("tau", preset.defaults.get("tau"))
        if tau is None:
            raise CliConfigError(f"--tau is required for {scenario}", operation="args")
        values = [tau]

    bounds_text = args.bounds if args.bounds is not None else DEFAULT_BOUNDS[args.command]
    bounds = [item.strip() for item in bounds_text.split(",") if item.strip()]
    unknown = [b for b in bounds if b not in BOUND_NAMES]
    if unknown:
        raise CliConfigError(f"Unknown bound(s): {', '.join(unknown)}", operation="args")

    overrides = {"seed": seed}
    if args.basis_samples is not None:
        overrides["basis_samples"] = args.basis_samples
    if args.hillclimb_iters is not None:
        overrides["hillclimb_iters"] = args.hillclimb_iters
    try:
        optimize = OptimizeConfig(**overrides)
    except ValidationError as exc:
        raise CliConfigError(f"Invalid optimizer settings: {exc.errors()[0].get('msg')}", operation="args", cause=exc) from exc

    return make_request(
        scenario=cfg,
        axis=axis,
        values=values,
        bounds=bounds,
        p=_number(args.p, "p"),
        w_index=args.w_index,
        basis=args.basis,
        optimize=optimize,
        timing=not args.no_timing,
    )


def _emit(request: SweepRequest, records, args: argparse.Namespace) -> None:
    fmt = args.format or settings.OUTPUT_FORMAT
    comment = header_comment(request.scenario.id, request.scenario.seed, axis=request.axis)
    target = open(args.out, "w", encoding="utf-8", newline="") if args.out else nullcontext(sys.stdout)
    try:
        with target as stream:
            count = write_records(records, stream, fmt, comment=comment, timing=request.timing)
    except OSError as exc:
        raise CliConfigError(f"Cannot write output: {exc}", operation="output", cause=exc) from exc
    logger.info("Wrote %s record(s) as %s", count, fmt)


def _fail(code: int, message: str) -> int:
    sys.stderr.write("error: " + " ".join(str(message).split()) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        setup_logger("src", args.log_level or settings.LOG_LEVEL)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))

    if args.command == "selftest":
        results = run_selftest(tolerance_scale=args.tolerance_scale, quick=args.quick, seed=args.seed, only=args.only, stream=sys.stdout)
        failed = sum(1 for r in results if r.failed)
        soft = sum(1 for r in results if r.status == "SOFT")
        sys.stdout.write(f"{len(results) - failed - soft} passed, {failed} failed, {soft} soft\n")
        return selftest_exit_code(results)

    try:
        request = request_from_args(args)
        jobs = args.jobs if args.jobs is not None else default_jobs()
        records = run_sweep(request, jobs)
        _emit(request, records, args)
    except (CliConfigError, ScenarioError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except ValidationError as exc:
        return _fail(EXIT_CONFIG, str(exc.errors()[0].get("msg")))
    except PointFailure as exc:
        return _fail(exc.exit_code, exc.message)
    except NUMERICAL_ERRORS as exc:
        return _fail(EXIT_NUMERICAL, str(exc))
    return EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))


if __name__ == "__main__":
    run_cli()
