"""Command-line entry point: ``flexplan run`` and ``flexplan validate``.

Exit codes: 0 success, 2 bad arguments, 3 invalid instance, 4 solver failure.
Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from flexplan.dispatch import DispatchError, DispatchOptions, run_dispatch
from flexplan.formulation.common import present_uc_symbols
from flexplan.io import InstanceError, describe, load_instance
from flexplan.metrics import RunReport, compare_columns, compare_models, compute_metrics, rows_to_csv
from flexplan.milp import export_lp, fix_variables, relax_integrality
from flexplan.pipeline import MODEL_KINDS, SRPB, Stage1Error, run_stage1
from flexplan.system import SystemSpec, SystemValidationError, validate_system

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3, 4
MODEL_NAMES = {k.lower(): k for k in MODEL_KINDS}
SOLVER_ENV = "FLEXPLAN_SOLVER"


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    instance: str
    models: List[str] = field(default_factory=lambda: ["PB"])
    tau: Optional[int] = None  # None keeps the instance resolution
    gap: float = 1e-3
    time_limit: Optional[float] = None
    soc_floor: bool = False
    double_ramps: bool = False
    integer_storage: bool = False
    no_network_stage2: bool = False
    dump_lp: bool = False
    seed: int = 0
    out: str = "flexplan-out"
    solver: str = "highs"

    def __post_init__(self):
        if not self.models:
            raise UsageError("at least one model kind is required")
        if not 0.0 < self.gap <= 0.1:
            raise UsageError(f"gap must lie in (0, 0.1], got {self.gap}")
        if self.time_limit is not None and self.time_limit <= 0:
            raise UsageError("time limit must be positive")


def parse_models(text: str) -> List[str]:
    out = []
    for name in (p.strip().lower() for p in text.split(",") if p.strip()):
        if name not in MODEL_NAMES:
            raise UsageError(f"unknown model kind {name!r} (choose from {', '.join(MODEL_NAMES)})")
        if MODEL_NAMES[name] not in out:
            out.append(MODEL_NAMES[name])
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flexplan", description="Capacity expansion with unit commitment and re-dispatch.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="plan, dispatch and report")
    run.add_argument("instance", help="instance directory or system.json")
    run.add_argument("--models", default="pb", help="comma list of eb, ebs, pb, sr-pb (default pb)")
    run.add_argument("--tau", type=int, default=None, help="sub-hourly step in minutes (default: instance)")
    run.add_argument("--gap", type=float, default=1e-3, help="relative MIP gap (default 0.001)")
    run.add_argument("--time-limit", type=float, default=None, help="per-model solver time limit [s]")
    run.add_argument("--soc-floor", action="store_true", help="hold stage-2 inventory at or above the plan")
    run.add_argument("--double-ramps", action="store_true", help="double thermal ramp capabilities")
    run.add_argument("--integer-storage", action="store_true", help="integer storage investment")
    run.add_argument("--no-network-stage2", action="store_true", help="drop line limits in stage 2")
    run.add_argument("--dump-lp", action="store_true", help="write stage-1 models in LP format")
    run.add_argument("--seed", type=int, default=0, help="solver random seed")
    run.add_argument("--out", default="flexplan-out", help="output directory")
    val = sub.add_parser("validate", help="check an instance and print its size")
    val.add_argument("instance")
    return parser


def _fail(code: int, kind: str, message: str, **extra) -> int:
    doc = {"error": kind, "exit_code": code, "message": message}
    doc.update(extra)
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def load_and_validate(path: str, tau: Optional[int] = None) -> SystemSpec:
    spec = load_instance(path)
    if tau is not None:
        spec = spec.with_resolution(tau)
    return validate_system(spec)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _series_rows(dispatch) -> List[dict]:
    rows = []
    for sd in dispatch.scenarios:
        for kind, table in (("output", sd.output), ("charge", sd.charge), ("soc", sd.soc),
                            ("available", sd.available)):
            for asset in sorted(table):
                for n, v in enumerate(table[asset]):
                    rows.append({"scenario": sd.scenario, "quantity": kind, "asset": asset,
                                 "step": n, "value": float(v)})
    return rows


def _dump_lp(sol, directory: Path) -> None:
    model = sol.context.model
    if sol.model_kind == SRPB:
        _write(directory / "stage1a.lp", export_lp(relax_integrality(model, present_uc_symbols(model))))
        plan = {("x", idx): v for idx, v in sol.family("x").items()}
        _write(directory / "stage1b.lp", export_lp(fix_variables(model, plan)))
    else:
        _write(directory / "stage1.lp", export_lp(model))


def run(config: RunConfig) -> RunReport:
    """Execute the configured runs and write the bundle; raises on failure."""
    spec = load_and_validate(config.instance, config.tau)
    if config.double_ramps:
        spec = spec.with_scaled_ramps(2.0)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": asdict(config), "instance": describe(spec), "tau_minutes": spec.grid.tau,
                "outputs": {}}
    options = DispatchOptions(soc_floor=config.soc_floor, network=not config.no_network_stage2)
    workers = min(len(spec.scenarios), os.cpu_count() or 1)
    report = RunReport()
    for kind in config.models:
        sol = run_stage1(spec, kind, gap=config.gap, time_limit=config.time_limit, tau=spec.grid.tau,
                         integer_storage=config.integer_storage, seed=config.seed, solver=config.solver)
        dispatch = run_dispatch(spec, sol, options, solver=config.solver, workers=workers)
        report.add(compute_metrics(spec, sol, dispatch))
        d = out / kind.lower()
        _write(d / "stage1.json", sol.to_json())
        _write(d / "stage1.csv", rows_to_csv([dict(zip(("symbol", "index", "value"), r)) for r in sol.rows()],
                                               ["symbol", "index", "value"]))
        _write(d / "dispatch_series.csv", rows_to_csv(_series_rows(dispatch),
                                                     ["scenario", "quantity", "asset", "step", "value"]))
        _write(d / "deviations.csv", rows_to_csv(dispatch.deviations))
        files = ["stage1.json", "stage1.csv", "dispatch_series.csv", "deviations.csv"]
        if config.dump_lp:
            _dump_lp(sol, d / "lp")
            files += sorted(f"lp/{p.name}" for p in (d / "lp").iterdir())
        manifest["outputs"][kind] = [f"{kind.lower()}/{f}" for f in files]
    _write(out / "report.csv", report.to_csv())
    _write(out / "report.json", report.to_json())
    _write(out / "compare.csv", rows_to_csv(compare_models(report), compare_columns(report)))
    if report.soc_series:
        _write(out / "soc_series.csv", rows_to_csv(report.soc_series))
    manifest["outputs"]["summary"] = ["report.csv", "report.json", "compare.csv"] + (
        ["soc_series.csv"] if report.soc_series else [])
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "validate":
            spec = load_and_validate(args.instance)
            print(f"OK, {describe(spec)}")
            return EXIT_OK
        config = RunConfig(args.instance, parse_models(args.models), args.tau, args.gap, args.time_limit,
                           args.soc_floor, args.double_ramps, args.integer_storage, args.no_network_stage2,
                           args.dump_lp, args.seed, args.out, os.environ.get(SOLVER_ENV, "highs"))
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except SystemValidationError as exc:
        return _fail(EXIT_INVALID, "validation", str(exc), errors=exc.errors)
    except InstanceError as exc:
        return _fail(EXIT_INVALID, "instance", str(exc))
    try:
        report = run(config)
    except SystemValidationError as exc:
        return _fail(EXIT_INVALID, "validation", str(exc), errors=exc.errors)
    except InstanceError as exc:
        return _fail(EXIT_INVALID, "instance", str(exc))
    except Stage1Error as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc), status=exc.status, binding=list(exc.binding))
    except DispatchError as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc))
    except ValueError as exc:
        if "adapter" in str(exc):
            return _fail(EXIT_USAGE, "usage", str(exc))
        raise
    print(f"wrote {len(report.rows)} report rows to {config.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
