"""Command-line front end.

Exit codes: 0 ok, 2 malformed input, 3 infeasible, 4 internal invariant breach.
Failures print one JSON object on standard error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import cli_io
from .core_types import Role
from .dcr_planner import PlannerOptions
from .errors import AeromeshError, Infeasible, NoOrientation, ParseError, ScenarioInvalid
from .formats import config_from_dict, config_to_dict, dumps, loads, sessions_from_config_dict
from .link_model import default_params, fit_params, load_anchors
from .migration_planner import verify_plan
from .routing_eval import evaluate
from .simulator import plan_transition, run

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


def _emit(text: str, out_dir: str | None, name: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        fh.write(text)


def _pretty(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _scenario(args):
    scn = cli_io.load_scenario(args.scenario)
    if args.model:
        scn.model = cli_io.load_model(args.model)
    if args.seed is not None:
        scn.seed = args.seed
    return scn


def cmd_plan(args) -> int:
    scn = _scenario(args)
    scn.validate()
    sessions, apps, gs = cli_io.static_instance(scn)
    table = cli_io.algorithms()
    cfg = table[args.algo](sessions, apps, gs, scn.model, PlannerOptions(relay_radios=scn.relay_radios))
    _emit(_pretty(config_to_dict(cfg, sessions)), args.out, f"{scn.id}.config.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scn = _scenario(args)
    if args.tick is not None:
        scn.tick = args.tick
    trace, metrics = run(scn)
    if args.out is None:
        sys.stdout.write(cli_io.trace_lines(trace))
        sys.stdout.write(dumps({"metrics": metrics.to_dict()}) + "\n")
    else:
        _emit(cli_io.trace_lines(trace), args.out, f"{scn.id}.trace.jsonl")
        _emit(_pretty(metrics.to_dict()), args.out, f"{scn.id}.metrics.json")
    return EXIT_OK


def _read_config(path: str):
    with open(path) as fh:
        obj = loads(fh.read(), path)
    return config_from_dict(obj), sessions_from_config_dict(obj)


def cmd_migrate(args) -> int:
    old, _ = _read_config(args.old)
    new, _ = _read_config(args.new)
    stations = old.by_role(Role.GROUND_STATION) or new.by_role(Role.GROUND_STATION)
    if not stations:
        raise ParseError("configs hold no ground-station UAV", "$.uavs")
    counter = iter(range(10 ** 9))
    _, mplan, affected = plan_transition(old, new, stations[0].pos, lambda: f"launch{next(counter)}",
                                         args.d_min, args.dz, args.speed)
    if not verify_plan(mplan, args.d_min, 0.1):
        raise AssertionError("migration plan violates the separation it was built for")
    out = {
        "makespan_s": mplan.makespan,
        "phases_s": [list(ph) for ph in mplan.phases],
        "affected_sessions": sorted(affected),
        "legs": [{"uav": l.uav, "from": list(l.old), "to": list(l.new), "layer": l.layer,
                  "altitude_m": l.altitude} for l in mplan.assignments],
    }
    _emit(_pretty(out), args.out, "migration.json")
    return EXIT_OK


def _scenario_paths(items: list[str]) -> list[str]:
    paths = []
    for item in items:
        if os.path.isdir(item):
            paths.extend(os.path.join(item, f) for f in sorted(os.listdir(item)) if f.endswith(".scenario.json"))
        else:
            paths.append(item)
    return paths


def cmd_compare(args) -> int:
    scenarios = []
    for path in _scenario_paths(args.scenarios):
        scn = cli_io.load_scenario(path)
        if args.model:
            scn.model = cli_io.load_model(args.model)
        scn.validate()
        scenarios.append(scn)
    rows = cli_io.compare(scenarios, args.algo or None)
    _emit(cli_io.metrics_csv(rows), args.out, "metrics.csv")
    return EXIT_OK


def cmd_generate(args) -> int:
    model = cli_io.load_model(args.model) if args.model else None
    seed = 0 if args.seed is None else args.seed
    scenarios = cli_io.generate_zones(args.zones, args.apps, args.runs, seed, args.radius, model)
    if args.out is None:
        for scn in scenarios:
            sys.stdout.write(cli_io.dump_scenario(scn))
    else:
        for scn in scenarios:
            _emit(cli_io.dump_scenario(scn), args.out, f"{scn.id}.scenario.json")
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        samples = load_anchors(args.anchors)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad anchor table: {e}", "$.anchors") from None
    p = fit_params(samples)
    _emit(_pretty(cli_io.model_to_dict(p)), args.out, "model.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg, sessions = _read_config(args.config)
    model = cli_io.load_model(args.model) if args.model else default_params()
    report = evaluate(cfg, sessions, model)
    out = {
        "min_lambda": report.min_lambda,
        "satisfaction": report.satisfaction(),
        "per_session_lambda": dict(sorted(report.per_session_lambda.items())),
        "violations": [{"kind": v.kind, "detail": v.detail} for v in report.violations],
    }
    _emit(_pretty(out), args.out, "evaluation.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aeromesh", description="Plan and replay UAV mmWave backhaul deployments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--seed", type=int, default=None, help="seed recorded in (or used for) the run")
        p.add_argument("--model", default=None, help="link-model parameter file overriding the scenario's")
        p.add_argument("--out", default=None, help="output directory (default: standard output)")
        if scenario:
            p.add_argument("scenario", help="scenario file")

    p = sub.add_parser("plan", help="scenario -> configuration dump")
    common(p)
    p.add_argument("--algo", default="dcr", choices=sorted(cli_io.algorithms()))
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="scenario -> trace and metrics")
    common(p)
    p.add_argument("--tick", type=float, default=None, help="tick length in seconds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("migrate", help="old and new configuration -> migration plan")
    common(p, scenario=False)
    p.add_argument("old")
    p.add_argument("new")
    p.add_argument("--d-min", type=float, default=5.0, help="minimum separation in metres")
    p.add_argument("--dz", type=float, default=10.0, help="altitude layer spacing in metres")
    p.add_argument("--speed", type=float, default=5.0, help="UAV speed in m/s")
    p.set_defaults(func=cmd_migrate)

    p = sub.add_parser("compare", help="scenario set x planners -> metrics CSV")
    common(p, scenario=False)
    p.add_argument("scenarios", nargs="+", help="scenario files or directories of *.scenario.json")
    p.add_argument("--algo", action="append", choices=sorted(cli_io.algorithms()),
                   help="planner to include (repeatable; default all)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="synthetic zone scenarios")
    common(p, scenario=False)
    p.add_argument("--zones", type=int, default=14)
    p.add_argument("--apps", type=int, default=5, choices=(5, 10, 20))
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--radius", type=float, default=1000.0, help="zone radius in metres")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="anchor table -> link-model parameters")
    common(p, scenario=False)
    p.add_argument("anchors", help="anchor table JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="replay a configuration dump through the referee")
    common(p, scenario=False)
    p.add_argument("config", help="configuration dump with sessions")
    p.set_defaults(func=cmd_evaluate)
    return ap


def _fail(code: int, kind: str, message: str, path: str | None = None) -> int:
    err = {"error": kind, "message": message}
    if path is not None:
        err["path"] = path
    sys.stderr.write(dumps(err) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        return _fail(EXIT_PARSE, "ParseError", e.message, e.path)
    except ScenarioInvalid as e:
        return _fail(EXIT_PARSE, "ScenarioInvalid", str(e))
    except OSError as e:
        return _fail(EXIT_PARSE, "FileError", str(e))
    except (Infeasible, NoOrientation) as e:
        return _fail(EXIT_INFEASIBLE, type(e).__name__, str(e))
    except (AeromeshError, AssertionError) as e:
        return _fail(EXIT_INTERNAL, type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
