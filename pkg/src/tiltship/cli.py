"""Command line interface: run scenarios, compute metrics, sweep parameters."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .harness import RunLog, Scenario, compute_metrics, run_scenario
from .params import default_params, load_params


def _resolve_scenario(name: str) -> Scenario:
    """Accept a file path or the stem of a bundled scenario."""
    path = Path(name)
    if path.exists():
        return Scenario.from_json(path)
    bundled = resources.files("tiltship").joinpath(f"scenarios/{name}.json")
    if bundled.is_file():
        return Scenario.from_dict(json.loads(bundled.read_text()))
    raise SystemExit(f"scenario not found: {name}")


def _apply_cli_overrides(scenario: Scenario, pairs: list[str]) -> None:
    """key=value overrides into the scenario (dotted keys reach overrides)."""
    for pair in pairs:
        key, _, value = pair.partition("=")
        if not value:
            raise SystemExit(f"override must be key=value: {pair}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        if key.startswith("plant."):
            scenario.plant_overrides[key[len("plant."):]] = parsed
        elif key.startswith("model."):
            scenario.model_overrides[key[len("model."):]] = parsed
        elif key.startswith("gains."):
            scenario.gains[key[len("gains."):]] = parsed
        elif hasattr(scenario, key):
            setattr(scenario, key, parsed)
        elif hasattr(scenario.toggles, key):
            setattr(scenario.toggles, key, bool(parsed))
        else:
            raise SystemExit(f"unknown override target: {key}")


def _cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
        if scenario.turbulence is not None:
            scenario.turbulence.seed = args.seed
    _apply_cli_overrides(scenario, args.override or [])
    params = load_params(args.params) if args.params else default_params()
    log = run_scenario(scenario, params)
    out = Path(args.out or "runs")
    csv_path = log.save(out)
    print(f"wrote {csv_path} ({len(log)} rows)")
    if log.aborted:
        info = log.manifest["abort"]
        print(f"ABORT at t={info['t']:.3f}s: {info['reason']}", file=sys.stderr)
        return 2
    return 0


def _cmd_metrics(args) -> int:
    log = RunLog.load(args.log)
    print(json.dumps(compute_metrics(log), indent=2))
    return 2 if log.aborted else 0


def _cmd_sweep(args) -> int:
    base = _resolve_scenario(args.scenario)
    values = args.values.split(",")
    out = Path(args.out or "runs")
    status = 0
    for value in values:
        scenario = _resolve_scenario(args.scenario)
        scenario.seed = base.seed
        _apply_cli_overrides(scenario, (args.override or []) + [f"{args.param}={value}"])
        scenario.name = f"{base.name}_{args.param.replace('.', '_')}_{value}"
        log = run_scenario(scenario)
        csv_path = log.save(out)
        m = compute_metrics(log)
        print(
            f"{scenario.name}: rms_u={m['rms_err_u_C']:.4f} "
            f"c_min={m['alloc_c_min']:.3f} aborted={m['aborted']} -> {csv_path}"
        )
        if log.aborted:
            status = 2
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tiltship", description="Airship flight dynamics and control harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file (or bundled name)")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", help="output directory (default: runs/)")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--params", help="airship parameter JSON file")
    p_run.add_argument(
        "--override", action="append", metavar="KEY=VALUE",
        help="scenario override, e.g. plant.m*=1.5 or duration=30",
    )
    p_run.set_defaults(func=_cmd_run)

    p_met = sub.add_parser("metrics", help="print metrics of a run log")
    p_met.add_argument("log")
    p_met.set_defaults(func=_cmd_metrics)

    p_sw = sub.add_parser("sweep", help="run a scenario over parameter values")
    p_sw.add_argument("scenario")
    p_sw.add_argument("--param", required=True)
    p_sw.add_argument("--values", required=True, help="comma separated")
    p_sw.add_argument("--out")
    p_sw.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_sw.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
