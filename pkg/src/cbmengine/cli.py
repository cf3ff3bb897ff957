"""Operator command line: simulate | compare | fit | replay | serve.

Exit codes: 0 success, 1 runtime failure, 2 invalid input. All commands are
deterministic given their input files; `--now` freezes the wall clock where
one would otherwise leak in.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .reliability import (
    DegenerateSample,
    InsufficientData,
    classify_hazard_shape,
    fit_weibull,
    hazard_curve_from_model,
)
from .scheduler import (
    CLAIMED_INDUSTRY_RANGES,
    CONTEXT_LABEL,
    InvalidCostTable,
    compare_policies,
    cost_table_from_dict,
    policies_from_dict,
)
from .simulator import InvalidSpec, dump_scenario, load_scenario
from .store import canonical_json

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbm", description="condition-based maintenance engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario end to end")
    p_sim.add_argument("scenario", help="scenario YAML file")
    p_sim.add_argument("--out", default="./cbm-run", help="output directory")
    p_sim.add_argument("--rules", default=None, help="rules YAML file")
    p_sim.add_argument("--fraction", type=float, default=0.5, help="inspection fraction of P-F")
    p_sim.add_argument(
        "--limits-from-truth",
        action="store_true",
        help="derive limit rules at each channel's functional-failure level",
    )
    p_sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_sim.add_argument(
        "--validate-only",
        action="store_true",
        help="validate the scenario and print its normalized form",
    )

    p_cmp = sub.add_parser("compare", help="compare maintenance policies")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--policies", required=True, help="policies YAML file")
    p_cmp.add_argument("--costs", required=True, help="cost table YAML file")
    p_cmp.add_argument("--out", default=None, help="write the JSON report here")

    p_fit = sub.add_parser("fit", help="fit a lifetime model to failure records")
    p_fit.add_argument("lifetimes", help="file: one '<hours> [0|1]' per line (1 = censored)")

    p_rep = sub.add_parser("replay", help="re-run detection over stored telemetry")
    p_rep.add_argument("scenario", help="scenario YAML the data was produced from")
    p_rep.add_argument("--data", required=True, help="data dir of a previous run")
    p_rep.add_argument("--out", default="./cbm-replay", help="output directory")
    p_rep.add_argument("--rules", default=None)
    p_rep.add_argument("--fraction", type=float, default=0.5)
    p_rep.add_argument("--limits-from-truth", action="store_true")

    p_srv = sub.add_parser("serve", help="run the monitoring service")
    p_srv.add_argument("--config", default=None, help="service config YAML")
    p_srv.add_argument("--listen", default=None, help="telemetry socket host:port")
    p_srv.add_argument("--http", default=None, help="API host:port")
    p_srv.add_argument("--token", default=None, help="bearer token for mutations")
    p_srv.add_argument("--data-dir", default=None)
    p_srv.add_argument("--scenario", default=None, help="asset definitions")
    p_srv.add_argument("--rules", default=None)
    return parser


def _load_rules_arg(path):
    from .engine import load_rules

    return load_rules(path) if path else None


def cmd_simulate(args) -> int:
    from .pipeline import run_scenario

    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None:
            from dataclasses import replace

            scenario = replace(scenario, seed=args.seed)
        if args.validate_only:
            print(dump_scenario(scenario), end="")
            return EXIT_OK
        rules = _load_rules_arg(args.rules)
    except (InvalidSpec, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        result = run_scenario(
            scenario,
            rules,
            args.out,
            fraction=args.fraction,
            limits_from_truth=args.limits_from_truth,
        )
    except Exception as exc:  # runtime failure, not an input problem
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    s = result.summary
    print(
        f"assets={s['n_assets']} anomalies={s['n_anomalies']} "
        f"detected_before_failure={s['n_detected_before_failure']}"
    )
    print(f"frames: {result.stats}")
    print(f"outputs in {result.data_dir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        with open(args.policies, "r", encoding="utf-8") as fh:
            policies = policies_from_dict(yaml.safe_load(fh) or {})
        with open(args.costs, "r", encoding="utf-8") as fh:
            costs = cost_table_from_dict(yaml.safe_load(fh) or {})
        if len(policies) < 2:
            raise ValueError("need at least 2 policies to compare")
    except (
        InvalidSpec,
        InvalidCostTable,
        ValueError,
        KeyError,
        FileNotFoundError,
        yaml.YAMLError,
    ) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        comparison = compare_policies(scenario, policies, costs)
    except Exception as exc:
        print(f"comparison failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(format_comparison(comparison))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(canonical_json(comparison.as_dict()) + "\n")
        print(f"report written to {out}")
    return EXIT_OK


def format_comparison(comparison) -> str:
    lines = []
    header = f"{'policy':<14}{'breakdowns':>11}{'planned':>9}{'downtime h':>12}{'cost':>14}{'prod lost':>12}"
    lines.append(header)
    lines.append("-" * len(header))
    for label in comparison.labels:
        o = comparison.outcomes[label]
        lines.append(
            f"{label:<14}{o.unplanned_breakdowns:>11}{o.planned_interventions:>9}"
            f"{o.downtime_hours:>12.1f}{o.maintenance_cost:>14.2f}{o.production_lost:>12.1f}"
        )
    lines.append("")
    lines.append(f"reductions vs {comparison.baseline} (percent):")
    for label in comparison.labels:
        if label == comparison.baseline:
            continue
        d = comparison.deltas_vs_baseline[label]
        parts = ", ".join(
            f"{k}={'n/a' if v is None else f'{v:.1f}%'}" for k, v in d.items()
        )
        lines.append(f"  {label}: {parts}")
    lines.append("")
    lines.append(f"{CONTEXT_LABEL}:")
    for metric, claimed in CLAIMED_INDUSTRY_RANGES:
        lines.append(f"  {metric}: {claimed}")
    return "\n".join(lines)


def _read_lifetimes(path):
    lifetimes, censored = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            lifetimes.append(float(parts[0]))
            censored.append(bool(int(parts[1])) if len(parts) > 1 else False)
    return lifetimes, censored


def cmd_fit(args) -> int:
    try:
        lifetimes, censored = _read_lifetimes(args.lifetimes)
    except (FileNotFoundError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        model = fit_weibull(lifetimes, censored)
    except (InsufficientData, DegenerateSample) as exc:
        print(f"cannot fit: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    shape_class = classify_hazard_shape(hazard_curve_from_model(model))
    print(f"shape_beta      = {model.shape_beta:.6f}")
    print(f"scale_eta       = {model.scale_eta:.6f}")
    print(f"log_likelihood  = {model.log_likelihood:.6f}")
    print(f"n               = {model.fit_n}")
    print(f"hazard_class    = {shape_class.name} ({shape_class.description})")
    return EXIT_OK


def cmd_replay(args) -> int:
    from .pipeline import run_scenario
    from .store import load_frames

    try:
        scenario = load_scenario(args.scenario)
        rules = _load_rules_arg(args.rules)
        data = Path(args.data)
        hot = data / "data" / "hot.log"
        if not hot.exists():
            raise FileNotFoundError(f"no stored telemetry under {data}")
    except (InvalidSpec, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        frames = []
        archive = data / "data" / "archive"
        for seg in sorted(archive.glob("segment-*.log")):
            frames.extend(load_frames(seg))
        frames.extend(load_frames(hot))
        # Reconstruct original (pre-substitution) values from the journal.
        subs_path = data / "data" / "journal" / "substitutions.jsonl"
        if subs_path.exists():
            originals = {}
            for line in subs_path.read_text().splitlines():
                rec = json.loads(line)
                originals[(rec["sensor"], rec["seq"])] = rec["original_value"]
            frames = [
                f
                if (f.sensor, f.seq) not in originals
                else f.__class__(**{**f.__dict__, "value": originals[(f.sensor, f.seq)]})
                for f in frames
            ]
        result = run_scenario(
            scenario,
            rules,
            args.out,
            fraction=args.fraction,
            limits_from_truth=args.limits_from_truth,
            replay_frames=frames,
        )
    except Exception as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(
        f"replayed {len(frames)} frames; anomalies={result.summary['n_anomalies']}; "
        f"outputs in {result.data_dir}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import asyncio

    import uvicorn

    from .config import load_config, split_host_port
    from .engine import MonitorEngine, load_rules
    from .service import create_app, make_webhook_notifier, run_ingest_socket, run_pumps
    from .store import FrameStore

    try:
        config = load_config(args.config)
        for attr, val in (
            ("listen", args.listen),
            ("http", args.http),
            ("token", args.token),
            ("data_dir", args.data_dir),
            ("scenario", args.scenario),
            ("rules", args.rules),
        ):
            if val is not None:
                setattr(config, attr, val)
        rules = load_rules(config.rules) if config.rules else None
        scenario = load_scenario(config.scenario) if config.scenario else None
    except (InvalidSpec, FileNotFoundError, ValueError, yaml.YAMLError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID

    store = FrameStore(config.data_dir)
    notifier = make_webhook_notifier(config.webhook_url) if config.webhook_url else None
    engine = MonitorEngine(
        store,
        staleness_hours=config.staleness_hours,
        inspection_fraction=config.inspection_fraction,
        origin_ms=int(__import__("time").time() * 1000),
        notifier=notifier,
    )
    if scenario is not None:
        engine.configure_from_scenario(scenario, rules, fraction=config.inspection_fraction)
    if config.token is None:
        print("warning: no bearer token configured; mutations will be rejected", file=sys.stderr)

    app = create_app(engine, config)
    host, port = split_host_port(config.http)

    async def main() -> None:
        ingest_server = await run_ingest_socket(engine, config.listen)
        pump_task = asyncio.create_task(run_pumps(engine, config.poll_seconds))
        server = uvicorn.Server(
            uvicorn.Config(app, host=host, port=port, log_level="warning")
        )
        print(f"API on http://{host}:{port}, telemetry socket on {config.listen}")
        try:
            await server.serve()
        finally:
            pump_task.cancel()
            ingest_server.close()
            store.close()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "fit": cmd_fit,
        "replay": cmd_replay,
        "serve": cmd_serve,
    }[args.command]
    return handler(args)


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
