"""Command-line front door.

    fedshadow simulate  --config cfg.json --out runs/   run headless
    fedshadow analyze   --run runs/<run_id>             write signatures + trajectory
    fedshadow report    --run runs/<run_id>             write advisory + text report
    fedshadow serve     --store runs/ [--port 8080]     start the HTTP service
    fedshadow scenarios                                 list bundled scenarios

Exit codes: 0 ok, 1 bad config/arguments, 2 numeric divergence,
3 incomplete run without --partial.
"""

import argparse
import json
import sys
from pathlib import Path

from fedshadow.advisory import advise
from fedshadow.errors import FedShadowError
from fedshadow.federation import FederationConfig, validate_config_dict
from fedshadow.pipeline import analyze_and_persist, execute_run
from fedshadow.scenarios import CATALOG, get_scenario
from fedshadow.store import RunStore

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_INCOMPLETE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedshadow",
                                     description="federated label-flip attack lab")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a federation and persist it")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="config JSON file")
    src.add_argument("--scenario", help="bundled scenario name")
    sim.add_argument("--paper-scale", action="store_true",
                     help="use the 200-round paper-scale variant of a scenario")
    sim.add_argument("--out", type=Path, required=True, help="store root directory")
    sim.add_argument("--seed", type=int, default=None, help="override master_seed")
    sim.add_argument("--workers", type=int, default=1,
                     help="parallel local trainings per round")
    sim.add_argument("--json", action="store_true", help="machine-readable output")

    ana = sub.add_parser("analyze", help="compute signatures for a stored run")
    ana.add_argument("--run", type=Path, required=True, help="run directory")
    ana.add_argument("--partial", action="store_true",
                     help="analyze the completed prefix of an unfinished run")
    ana.add_argument("--json", action="store_true")

    rep = sub.add_parser("report", help="advisory report for a stored run")
    rep.add_argument("--run", type=Path, required=True, help="run directory")
    rep.add_argument("--partial", action="store_true")
    rep.add_argument("--json", action="store_true")

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--store", type=Path, default=Path("runs"), help="store root")
    srv.add_argument("--port", type=int, default=None,
                     help=f"listen port (default env FEDSHADOW_PORT or 8080)")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--workers", type=int, default=1)
    srv.add_argument("--dashboard", type=Path, default=None,
                     help="directory of built dashboard assets")

    sc = sub.add_parser("scenarios", help="list bundled scenarios")
    sc.add_argument("--json", action="store_true")

    return parser


def _load_config(args) -> FederationConfig:
    if args.scenario:
        scenario = get_scenario(args.scenario)
        config = scenario.paper_config if args.paper_scale else scenario.config
        doc = config.to_json_dict()
    else:
        if not args.config.exists():
            raise FileNotFoundError(args.config)
        doc = json.loads(args.config.read_text())
    errors = validate_config_dict(doc)
    if errors:
        for field, message in errors:
            print(f"config error: {field}: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    if args.seed is not None:
        doc["master_seed"] = args.seed
    return FederationConfig.from_json_dict(doc)


def _final_metrics_table(record) -> str:
    last = record.rounds[-1].metrics
    lines = [f"run {record.run_id}: {record.status}, {len(record.rounds)} rounds",
             f"final accuracy {last.accuracy:.4f}",
             "class  f1"]
    for c, f1 in enumerate(last.per_class_f1):
        lines.append(f"{c:>5}  {f1:.4f}")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    try:
        config = _load_config(args)
    except FileNotFoundError as err:
        print(f"config file not found: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as err:
        print(f"config file is not valid JSON: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as err:
        return int(err.code)

    store = RunStore(args.out)
    run_id = store.create_run(config)
    record = execute_run(store, run_id, workers=args.workers)

    if args.json:
        last = record.rounds[-1].metrics if record.rounds else None
        print(json.dumps({
            "run_id": run_id,
            "status": record.status,
            "rounds": len(record.rounds),
            "final_accuracy": last.accuracy if last else None,
            "final_per_class_f1": last.per_class_f1.tolist() if last else None,
            "error": record.error,
        }, allow_nan=False))
    else:
        if record.rounds:
            print(_final_metrics_table(record))
        if record.error:
            print(f"error: {record.error}", file=sys.stderr)

    return EXIT_OK if record.status == "completed" else EXIT_DIVERGED


def _open_run(run_dir: Path):
    run_dir = run_dir.resolve()
    store = RunStore(run_dir.parent)
    return store, run_dir.name


def cmd_analyze(args) -> int:
    store, run_id = _open_run(args.run)
    loaded = store.load_run(run_id, lenient=args.partial)
    record = loaded.record
    if record.status != "completed" and not args.partial:
        print(f"run {run_id} is {record.status}; use --partial to analyze anyway",
              file=sys.stderr)
        return EXIT_INCOMPLETE
    if not record.rounds:
        print(f"run {run_id} has no rounds", file=sys.stderr)
        return EXIT_INCOMPLETE
    signatures, trajectory, _ = analyze_and_persist(store, record)
    if args.json:
        print(json.dumps({
            "run_id": run_id,
            "signature_rounds": len(signatures),
            "trajectory_entries": len(trajectory.entries),
        }))
    else:
        print(f"analyzed {len(signatures)} rounds; "
              f"trajectory has {len(trajectory.entries)} entries")
    return EXIT_OK


def _render_report(report) -> str:
    stats = report.summary_stats
    lines = ["advisory report", "=" * 15, ""]
    lines.append(f"victim-class F1 drop:      {stats['victim_f1_drop']:.3f}")
    peak = stats.get("peak_separability_round")
    if peak is not None:
        lines.append(f"peak separability:         {stats['peak_separability']:.3f} "
                     f"(round {peak})")
    ratio = stats.get("mean_density_ratio")
    if ratio is not None:
        lines.append(f"mean density ratio:        {ratio:.3f}")
    lines.append("")
    if report.flagged_clients:
        lines.append("flagged clients:")
        for f in report.flagged_clients:
            kinds = ", ".join(f"{e['kind']}={e['value']:.2f}" for e in f.evidence)
            lines.append(f"  client {f.client_id:>3}  score {f.score:.2f}  ({kinds})")
    else:
        lines.append("no clients flagged")
    lines.append("")
    if report.recommendations:
        lines.append("recommendations:")
        for r in report.recommendations:
            lines.append(f"  [{r['category']}] {r['text']}")
            lines.append(f"      trigger: {r['triggering_metric']}")
    else:
        lines.append("no recommendations triggered")
    return "\n".join(lines)


def cmd_report(args) -> int:
    store, run_id = _open_run(args.run)
    loaded = store.load_run(run_id, lenient=args.partial)
    record = loaded.record
    if record.status != "completed" and not args.partial:
        print(f"run {run_id} is {record.status}; use --partial to report anyway",
              file=sys.stderr)
        return EXIT_INCOMPLETE
    if not record.rounds:
        print(f"run {run_id} has no rounds", file=sys.stderr)
        return EXIT_INCOMPLETE

    if loaded.signatures is None:
        signatures, _, report = analyze_and_persist(store, record)
    else:
        signatures = loaded.signatures
        report = advise(record, signatures)
        store.save_advisory(run_id, report.to_json_dict())

    text = _render_report(report)
    (store.run_dir(run_id) / "report.txt").write_text(text + "\n")
    if args.json:
        print(json.dumps(report.to_json_dict(), allow_nan=False))
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    from fedshadow.service import run_server

    run_server(args.store, port=args.port, host=args.host,
               dashboard_dir=args.dashboard, workers=args.workers)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    if args.json:
        doc = {
            name: {
                "description": s.description,
                "config": s.config.to_json_dict(),
                "paper_config": s.paper_config.to_json_dict(),
            }
            for name, s in CATALOG.items()
        }
        print(json.dumps(doc, allow_nan=False))
    else:
        width = max(len(name) for name in CATALOG)
        for name, s in CATALOG.items():
            print(f"{name:<{width}}  {s.description}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "simulate": cmd_simulate,
        "analyze": cmd_analyze,
        "report": cmd_report,
        "serve": cmd_serve,
        "scenarios": cmd_scenarios,
    }[args.command]
    try:
        return handler(args)
    except FedShadowError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
