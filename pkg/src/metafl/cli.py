"""Command-line front end.

Subcommands:
  run     execute one experiment, write metrics CSV + JSON summary
          (and optionally the round-curve figure)
  sweep   run a scenario grid, one CSV per cell plus a combined summary
          table and comparison figure
  report  render figures for existing metrics CSVs

Exit codes: 0 success, 1 configuration error, 2 runtime error.
The default output directory can be set with METAFL_OUTPUT_DIR.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, parse_config
from .orchestrator import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--rounds", type=int, help="training rounds override")
    p.add_argument("--rule", help="aggregation rule (fedavg|krum|cwm|trimmed_mean|rfa|norm_bound|dp)")
    p.add_argument("--krum-f", type=int, dest="krum_f", help="Krum byzantine bound")
    p.add_argument("--scheme", help="attack scheme (none|naive|replacement)")
    p.add_argument("--instrument", action="store_true", default=None,
                   help="measure cohort-aggregate variance reduction each round")
    p.add_argument("--output-dir", default=os.environ.get("METAFL_OUTPUT_DIR", "."),
                   help="output directory (default: METAFL_OUTPUT_DIR or cwd)")


def _overrides(args) -> dict:
    keys = ("seed", "rounds", "rule", "krum_f", "scheme", "instrument")
    return {k: getattr(args, k, None) for k in keys}


def _write_outputs(cfg: ExperimentConfig, log, out_dir: Path, stem: str, figures: bool) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    text = log.to_csv_text()  # fully materialized before open: no partial file on I/O error
    with open(csv_path, "w", newline="") as fh:
        fh.write(text)
    with open(out_dir / f"{stem}.summary.json", "w") as fh:
        json.dump(log.summary, fh, indent=2, sort_keys=True)
    if figures:
        from .plots import render_run_figure
        render_run_figure(csv_path)
    return csv_path


def cmd_run(args) -> int:
    cfg = parse_config(args.config, _overrides(args), topology=args.topology,
                       scenario=args.scenario)
    log = run_experiment(cfg)
    stem = args.name or "metrics"
    csv_path = _write_outputs(cfg, log, Path(args.output_dir), stem, args.figures)
    print(f"wrote {csv_path} (final accuracy {log.final.accuracy:.3f}, "
          f"attack success {log.final.attack_success:.3f})")
    return EXIT_OK


def _cell_stem(topology: str, scenario: str, rule: str) -> str:
    return f"{topology}_{scenario}_{rule}".replace("-", "")


def cmd_sweep(args) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for topology in args.topologies:
        for scenario in args.scenarios:
            for rule in args.rules:
                row = {"topology": topology, "scenario": scenario, "rule": rule}
                try:
                    cfg = parse_config(args.config, {**_overrides(args), "rule": rule},
                                       topology=topology, scenario=scenario)
                    log = run_experiment(cfg)
                    stem = _cell_stem(topology, scenario, rule)
                    _write_outputs(cfg, log, out_dir, stem, args.figures)
                    row.update(status="ok", mode=cfg.mode,
                               final_accuracy=repr(log.final.accuracy),
                               final_attack_success=repr(log.final.attack_success),
                               csv=f"{stem}.csv")
                except Exception as exc:  # keep sweeping past bad cells
                    row.update(status="failed", mode="", final_accuracy="",
                               final_attack_success="", csv="", error=str(exc))
                summary_rows.append(row)
    cols = ["topology", "mode", "scenario", "rule", "status",
            "final_accuracy", "final_attack_success", "csv", "error"]
    summary_path = out_dir / "sweep_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in summary_rows:
            writer.writerow({k: row.get(k, "") for k in cols})
    if args.figures and any(r["status"] == "ok" for r in summary_rows):
        from .plots import render_sweep_figure
        render_sweep_figure(summary_rows, out_dir / "sweep_summary.png")
    n_ok = sum(r["status"] == "ok" for r in summary_rows)
    print(f"sweep: {n_ok}/{len(summary_rows)} cells ok, summary at {summary_path}")
    return EXIT_OK if n_ok == len(summary_rows) else EXIT_RUNTIME


def cmd_report(args) -> int:
    from .plots import render_run_figure
    paths = []
    for target in args.paths:
        p = Path(target)
        paths.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    made = []
    for csv_path in paths:
        if csv_path.name == "sweep_summary.csv":
            continue
        made.append(render_run_figure(csv_path))
    for m in made:
        print(f"wrote {m}")
    if not made:
        print("no metrics CSVs found", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metafl",
                                     description="Federated-learning backdoor simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_common_flags(p_run)
    p_run.add_argument("--topology", help="compact topology, e.g. mfl-15-5 or fl-5")
    p_run.add_argument("--scenario", help="compact attack scenario, e.g. attack-1-3")
    p_run.add_argument("--name", help="output file stem (default: metrics)")
    p_run.add_argument("--figures", action="store_true", help="render the round-curve figure")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario grid")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--scenarios", nargs="+", required=True,
                         help="attack-f-k scenario strings")
    p_sweep.add_argument("--topologies", nargs="+", required=True,
                         help="topology strings (fl-k / mfl-i-j)")
    p_sweep.add_argument("--rules", nargs="+", default=["fedavg"])
    p_sweep.add_argument("--figures", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="render figures for existing metrics CSVs")
    p_rep.add_argument("paths", nargs="+", help="metrics CSV files or directories")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
