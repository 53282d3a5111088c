"""Command line entry point.

Subcommands: verify | sample | bounds | grid-info.
Shared flags: --config PATH, --seed U64, --out DIR, --threads N.
Exit codes: 0 pass, 1 check failure, 2 usage or config error.

Reports are deterministic: a given (config, seed) pair yields byte-identical
CSV/JSON/PNG outputs for any --threads value, because worker randomness is
keyed by job index and rows are assembled in job order.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, default_verify_config, load_config
from .experiments import run_bounds, run_sample, run_verify


def _json_default(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def _cell(value) -> str:
    """One CSV cell; floats use repr so round-tripping is lossless."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return str(value)


def _csv_text(columns, rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _ensure_out(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> dict:
    if args.config is None:
        return {}
    return load_config(args.config)


def cmd_verify(args) -> int:
    config = _load(args) if args.config else default_verify_config()
    report = run_verify(config, seed=args.seed, threads=args.threads)
    payload = report.as_dict()
    sys.stdout.write(_dump_json(payload))
    if args.out:
        out = _ensure_out(args.out)
        (out / "verify_report.json").write_text(_dump_json(payload))
        columns = ("name", "statistic", "threshold", "passed")
        rows = [{k: c.as_dict()[k] for k in columns} for c in report.checks]
        (out / "verify_report.csv").write_text(_csv_text(columns, rows))
        from .figures import render_verify_figure

        render_verify_figure(report, out / "verify_checks.png")
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.statistic:.6g} <= {check.threshold:g}", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_bounds(args) -> int:
    config = _load(args)
    report = run_bounds(config, seed=args.seed, threads=args.threads)
    text = _csv_text(report.columns, report.rows)
    sys.stdout.write(text)
    if args.out:
        out = _ensure_out(args.out)
        (out / "bounds_report.csv").write_text(text)
        (out / "bounds_report.json").write_text(_dump_json(report.as_dict()))
        from .figures import render_bounds_figure

        render_bounds_figure(report, out / "bounds_overview.png")
    return 0 if report.passed else 1


def cmd_sample(args) -> int:
    config = _load(args)
    result = run_sample(config, seed=args.seed, threads=args.threads)
    dim = result.terminal.shape[1]
    columns = [f"x{j}" for j in range(dim)]
    rows = [{f"x{j}": row[j] for j in range(dim)} for row in result.terminal]
    text = _csv_text(columns, rows)
    if args.out:
        out = _ensure_out(args.out)
        (out / "samples.csv").write_text(text)
        (out / "sample_summary.json").write_text(_dump_json(result.as_dict()))
        if result.trajectory is not None:
            np.save(out / "sample_trajectories.npy", result.trajectory)
        from .figures import render_sample_figures

        render_sample_figures(result, out)
        print(f"wrote {result.terminal.shape[0]} samples to {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_grid_info(args) -> int:
    config = _load(args)
    from .config import build_grid

    grid_spec = config.get("grid", {"constructor": "uniform_tau", "t0": 0.01, "delta": 0.01, "n_steps": 16})
    grid = build_grid(grid_spec)
    payload = grid.as_dict()
    payload["assumptions"] = grid.check_assumptions().as_dict()
    text = _dump_json(payload)
    sys.stdout.write(text)
    if args.out:
        out = _ensure_out(args.out)
        (out / "grid_info.json").write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="follmer",
        description="Simulate the entropic interpolation toward a target law and check its identities and error bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("verify", cmd_verify, "run the statistical identity suite"),
        ("sample", cmd_sample, "draw terminal samples with a configured scheme"),
        ("bounds", cmd_bounds, "sweep configurations and compare empirical divergence with certified bounds"),
        ("grid-info", cmd_grid_info, "print diagnostics for the configured time grid"),
    )
    for name, fn, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="path to a YAML config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", type=str, default=None, help="directory for report files and figures")
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent jobs")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed < 0 or args.seed > 2**64 - 1:
        parser.error("--seed must fit in an unsigned 64-bit integer")
    if args.threads < 1:
        parser.error("--threads must be a positive integer")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
