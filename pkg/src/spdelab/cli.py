"""Command-line front end.

One subcommand per experiment kind, plus `plot` for rendering persisted
series.csv files to simple SVG line or histogram plots.  Exit status: 0
when every check passes, 1 when a check fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from collections import defaultdict

import numpy as np

from .harness import KINDS, ExperimentConfig, persist, run_ensemble
from .noise import NoiseStream
from .spde import simulate_truncated


def _add_common_flags(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--seed", type=int, help="master seed override")
    sub.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    sub.add_argument("--workers", type=int, help="worker processes (env SPDE_LAB_WORKERS)")
    sub.add_argument("--out", help="output directory for summary.json / series.csv")
    sub.add_argument(
        "--retain-fields",
        action="store_true",
        help="additionally dump the dense fields of path 0 (SPDE kinds)",
    )
    sub.add_argument("--gamma", type=float, help="noise exponent")
    sub.add_argument("--trunc", help="truncation level (a number or 'inf')")
    sub.add_argument("--grid", type=int, help="number of lattice cells m")
    sub.add_argument("--dt", type=float, help="time step")
    sub.add_argument("--horizon", type=float, help="time horizon T")
    sub.add_argument("--alpha", type=float, action="append", help="moment order(s) in (0,1)")
    sub.add_argument("--p", type=float, action="append", help="Lp order(s)")
    sub.add_argument("--scheme", choices=["explicit", "semi-implicit"], help="stepping scheme")


def _config_from_args(kind: str, args) -> ExperimentConfig:
    base = {"kind": kind}
    if args.config:
        with open(args.config) as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise ValueError("config file must contain a JSON object")
        loaded.setdefault("kind", kind)
        if loaded["kind"] != kind:
            raise ValueError(
                f"config file is for kind {loaded['kind']!r}, invoked as {kind!r}"
            )
        base = loaded
    overrides = {
        "master_seed": args.seed,
        "paths": args.paths,
        "workers": args.workers,
        "out_dir": args.out,
        "gamma": args.gamma,
        "m": args.grid,
        "dt": args.dt,
        "T": args.horizon,
        "scheme": args.scheme,
    }
    if args.trunc is not None:
        overrides["trunc_n"] = math.inf if args.trunc == "inf" else float(args.trunc)
    if args.alpha:
        overrides["alphas"] = tuple(args.alpha)
    if args.p:
        overrides["ps"] = tuple(args.p)
    for key, val in overrides.items():
        if val is not None:
            base[key] = val
    if "workers" not in base:
        env = os.environ.get("SPDE_LAB_WORKERS")
        if env:
            base["workers"] = int(env)
    return ExperimentConfig.from_dict(base)


def _render_checks(summary) -> str:
    lines = [f"{'check':<44} {'verdict':<13} detail"]
    for c in summary.checks:
        emp = c["empirical"]
        detail = ", ".join(
            f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
            for k, v in list(emp.items())[:3]
        )
        lines.append(f"{c['name']:<44} {c['verdict']:<13} {detail}")
    return "\n".join(lines)


def _dump_fields(cfg: ExperimentConfig, directory: str) -> None:
    """Dense fields of path 0 for the diagnostics that need snapshots."""
    from .harness import _spde_config

    spcfg = _spde_config(cfg, retain_slabs=True)
    traj = simulate_truncated(spcfg, NoiseStream(cfg.master_seed, 0))
    path = os.path.join(directory, "fields.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "cell", "value"])
        for k, row in enumerate(traj.dense_fields):
            for x, v in enumerate(row):
                writer.writerow([k, x, repr(float(v))])


def _run_experiment(kind: str, args) -> int:
    try:
        cfg = _config_from_args(kind, args)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    summary = run_ensemble(cfg)
    print(_render_checks(summary))
    if cfg.out_dir:
        persist(summary, cfg.out_dir)
        if args.retain_fields and kind in (
            "spde-martingale",
            "spde-converge",
            "fourier-check",
            "lp-norms",
            "blowup-scan",
        ):
            _dump_fields(cfg, cfg.out_dir)
        print(f"wrote {cfg.out_dir}/summary.json")
    return 0 if summary.passed else 1


# ---------------------------------------------------------------- plotting


def _svg_header(width, height):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def _axes(width, height, margin):
    x0, y0 = margin, height - margin
    x1, y1 = width - margin, margin
    return (
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>\n'
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>\n'
    )


def _scale(vals, lo_px, hi_px):
    vmin, vmax = float(np.min(vals)), float(np.max(vals))
    if vmax == vmin:
        vmax = vmin + 1.0
    return lambda v: lo_px + (v - vmin) / (vmax - vmin) * (hi_px - lo_px)


def svg_line_plot(times, values, title: str, width=640, height=400) -> str:
    margin = 50
    sx = _scale(times, margin, width - margin)
    sy = _scale(values, height - margin, margin)
    pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(times, values))
    return (
        _svg_header(width, height)
        + _axes(width, height, margin)
        + f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>\n'
        + f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>\n'
        + "</svg>\n"
    )


def svg_histogram(values, title: str, bins=40, width=640, height=400) -> str:
    margin = 50
    counts, edges = np.histogram(values, bins=bins)
    sx = _scale(edges, margin, width - margin)
    sy = _scale(np.concatenate(([0], counts)), height - margin, margin)
    bars = []
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        x = sx(lo)
        w = max(sx(hi) - sx(lo) - 1.0, 0.5)
        y = sy(c)
        h = sy(0) - y
        bars.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="steelblue"/>'
        )
    return (
        _svg_header(width, height)
        + _axes(width, height, margin)
        + "\n".join(bars)
        + f'\n<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>\n'
        + "</svg>\n"
    )


def _cmd_plot(args) -> int:
    csv_path = args.series
    if os.path.isdir(csv_path):
        csv_path = os.path.join(csv_path, "series.csv")
    try:
        rows = defaultdict(list)
        with open(csv_path, newline="") as f:
            reader = csv.DictReader(f)
            for row in reader:
                rows[row["functional"]].append(
                    (int(row["path_index"]), float(row["time"]), float(row["value"]))
                )
    except (OSError, KeyError, ValueError, TypeError) as e:
        print(f"configuration error: cannot read {csv_path!r}: {e}", file=sys.stderr)
        return 2
    if not rows:
        print("configuration error: series file has no data rows", file=sys.stderr)
        return 2
    name = args.functional or sorted(rows)[0]
    if name not in rows:
        print(
            f"configuration error: functional {name!r} not in {sorted(rows)}",
            file=sys.stderr,
        )
        return 2
    data = sorted(rows[name])
    values = np.array([v for _, _, v in data])
    values = values[np.isfinite(values)]
    if values.size == 0:
        print("configuration error: no finite values to plot", file=sys.stderr)
        return 2
    if args.style == "hist":
        svg = svg_histogram(values, name, bins=args.bins)
    else:
        idx = np.arange(values.size)
        svg = svg_line_plot(idx, values, name)
    with open(args.out, "w") as f:
        f.write(svg)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spde-lab",
        description="Monte Carlo laboratory for the stochastic heat equation "
        "with power-law noise on the unit circle",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub = subs.add_parser(kind, help=f"run the {kind} experiment")
        _add_common_flags(sub)
    plot = subs.add_parser("plot", help="render series.csv to an SVG plot")
    plot.add_argument("series", help="series.csv file or a directory containing it")
    plot.add_argument("--out", required=True, help="output SVG path")
    plot.add_argument("--functional", help="functional name to plot")
    plot.add_argument("--style", choices=["line", "hist"], default="hist")
    plot.add_argument("--bins", type=int, default=40)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plot":
        return _cmd_plot(args)
    return _run_experiment(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
