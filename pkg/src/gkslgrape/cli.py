"""Command line entry point.

    gkslgrape run <config.yaml> [--out DIR] [--max-iters K]
    gkslgrape validate <config.yaml>
    gkslgrape dump-generators <config.yaml> [-o FILE]

Exit codes: 0 converged / valid, 2 stopped at ``max_iters``, 1 bad config.
``$GKSLGRAPE_MAX_WORKERS`` caps the threads used for the gradient.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import bloch_vectors, diagnostics, entropy, purity
from .config import ConfigError, ExperimentConfig, load_config
from .grape import DivergedError, default_workers, gradient_descent, objective_assemble
from .model import build_generators, x_to_rho
from .propagate import propagate

log = logging.getLogger("gkslgrape")

EXIT_OK, EXIT_CONFIG, EXIT_MAX_ITERS = 0, 1, 2


def _f(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None, workers: int | None = None):
    """Optimize, re-propagate with the final controls and write all artifacts.

    Returns ``(summary_dict, trace)``.
    """
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = build_generators(cfg.params, cfg.interaction)
    spec = objective_assemble(cfg.x_target)
    opt = replace(cfg.optimizer, workers=workers or default_workers())

    t0 = time.perf_counter()
    trace = gradient_descent(gen, cfg.guess, cfg.x0, spec, opt)
    wall = time.perf_counter() - t0

    _write_csv(out_dir / "convergence.csv", ["k", "J"],
               [[k, _f(J)] for k, J in enumerate(trace.J)])

    grid = trace.grid
    traj = propagate(gen, grid, cfg.x0, cfg.samples_per_interval)
    rows = diagnostics(traj, spec)
    header = (["t"] + [f"x{i}" for i in range(1, 17)]
              + ["F_dist", "S", "P", "r1x", "r1y", "r1z", "r2x", "r2y", "r2z"])
    _write_csv(out_dir / "trajectory.csv", header, [
        [_f(r.t)] + [_f(v) for v in x] + [_f(r.F_dist), _f(r.S), _f(r.P)]
        + [_f(v) for v in r.r1] + [_f(v) for v in r.r2]
        for r, x in zip(rows, traj.states)
    ])

    bps = grid.times
    _write_csv(out_dir / "controls.csv", ["j", "t_left", "t_right", "u", "n1", "n2"], [
        [j + 1, _f(bps[j]), _f(bps[j + 1]), _f(grid.u[j]), _f(grid.n1[j]), _f(grid.n2[j])]
        for j in range(grid.N)
    ])

    xT = traj.final_state
    r1, r2 = bloch_vectors(xT)
    summary = {
        "interaction": cfg.interaction.value,
        "converged": trace.converged,
        "termination": trace.reason,
        "iterations": trace.iterations,
        "final_J": trace.final_J,
        "tol": cfg.optimizer.tol,
        "controls": {
            "u": grid.u.tolist(),
            "w1": grid.w1.tolist(),
            "w2": grid.w2.tolist(),
            "n1": grid.n1.tolist(),
            "n2": grid.n2.tolist(),
        },
        "terminal": {
            "S": entropy(x_to_rho(xT)),
            "P": purity(xT),
            "r1": r1.tolist(),
            "r2": r2.tolist(),
        },
        "wall_time_s": wall,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary, trace


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.max_iters is not None:
        cfg.optimizer = replace(cfg.optimizer, max_iters=args.max_iters)
    try:
        summary, _ = run_experiment(cfg, args.out)
    except DivergedError as exc:
        log.error("optimization diverged: %s", exc)
        return EXIT_CONFIG
    print(f"{summary['termination']}: {summary['iterations']} iterations, "
          f"J = {summary['final_J']:.6e}")
    return EXIT_OK if summary["converged"] else EXIT_MAX_ITERS


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    rho0 = x_to_rho(cfg.x0)
    print(f"ok: interaction={cfg.interaction.value} T={cfg.T:g} N={cfg.N} "
          f"P(rho0)={purity(rho0):.6g} S(rho0)={entropy(rho0):.6g}")
    return EXIT_OK


def _cmd_dump(args) -> int:
    cfg = load_config(args.config)
    text = build_generators(cfg.params, cfg.interaction).dump()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gkslgrape", description="GRAPE for a two-qubit open system")
    p.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="optimize controls and write CSV/JSON artifacts")
    r.add_argument("config")
    r.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    r.add_argument("--max-iters", type=int)
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a config without running")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)

    d = sub.add_parser("dump-generators", help="print the 16x16 generator matrices")
    d.add_argument("config")
    d.add_argument("-o", "--output")
    d.set_defaults(func=_cmd_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
