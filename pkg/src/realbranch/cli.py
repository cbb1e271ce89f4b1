"""Command line front end.

    realbranch run CONFIG [--out DIR] [--seed N] [--quiet]
    realbranch validate CONFIG

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime
import json
import logging
import platform
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import horizon_sweep
from .branching import sample_branch
from .config import SCHEMA_VERSION, RunConfig, config_echo, load_config
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


@contextlib.contextmanager
def stage(operation: str):
    """Re-raise any computational failure as a NumericalError naming ``operation``."""
    try:
        yield
    except (NumericalError, ConfigError, OSError):
        raise
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise NumericalError(operation, str(exc)) from exc


def _dump(path: Path, doc: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label) or "_"


def write_realstate_csv(path: Path, times, states):
    dim = states[0].dim if states else 0
    header = ["t"]
    header += [f"ρ_re_{i}_{j}" for i in range(dim) for j in range(dim)]
    header += [f"ρ_im_{i}_{j}" for i in range(dim) for j in range(dim)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, rho in zip(times, states):
            flat = rho.data.reshape(-1)
            w.writerow([repr(float(t))] + [repr(float(z.real)) for z in flat]
                       + [repr(float(z.imag)) for z in flat])


def run(cfg: RunConfig, out_dir: Path, seed: int | None = None, quiet: bool = False) -> int:
    """Execute a validated configuration and write every output file into ``out_dir``."""
    tol = cfg.tolerances
    with stage("build_model"):
        model = cfg.build_model()
        spec = cfg.decomp_spec(model)
    with stage("horizon_sweep"):
        report = horizon_sweep(model.psi_I, model.sched, spec, cfg.horizons, cfg.times, tol=tol)

    out_dir.mkdir(parents=True, exist_ok=True)
    header = {"schema_version": SCHEMA_VERSION, "model": model.name, "decomposition": spec.kind}

    per_horizon = []
    for bset in report.branch_sets:
        total = bset.total_probability
        per_horizon.append({
            "T": bset.horizon,
            "branches": [{
                "label": b.label,
                "probability": b.probability,
                "overlap_re": b.overlap.real,
                "overlap_im": b.overlap.imag,
            } for b in bset],
            "total_probability": total,
            "residual": total - 1.0,
            "dropped_mass": bset.dropped_mass,
        })
    _dump(out_dir / "branches.json", {
        **header,
        "horizons": per_horizon,
        "matched_series": {t.key: {"labels": t.labels, "probabilities": t.probabilities}
                           for t in report.tracks},
        "converged": report.converged,
        "dropped_mass_total": float(sum(report.dropped_mass)),
    })

    final = report.branch_sets[-1]
    files = {}
    for tr in report.tracks:
        label = tr.labels[-1]
        if label is None:
            continue
        name = f"realstate_{safe_label(label)}.csv"
        write_realstate_csv(out_dir / name, report.times, tr.states[-1])
        files[label] = name

    _dump(out_dir / "convergence.json", {**header, **report.to_dict()})

    realized = None
    if seed is not None:
        with stage("sample_branch"):
            total = final.total_probability
            realized = sample_branch(final.branches, seed, tol)
        _dump(out_dir / "realized.json", {
            **header,
            "seed": seed,
            "horizon": final.horizon,
            "label": realized,
            "probability": final.get(realized).probability,
            "renormalized_from": total,
            "trajectory_file": files.get(realized),
        })

    versions = {"realbranch": __version__, "python": platform.python_version(),
                "numpy": np.__version__}
    with open(out_dir / "run.log", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"timestamp: {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
        fh.write(f"versions: {json.dumps(versions)}\n")
        fh.write(f"config: {json.dumps(config_echo(cfg), sort_keys=True)}\n")
        fh.write(f"seed: {seed}\n")
        fh.write(f"converged: {report.converged}\n")
        if realized is not None:
            fh.write(f"realized: {realized}\n")

    if not quiet:
        print(f"{model.name}: {len(final)} branch(es) at T={final.horizon}, "
              f"converged={report.converged}")
        for b in final:
            print(f"  {b.label}: p={b.probability:.12g}")
        if realized is not None:
            print(f"realized branch (seed {seed}): {realized}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realbranch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a configuration")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--seed", type=int, help="sampling seed (overrides seed)")
    r.add_argument("--quiet", action="store_true")
    v = sub.add_parser("validate", help="validate a configuration without running it")
    v.add_argument("config")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "validate":
        if not quiet:
            print(f"{args.config}: ok")
        return EXIT_OK

    seed = args.seed if args.seed is not None else cfg.seed
    if seed is not None and not 0 <= seed < 2 ** 64:
        print("--seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir or "realbranch_out")
    try:
        return run(cfg, out, seed, quiet)
    except NumericalError as exc:
        print(f"numeric failure in {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
