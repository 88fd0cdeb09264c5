"""Command-line scenario runner.

Usage: ``nlblockade <scenario> [--config FILE.toml] [--out FILE.csv]
[--workers N] [--fock-cutoff N] [--preset NAME]``. A JSON manifest with every
resolved parameter is written next to the CSV.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SolverError
from .experiments import SCENARIOS, ConfigError, Table, resolve_params, run_scenario

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("nlblockade")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, ".17g")  # folds -0.0 into 0
    return str(v)


def expand_complex(table: Table) -> tuple[list[str], list[list]]:
    """Split any complex-valued column into ``_re``/``_im`` columns."""
    cplx = [any(isinstance(r[j], (complex, np.complexfloating)) for r in table.rows)
            for j in range(len(table.columns))]
    cols = []
    for name, c in zip(table.columns, cplx):
        cols.extend([f"{name}_re", f"{name}_im"] if c else [name])
    rows = []
    for r in table.rows:
        out = []
        for v, c in zip(r, cplx):
            out.extend([complex(v).real, complex(v).imag] if c else [v])
        rows.append(out)
    return cols, rows


def write_csv(table: Table, path: Path) -> None:
    cols, rows = expand_complex(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([format_value(v) for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlblockade", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", help="TOML file with parameter tables")
    ap.add_argument("--out", help="CSV output path (default: <scenario>.csv)")
    ap.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    ap.add_argument("--fock-cutoff", type=int, default=None, help="Fock dimension per mode")
    ap.add_argument("--preset", default=None, help="physical preset, e.g. rb87-d1")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        file_cfg = load_config(args.config)
        preset = file_cfg.pop("preset", None)
        if args.preset is not None:
            preset = args.preset
        workers = file_cfg.pop("workers", None)
        if args.workers is not None:
            workers = args.workers
        if workers is None:
            workers = os.cpu_count() or 1
        if int(workers) < 1:
            raise ConfigError("workers must be >= 1")
        params = resolve_params(args.scenario, file_cfg, preset=preset, fock_cutoff=args.fock_cutoff)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or f"{args.scenario}.csv")
    log.info("running %s with %d workers", args.scenario, workers)
    try:
        table = run_scenario(args.scenario, params, workers=int(workers))
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(table, out)
    manifest = {
        "tool": "nlblockade",
        "version": __version__,
        "scenario": args.scenario,
        "preset": preset,
        "params": _jsonable(params),
        "csv": out.name,
        "rows": len(table.rows),
        "failures": table.failures,
        "summary": _jsonable(table.summary),
    }
    # workers is deliberately left out so the manifest is worker-independent
    manifest_path(out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if table.failures:
        print(f"{len(table.failures)} grid point(s) failed; see {out}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
