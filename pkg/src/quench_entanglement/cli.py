"""Command-line front end: ``run``, ``scan``, ``efc`` and ``validate``.

Every verb takes ``--config <path> --out <dir> [--workers N] [-v]``. Results
are written as ``<prefix>_*.csv`` / ``<prefix>_*.json`` in the output
directory. Those files depend only on the config content; wall-clock
information goes to ``<prefix>.timing.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, harness, validation
from .config import QuenchConfig, load_document, scan_documents
from .errors import ConfigurationError, GeometryError, InvalidParameterError, UnstableEnsembleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ENSEMBLE = 3
EXIT_INVARIANT = 4

log = logging.getLogger("quench_entanglement")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, ".12g"))
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _sidecar(config_doc: dict, **extra) -> dict:
    return {"config": config_doc, "code_version": __version__, **extra}


def _write_timing(out: Path, prefix: str, verb: str, started: float, workers: int) -> None:
    write_json(
        out / f"{prefix}.timing.json",
        {
            "verb": verb,
            "started_unix": started,
            "wall_seconds": time.time() - started,
            "workers": workers,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    )


def _prefix(doc: dict, verb: str) -> str:
    return doc.get("output", {}).get("prefix", verb)


def cmd_run(doc: dict, out: Path, workers_flag: int | None) -> int:
    config = QuenchConfig.from_dict(doc)
    workers = harness.resolve_workers(workers_flag, config)
    prefix, started = _prefix(doc, "run"), time.time()
    outcomes = harness.run_ensemble(config, workers=workers)
    agg = harness.aggregate_outcomes(config, outcomes)
    csv_name = f"{prefix}_trajectories.csv"
    with open(out / csv_name, "w", newline="") as fh:
        writer = harness.CsvRowWriter(fh, harness.trajectory_header(config))
        for row in harness.trajectory_rows(config, outcomes):
            writer.write(row)
    write_json(
        out / f"{prefix}_aggregate.json",
        _sidecar(
            doc,
            times=config.time_grid.times(),
            aggregate=agg.to_dict(),
            mean_trajectory=agg.mean_trajectory,
            sup_values=agg.sup_values,
            skipped_reasons={str(o.index): o.reason for o in outcomes if o.skipped},
            outputs={"trajectories": csv_name},
        ),
    )
    _write_timing(out, prefix, "run", started, workers)
    log.info("run: %d effective realizations, mean sup N = %.6g", agg.n_effective, agg.mean)
    return EXIT_OK


def cmd_scan(doc: dict, out: Path, workers_flag: int | None) -> int:
    configs = [QuenchConfig.from_dict(d) for d in scan_documents(doc)]
    if len(configs) < 2:
        raise ConfigurationError("a scan needs at least two rows")
    workers = harness.resolve_workers(workers_flag, configs[0])
    prefix, started = _prefix(doc, "scan"), time.time()
    csv_name = f"{prefix}_scan.csv"
    rows: list = []
    status = EXIT_OK
    with open(out / csv_name, "w", newline="") as fh:
        writer = harness.CsvRowWriter(fh, harness.SCAN_COLUMNS)

        def emit(row):
            rows.append(row)
            writer.write(row.csv_fields())

        try:
            harness.area_law_scan(configs, workers=workers, on_row=emit)
        except UnstableEnsembleError as exc:
            log.error("scan stopped after %d rows: %s", len(rows), exc)
            status = EXIT_ENSEMBLE
    write_json(
        out / f"{prefix}_scan.json",
        _sidecar(doc, rows_written=len(rows), complete=status == EXIT_OK, outputs={"scan": csv_name}),
    )
    _write_timing(out, prefix, "scan", started, workers)
    return status


def cmd_efc(doc: dict, out: Path, workers_flag: int | None) -> int:
    config = QuenchConfig.from_dict(doc)
    prefix, started = _prefix(doc, "efc"), time.time()
    est = harness.efc_for_config(config)
    csv_name = f"{prefix}_efc.csv"
    with open(out / csv_name, "w", newline="") as fh:
        writer = harness.CsvRowWriter(fh, ["distance", "mean_value", "stderr", "n_pairs"])
        for r, v, e, c in zip(est.distances, est.averaged_values, est.stderr, est.n_pairs):
            writer.write([harness.format_number(x) for x in (int(r), v, e, int(c))])
    write_json(out / f"{prefix}_efc.json", _sidecar(doc, **est.sidecar(), outputs={"efc": csv_name}))
    _write_timing(out, prefix, "efc", started, 1)
    log.info("efc: C = %.6g, eta = %.6g, r2 = %.4f", est.fitted_C, est.fitted_eta, est.fit_r2)
    return EXIT_OK


def cmd_validate(doc: dict, out: Path, workers_flag: int | None) -> int:
    config = QuenchConfig.from_dict(doc)
    prefix, started = _prefix(doc, "validate"), time.time()
    report = validation.battery_from_config(config)
    write_json(out / f"{prefix}_validate.json", _sidecar(doc, report=report.to_dict()))
    _write_timing(out, prefix, "validate", started, 1)
    if not report.passed:
        log.error("invariant failures: %s", ", ".join(report.failing_invariants))
        return EXIT_INVARIANT
    return EXIT_OK


COMMANDS = {"run": cmd_run, "scan": cmd_scan, "efc": cmd_efc, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quench-entanglement", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in COMMANDS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, type=Path, help="JSON config document")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--workers", type=int, default=None, help=f"worker processes (default: ${harness.WORKERS_ENV} or 1)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        doc = load_document(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.verb](doc, args.out, args.workers)
    except (ConfigurationError, GeometryError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnstableEnsembleError as exc:
        print(f"ensemble error: {exc}", file=sys.stderr)
        return EXIT_ENSEMBLE


if __name__ == "__main__":
    sys.exit(main())
