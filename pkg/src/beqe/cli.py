"""Command-line runner: sweeps, per-mode profiles and figure presets, written as CSV."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import PRESETS, ConfigError, RunManifest, parse_config, preset
from .cycle import run_cycle, sweep_tau
from .tim import mode_gap

log = logging.getLogger("beqe")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 0, 2, 3, 4
SWEEP_COLUMNS = ("variant", "tau", "W", "abs_W", "eta", "P", "Q_in", "Q_out")
MODE_COLUMNS = ("k", "gap_h1", "gap_h2", "Q_in_k", "Q_out_k", "W_k", "engine_mode", "frozen_hot", "frozen_cold")
ERROR_MARK = "error"


def fmt(x) -> str:
    """12 significant digits, scientific, independent of locale."""
    if isinstance(x, bool):
        return "1" if x else "0"
    return format(float(x), ".11e")


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def sweep_table(manifest: RunManifest, workers: int = 1):
    """Rows of the sweep CSV and the number of failed rows."""
    rows, failures = [], 0
    for s in manifest.series:
        for row in sweep_tau(s.config, manifest.tau_grid, s.variants, workers=workers):
            label = f"{row.variant}[{s.tag}]" if s.tag else row.variant
            if not row.ok:
                failures += 1
                log.error("%s at tau=%g failed: %s", label, row.tau, row.error)
                rows.append([label, fmt(row.tau)] + [ERROR_MARK] * 6)
                continue
            r = row.result
            rows.append([label, fmt(row.tau), fmt(r.W), fmt(abs(r.W)), fmt(r.eta), fmt(r.P),
                         fmt(r.Q_in), fmt(r.Q_out)])
    return rows, failures


def mode_tables(manifest: RunManifest):
    """Per-mode profile for every (series, variant) at the first grid duration."""
    tau = manifest.tau_grid[0]
    out = {}
    for s in manifest.series:
        if s.config.model != "tim":
            raise ConfigError("model", "mode profiles exist only for the tim model")
        for v in s.variants:
            cfg = replace(s.config, variant=v, tau1=tau, tau2=tau)
            res = run_cycle(cfg)
            rows = [[fmt(m.k), fmt(mode_gap(m.k, cfg.h1)), fmt(mode_gap(m.k, cfg.h2)), fmt(m.Q_in),
                     fmt(m.Q_out), fmt(m.W), fmt(m.engine_mode), fmt(m.frozen_hot), fmt(m.frozen_cold)]
                    for m in res.per_mode]
            out[s.label(v)] = rows
    return out


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in label).strip("_")


def run_manifest(manifest: RunManifest, out_dir, workers: int = 1, products=None) -> int:
    """Compute every product of ``manifest`` and write CSVs into ``out_dir``; returns an exit code."""
    products = products or manifest.products
    files = {}
    failures = 0
    try:
        if "sweep" in products:
            rows, failures = sweep_table(manifest, workers)
            files[f"{manifest.name}_sweep.csv"] = _csv_text(SWEEP_COLUMNS, rows)
        if "modes" in products:
            for label, rows in mode_tables(manifest).items():
                files[f"{manifest.name}_modes_{_safe(label)}.csv"] = _csv_text(MODE_COLUMNS, rows)
    except ConfigError:
        raise
    except Exception as exc:
        log.error("computation failed: %s: %s", type(exc).__name__, exc)
        return EXIT_COMPUTE
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8")
            log.info("wrote %s", out / name)
    except OSError as exc:
        log.error("could not write output: %s", exc)
        return EXIT_IO
    return EXIT_COMPUTE if failures else EXIT_OK


def _load(path) -> RunManifest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beqe", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--workers", type=int, default=1, help="parallel processes for tau points")

    sp = sub.add_parser("sweep", help="run a tau sweep from a config document")
    sp.add_argument("config")
    common(sp)
    sp = sub.add_parser("modes", help="write per-mode profiles at the first grid tau")
    sp.add_argument("config")
    sp.add_argument("--out", default=".")
    sp = sub.add_parser("preset", help="run a figure preset")
    sp.add_argument("name", choices=PRESETS)
    common(sp)
    sp = sub.add_parser("validate", help="check a config document without running it")
    sp.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "preset":
            return run_manifest(preset(args.name), args.out, workers=max(1, args.workers))
        manifest = _load(args.config)
        if args.command == "validate":
            print(f"ok: {manifest.name}: {len(manifest.tau_grid)} tau points, "
                  f"variants {', '.join(manifest.variants)}; products {', '.join(manifest.products)}")
            return EXIT_OK
        if args.command == "sweep":
            return run_manifest(manifest, args.out, workers=max(1, args.workers), products=("sweep",))
        return run_manifest(manifest, args.out, products=("modes",))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
