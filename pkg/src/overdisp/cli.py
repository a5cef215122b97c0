"""Command-line interface: ``overdisp fit | simulate | report``.

Exit status: 0 success, 1 usage or configuration error, 2 a fit did not
converge, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys

import numpy as np

from . import __version__, infer
from .config import cells_from_manifest, load_cells
from .errors import AuditFormatError, ConfigError, DegenerateDataError, OverdispError
from .infer import Dataset, FitOptions
from .quad import QuadratureSpec
from .sim import run_grid, summarize
from .tables import (TABLE_NAMES, build_tables, read_audit, render_all_markdown,
                     render_tsv, write_audit)

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "OVERDISP_OUT"
DEFAULT_OUT = "overdisp-out"
FIT_METHODS = ("POISSON",) + infer.METHODS
AUDIT_NAME = "audit.csv"
MANIFEST_NAME = "manifest.json"
MARKDOWN_NAME = "tables.md"


class UsageError(Exception):
    pass


# -- fit --------------------------------------------------------------------

def _split_names(values):
    out = []
    for v in values or ():
        out += [s.strip() for s in v.split(",") if s.strip()]
    return out


def read_csv_columns(path, response, covariates):
    """Response vector and design matrix (intercept first) from a CSV with a header."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file") from None
        except csv.Error as exc:
            raise UsageError(f"{path}:{reader.line_num}: {exc}") from None
        header = [h.strip() for h in header]
        for name in [response] + covariates:
            if name not in header:
                raise UsageError(f"{path}: no column {name!r} (have {', '.join(header)})")
        iy = header.index(response)
        ix = [header.index(c) for c in covariates]
        ys, xs = [], []
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise UsageError(f"{path}:{reader.line_num}: {exc}") from None
            line = reader.line_num
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise UsageError(f"{path}:{line}: expected {len(header)} fields, "
                                 f"got {len(row)}")
            try:
                yv = float(row[iy])
            except ValueError:
                raise UsageError(f"{path}:{line}: response {row[iy]!r} is not a number") from None
            if not (yv >= 0 and yv == math.floor(yv) and math.isfinite(yv)):
                raise UsageError(f"{path}:{line}: response {row[iy]!r} is not a "
                                 "nonnegative integer")
            try:
                xv = [float(row[i]) for i in ix]
            except ValueError as exc:
                raise UsageError(f"{path}:{line}: {exc}") from None
            ys.append(int(yv))
            xs.append(xv)
    if not ys:
        raise UsageError(f"{path}: no data rows")
    X = np.column_stack([np.ones(len(ys))] + [np.array(xs, dtype=float)[:, j]
                                              for j in range(len(covariates))])
    return np.array(ys, dtype=np.int64), X, ("intercept",) + tuple(covariates)


def format_fit(fit):
    lines = [f"Method {fit.method}: " + ("converged" if fit.converged else
                                         f"NOT converged ({fit.message})")]
    if fit.near_poisson:
        lines.append("  note: dispersion at the Poisson boundary; "
                     "standard errors hold it fixed")
    lines.append(f"  {'term':<14}{'estimate':>12}{'se':>12}{'z':>10}{'p':>12}")
    for j, name in enumerate(fit.names):
        est, se = float(fit.beta[j]), float(fit.se[j])
        try:
            z, p = infer.wald_p(fit, j)
            zs, ps = f"{z:.3f}", f"{p:.3g}"
        except ValueError:
            zs = ps = "NA"
        lines.append(f"  {name:<14}{est:>12.6f}{se:>12.6f}{zs:>10}{ps:>12}")
    if fit.dispersion is not None:
        lines.append(f"  dispersion: {fit.dispersion:.6f}")
    if fit.neg2_loglik is not None:
        lines.append(f"  -2 log L: {fit.neg2_loglik:.4f}")
    return "\n".join(lines)


def format_comparison(fits):
    rank = infer.compare_neg2ll(fits)
    lik = {f.method: f.neg2_loglik for f in fits}
    lines = ["Comparison by -2 log L (smaller is better):"]
    for i, m in enumerate(rank.order, start=1):
        lines.append(f"  {i}. {m:<4}{lik[m]:.4f}")
    missing = [f.method for f in fits if f.method not in rank.order]
    if missing:
        lines.append("  unavailable: " + ", ".join(missing))
    return "\n".join(lines)


def cmd_fit(args):
    methods = [m.upper() for m in _split_names(args.method)] or ["POISSON"]
    bad = [m for m in methods if m not in FIT_METHODS]
    if bad:
        raise UsageError(f"unknown method(s) {', '.join(bad)}; choose from "
                         f"{', '.join(FIT_METHODS)}")
    y, X, names = read_csv_columns(args.csv, args.response, _split_names(args.covariates))
    try:
        data = Dataset(y, X, names)
    except (DegenerateDataError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    options = _options(args)
    poisson = infer.fit_poisson(data, options)
    fits = [infer.fit(m, data, poisson, options) for m in dict.fromkeys(methods)]
    print(f"n = {data.n}, response = {args.response}")
    for f in fits:
        print(format_fit(f))
    lik = [f for f in fits if f.method in infer.LIKELIHOOD_METHODS]
    if len(lik) >= 2:
        print(format_comparison(lik))
    return EXIT_OK if all(f.converged for f in fits) else EXIT_NONCONVERGED


# -- simulate / report ------------------------------------------------------

def _options(args):
    if getattr(args, "quad_nodes", None) is None:
        return infer.DEFAULT_OPTIONS
    try:
        return FitOptions(quad=QuadratureSpec(node_count=args.quad_nodes))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args):
    return args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT


def write_tables(out, tables):
    for name in TABLE_NAMES:
        with open(os.path.join(out, f"{name}.tsv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(render_tsv(tables[name]))
    md = render_all_markdown(tables)
    with open(os.path.join(out, MARKDOWN_NAME), "w", encoding="utf-8") as fh:
        fh.write(md)
    return md


def cmd_simulate(args):
    if not args.config:
        raise UsageError("--config is required")
    path, cells = load_cells(args.config, args.seed, args.reps)
    quad_nodes = args.quad_nodes
    if quad_nodes is None and path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            quad_nodes = json.load(fh).get("quad_nodes")
    args.quad_nodes = quad_nodes
    options = _options(args)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    total = len(cells)
    done = {}

    def progress(cell, k):
        done[cell.key] = done.get(cell.key, 0) + k
        if done[cell.key] == cell.reps and not args.quiet:
            print(f"[{len(done)}/{total}] {cell.key}", file=sys.stderr)

    result = run_grid(cells, max(1, args.workers), options, progress=progress)
    order = [c.key for c in cells]
    with open(os.path.join(out, AUDIT_NAME), "w", encoding="utf-8", newline="") as fh:
        write_audit({k: result.records[k] for k in order if k in result.records}, fh)
    tables = build_tables(result.summaries, result.failures, order)
    md = write_tables(out, tables)
    manifest = {
        "tool": "overdisp", "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": os.path.abspath(path), "output_dir": os.path.abspath(out),
        "master_seed": sorted({c.master_seed for c in cells}),
        "quad_nodes": options.quad.node_count,
        "grid": [c.as_dict() for c in cells],
        "failures": result.failures,
    }
    with open(os.path.join(out, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    if not args.quiet:
        print(md)
    return EXIT_NUMERIC if result.failures else EXIT_OK


def cmd_report(args):
    with open(args.audit, encoding="utf-8", newline="") as fh:
        records = read_audit(fh)
    order, failures = list(records), {}
    manifest = os.path.join(os.path.dirname(os.path.abspath(args.audit)), MANIFEST_NAME)
    if os.path.exists(manifest):
        # recover grid order and failed cells from the run that wrote the audit
        with open(manifest, encoding="utf-8") as fh:
            data = json.load(fh)
        keys = [c.key for c in cells_from_manifest(data)]
        if set(records) <= set(keys):
            failures = {k: v for k, v in data.get("failures", {}).items() if k in keys}
            order = [k for k in keys if k in records or k in failures]
    summaries = {k: summarize(k, v) for k, v in records.items()}
    tables = build_tables(summaries, failures, order)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        md = write_tables(args.out, tables)
    else:
        md = render_all_markdown(tables)
    print(md)
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="overdisp",
                                description="Overdispersed Poisson regression and simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one or more methods to a CSV file")
    f.add_argument("csv")
    f.add_argument("--method", action="append",
                   help=f"one of {', '.join(FIT_METHODS)}; repeat or comma-separate")
    f.add_argument("--response", required=True)
    f.add_argument("--covariates", action="append", default=[],
                   help="covariate columns; an intercept is always added")
    f.add_argument("--quad-nodes", type=int)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a simulation grid")
    s.add_argument("--config", help="config file, shipped name, or manifest.json")
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or {DEFAULT_OUT})")
    s.add_argument("--seed", type=int, help="override the master seed of every cell")
    s.add_argument("--reps", type=int, help="override the replication count of every cell")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--quad-nodes", type=int)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="rebuild tables from an audit CSV")
    r.add_argument("audit")
    r.add_argument("--out", help="also write TSV and Markdown tables here")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError, AuditFormatError, DegenerateDataError, OSError) as exc:
        print(f"overdisp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OverdispError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"overdisp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
