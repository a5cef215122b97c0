"""Audit-file I/O and the five summary tables (TSV and Markdown).

Number formats are fixed: rates with 3 decimals, estimates (bias, standard
errors, SDs) with 4 decimals, missing values as ``NA``.
"""
from __future__ import annotations

import csv
import io
import math

from .errors import AuditFormatError
from .infer import METHODS
from .sim import PAIRS, CellSummary, Record, parse_cell_key, summarize

AUDIT_COLUMNS = ("cell_id", "rep", "method", "beta1_hat", "se", "p", "neg2ll", "converged")
AUDIT_VERSION = 1
TABLE_NAMES = ("type1", "bias", "se", "power", "choice")
TABLE_TITLES = {
    "type1": "Type I error rates (beta1 = 0)",
    "bias": "Mean bias of beta1 estimates",
    "se": "Mean standard error of beta1 (SD of estimates)",
    "power": "Empirical power",
    "choice": "Rates of choosing the true model by -2 log likelihood",
}


# -- audit ------------------------------------------------------------------

def _fmt_float(x):
    return "nan" if math.isnan(x) else repr(float(x))


def write_audit(records_by_cell, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(AUDIT_COLUMNS)
    for recs in records_by_cell.values():
        for r in recs:
            w.writerow([r.cell_id, r.rep, r.method, _fmt_float(r.beta1_hat), _fmt_float(r.se),
                        _fmt_float(r.p), _fmt_float(r.neg2ll), int(r.converged)])


def read_audit(fh):
    """Records grouped by cell id, cells in order of first appearance."""
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise AuditFormatError("empty audit file") from None
    if tuple(h.strip() for h in header) != AUDIT_COLUMNS:
        raise AuditFormatError(
            f"audit format v{AUDIT_VERSION} expects columns {','.join(AUDIT_COLUMNS)}; "
            f"got {','.join(header)}")
    out = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(AUDIT_COLUMNS):
            raise AuditFormatError(f"line {lineno}: expected {len(AUDIT_COLUMNS)} fields")
        try:
            rec = Record(row[0], int(row[1]), row[2].strip().upper(), float(row[3]),
                         float(row[4]), float(row[5]), float(row[6]),
                         bool(int(row[7])))
        except ValueError as exc:
            raise AuditFormatError(f"line {lineno}: {exc}") from None
        out.setdefault(rec.cell_id, []).append(rec)
    return out


def summaries_from_audit(fh):
    return {k: summarize(k, v) for k, v in read_audit(fh).items()}


# -- tables -----------------------------------------------------------------

def _rate(x):
    return "NA" if x is None or math.isnan(x) else f"{x:.3f}"


def _est(x):
    return "NA" if x is None or math.isnan(x) else f"{x:.4f}"


def _num(x):
    return "NA" if x is None else format(x, "g")


def _note(s: CellSummary):
    if s.flagged:
        worst = min(m.convergence_rate for m in s.methods.values())
        return f"low convergence ({worst:.3f})"
    return ""


def _conv(s: CellSummary):
    if not s.methods:
        return "NA"
    return _rate(min(m.convergence_rate for m in s.methods.values()))


def _method(s, m, attr):
    ms = s.methods.get(m) if s is not None else None
    return None if ms is None else getattr(ms, attr)


def build_tables(summaries, failures=None, order=None):
    """Rows for each table as lists of strings (first row is the header)."""
    failures = failures or {}
    keys = list(order) if order is not None else list(summaries) + [
        k for k in failures if k not in summaries]
    head = ["distribution", "parameter"]
    t = {
        "type1": [head + list(METHODS) + ["convergence", "note"]],
        "bias": [head + ["beta1"] + list(METHODS) + ["convergence", "note"]],
        "se": [head + ["beta1"] + [f"{m}_{x}" for m in METHODS for x in ("se", "sd")]
               + ["convergence", "note"]],
        "power": [head + ["beta1"] + list(METHODS) + ["convergence", "note"]],
        "choice": [head + ["beta1", "pair_1", "rate_1", "pair_2", "rate_2", "note"]],
    }
    metas = {k: parse_cell_key(k) for k in keys}
    # the SE table shows only beta1 = 0.3 when the grid has it (SEs barely move with beta1)
    se_only = 0.3 if any(m and m["beta1"] == 0.3 for m in metas.values()) else None
    for key in keys:
        s = summaries.get(key)
        meta = metas[key]
        dist = meta["distribution"].value if meta else key
        param = _num(meta["parameter"]) if meta else "NA"
        b1 = meta["beta1"] if meta else None
        if s is None:
            note = "missing: " + failures.get(key, "no records")
            conv = "NA"
        else:
            note = _note(s)
            conv = _conv(s)
        rates = [_rate(_method(s, m, "rejection_rate")) for m in METHODS]
        if b1 == 0.0:
            t["type1"].append([dist, param] + rates + [conv, note])
            continue
        b1s = _num(b1)
        t["power"].append([dist, param, b1s] + rates + [conv, note])
        if b1 is None:
            continue
        t["bias"].append([dist, param, b1s] + [_est(_method(s, m, "mean_bias")) for m in METHODS]
                         + [conv, note])
        if se_only is None or b1 == se_only:
            se_cells = []
            for m in METHODS:
                se_cells += [_est(_method(s, m, "mean_se")),
                             _est(_method(s, m, "sd_of_estimates"))]
            t["se"].append([dist, param, b1s] + se_cells + [conv, note])
        pairs = PAIRS[meta["distribution"]]
        row = [dist, param, b1s]
        for a, b in pairs:
            rate = s.choice.get((a, b)) if s is not None else None
            row += [f"{a}>{b}", _rate(rate)]
        t["choice"].append(row + [note])
    return t


def render_tsv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def render_markdown(rows, title=None):
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines.append("| " + " | ".join(rows[0]) + " |")
    lines.append("|" + "|".join("---" for _ in rows[0]) + "|")
    for r in rows[1:]:
        lines.append("| " + " | ".join(r) + " |")
    return "\n".join(lines) + "\n"


def render_all_markdown(tables):
    return "\n".join(render_markdown(tables[name], TABLE_TITLES[name]) for name in TABLE_NAMES)
