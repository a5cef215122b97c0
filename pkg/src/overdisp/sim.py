"""Monte Carlo comparison of the five estimators.

One *cell* fixes the frailty law, its parameter, the treatment effect and the
sample size. Each replication draws a two-arm dataset (first half control,
second half treated), fits every requested method, and stores one record per
method. Summaries are computed from the records alone, in replication order,
so they are reproducible from an audit file and independent of scheduling.
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import infer
from .dist import NuDistribution, Variant, parse_variant, sample_nu, sample_poisson
from .errors import ConfigError, OverdispError
from .infer import Dataset, FitOptions
from .quad import QuadratureSpec
from .rng import RngStream

ALPHA_LEVEL = 0.05
LOW_CONVERGENCE = 0.95
PAIRS = {
    Variant.GAMMA: (("GM", "LN"), ("GM", "IG")),
    Variant.LOGNORMAL: (("LN", "GM"), ("LN", "IG")),
    Variant.INVGAUSS: (("IG", "GM"), ("IG", "LN")),
}


@dataclass(frozen=True)
class CellConfig:
    nu: NuDistribution
    beta1: float
    n: int = 500
    reps: int = 500
    beta0: float = 0.693
    master_seed: int = 0
    methods: tuple = infer.METHODS

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ConfigError(f"n must be even and >= 4, got {self.n}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        methods = tuple(m.upper() for m in self.methods)
        if not methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in methods if m not in infer.METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        object.__setattr__(self, "methods", tuple(m for m in infer.METHODS if m in methods))
        object.__setattr__(self, "beta1", float(self.beta1))
        object.__setattr__(self, "beta0", float(self.beta0))

    @property
    def key(self):
        """Stable text id, also used as ``cell_id`` in audit files."""
        return (f"{self.nu.variant.value}:{self.nu.param!r}:{self.beta1!r}"
                f":{self.n}:{self.beta0!r}")

    @property
    def stream_id(self):
        """Integer fed to the RNG mixer: CRC-32 of :attr:`key`."""
        return zlib.crc32(self.key.encode("ascii"))

    def as_dict(self):
        return {"distribution": self.nu.variant.value, "parameter": self.nu.param,
                "beta1": self.beta1, "beta0": self.beta0, "n": self.n, "reps": self.reps,
                "seed": self.master_seed, "methods": list(self.methods)}


def parse_cell_key(key):
    """Inverse of :attr:`CellConfig.key`; None when ``key`` is not of that form."""
    parts = str(key).split(":")
    if len(parts) != 5:
        return None
    try:
        return {"distribution": parse_variant(parts[0]), "parameter": float(parts[1]),
                "beta1": float(parts[2]), "n": int(parts[3]), "beta0": float(parts[4])}
    except (ValueError, OverdispError):
        return None


def generate_dataset(cfg: CellConfig, rng: RngStream) -> Dataset:
    half = cfg.n // 2
    x = np.concatenate([np.zeros(half), np.ones(cfg.n - half)])
    y = np.empty(cfg.n, dtype=np.int64)
    base = (math.exp(cfg.beta0), math.exp(cfg.beta0 + cfg.beta1))
    for j in range(cfg.n):
        nu = sample_nu(cfg.nu, rng)
        y[j] = sample_poisson(nu * base[int(x[j])], rng)
    return Dataset(y, np.column_stack([np.ones(cfg.n), x]), ("intercept", "treatment"))


@dataclass(frozen=True)
class Record:
    cell_id: str
    rep: int
    method: str
    beta1_hat: float
    se: float
    p: float
    neg2ll: float
    converged: bool


def run_replication(cfg: CellConfig, rep: int, options: FitOptions = infer.DEFAULT_OPTIONS):
    rng = RngStream(cfg.master_seed, cfg.stream_id, rep)
    data = generate_dataset(cfg, rng)
    out = []
    try:
        pois = infer.fit_poisson(data, options)
    except OverdispError:
        pois = None
    for method in cfg.methods:
        nan = math.nan
        try:
            if pois is None:
                raise infer.DegenerateDataError("Poisson start failed")
            fit = infer.fit(method, data, pois, options)
            if not fit.converged:
                raise infer.DegenerateDataError(fit.message)
            _, pval = infer.wald_p(fit, 1)
            n2 = fit.neg2_loglik if fit.neg2_loglik is not None else nan
            out.append(Record(cfg.key, rep, method, float(fit.beta[1]), float(fit.se[1]),
                              float(pval), float(n2), True))
        except (OverdispError, ValueError, ArithmeticError):
            out.append(Record(cfg.key, rep, method, nan, nan, nan, nan, False))
    return out


def _run_chunk(args):
    cfg, reps, options = args
    recs = []
    for r in reps:
        recs.extend(run_replication(cfg, r, options))
    return recs


# -- summaries --------------------------------------------------------------

@dataclass
class MethodSummary:
    rejection_rate: float
    mean_bias: float
    mean_se: float
    sd_of_estimates: float
    convergence_rate: float
    n_converged: int


@dataclass
class CellSummary:
    cell_id: str
    beta1: float | None
    variant: Variant | None
    parameter: float | None
    reps: int
    methods: dict = field(default_factory=dict)
    choice: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return any(m.convergence_rate < LOW_CONVERGENCE for m in self.methods.values())


def mc_tolerance(p, reps):
    """95% Monte Carlo half-width of a rate estimated from ``reps`` trials."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    return 1.96 * math.sqrt(p * (1.0 - p) / reps)


def summarize(cell_id, records, alpha=ALPHA_LEVEL) -> CellSummary:
    """Aggregate records of one cell. Only converged replications enter a method's rates."""
    meta = parse_cell_key(cell_id)
    beta1 = meta["beta1"] if meta else None
    variant = meta["distribution"] if meta else None
    records = sorted(records, key=lambda r: (r.rep, infer.METHODS.index(r.method)
                                              if r.method in infer.METHODS else 99, r.method))
    reps = sorted({r.rep for r in records})
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    summ = CellSummary(cell_id, beta1, variant, meta["parameter"] if meta else None, len(reps))
    for method, recs in by_method.items():
        ok = [r for r in recs if r.converged]
        k = len(ok)
        if k:
            est = np.array([r.beta1_hat for r in ok])
            pv = np.array([r.p for r in ok])
            ses = np.array([r.se for r in ok])
            rej = float(np.sum(pv < alpha)) / k
            bias = float(np.mean(est)) - beta1 if beta1 is not None else math.nan
            mse = float(np.mean(ses))
            sd = float(np.std(est, ddof=1)) if k > 1 else 0.0
        else:
            rej = bias = mse = sd = math.nan
        summ.methods[method] = MethodSummary(rej, bias, mse, sd, k / len(recs), k)
    if variant is not None:
        n2 = {}
        for r in records:
            if r.converged and math.isfinite(r.neg2ll):
                n2[(r.rep, r.method)] = r.neg2ll
        for a, b in PAIRS[variant]:
            both = [rep for rep in reps if (rep, a) in n2 and (rep, b) in n2]
            if both:
                wins = sum(1 for rep in both if n2[(rep, a)] < n2[(rep, b)])
                summ.choice[(a, b)] = wins / len(both)
    return summ


def run_cell(cfg: CellConfig, workers=1, options: FitOptions = infer.DEFAULT_OPTIONS):
    """Run every replication of one cell; returns (summary, records)."""
    records = run_grid_records([cfg], workers, options)[cfg.key]
    return summarize(cfg.key, records), records


def run_grid_records(cells, workers=1, options: FitOptions = infer.DEFAULT_OPTIONS,
                     chunk=25, progress=None):
    """Records per cell key, each list sorted by (rep, method order)."""
    keys = [c.key for c in cells]
    if len(set(keys)) != len(keys):
        raise ConfigError("duplicate cells in grid")
    tasks = [(c, tuple(range(s, min(s + chunk, c.reps))), options)
             for c in cells for s in range(0, c.reps, chunk)]
    results = {k: [] for k in keys}
    if workers <= 1:
        chunks = map(_run_chunk, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        chunks = pool.map(_run_chunk, tasks)
    try:
        for task, recs in zip(tasks, chunks):
            results[task[0].key].extend(recs)
            if progress is not None:
                progress(task[0], len(task[1]))
    finally:
        if workers > 1:
            pool.shutdown()
    order = {m: i for i, m in enumerate(infer.METHODS)}
    for k in keys:
        results[k].sort(key=lambda r: (r.rep, order[r.method]))
    return results


@dataclass
class GridResult:
    cells: list
    summaries: dict
    records: dict
    failures: dict


def run_grid(cells, workers=1, options: FitOptions = infer.DEFAULT_OPTIONS, progress=None):
    if not cells:
        raise ConfigError("empty grid")
    records, failures = {}, {}
    try:
        records = run_grid_records(cells, workers, options, progress=progress)
    except ConfigError:
        raise
    except Exception:
        # isolate the failing cell(s) and keep the rest
        for c in cells:
            try:
                records.update(run_grid_records([c], 1, options))
            except Exception as exc:  # noqa: BLE001 - reported in the tables
                failures[c.key] = f"{type(exc).__name__}: {exc}"
    summaries = {k: summarize(k, v) for k, v in records.items()}
    return GridResult(list(cells), summaries, records, failures)


def paper_grid(master_seed=0, n=500, reps=500, beta0=0.693):
    """The 45-cell grid: 3 frailty laws x 5 matched variances x beta1 in {0, .3, .5}."""
    cells = []
    for c in (0.5, 1.0, 2.0, 4.0, 6.0):
        cells.append(NuDistribution.gamma(c))
    for s2 in (0.405, 0.693, 1.098, 1.609, 1.946):
        cells.append(NuDistribution.lognormal(s2))
    for a in (0.5, 1.0, 2.0, 4.0, 6.0):
        cells.append(NuDistribution.invgauss(a))
    return [CellConfig(nu, b1, n, reps, beta0, master_seed)
            for nu in cells for b1 in (0.0, 0.3, 0.5)]


__all__ = ["CellConfig", "CellSummary", "MethodSummary", "Record", "GridResult",
           "RngStream", "QuadratureSpec", "generate_dataset", "run_replication", "run_cell",
           "run_grid", "run_grid_records", "summarize", "mc_tolerance", "paper_grid",
           "parse_cell_key", "PAIRS"]
