"""Time the numba and pure-numpy kernels on a typical likelihood evaluation.

Run ``python3 benchmarks/bench_kernels.py``. Each kernel is called on the
unique (arm, count) pairs of one simulated replication (n = 500), which is
what the fitters evaluate, or on ``--size`` raw observations. Both backends
are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from overdisp import kernels
from overdisp.quad import _rule
from overdisp.sim import CellConfig, generate_dataset
from overdisp.dist import NuDistribution
from overdisp.rng import RngStream


def _cases(size, m):
    cfg = CellConfig(NuDistribution.gamma(2.0), 0.3)
    data = generate_dataset(cfg, RngStream(1, cfg.stream_id, 0))
    if size:
        y = np.resize(data.y, size)
        arm = np.arange(size) % 2
    else:
        pairs = np.unique(np.column_stack([data.X[:, 1], data.y]), axis=0)
        arm, y = pairs[:, 0], pairs[:, 1].astype(np.int64)
    mu = np.where(arm > 0, 2.7, 2.0)
    t, lw2 = _rule(m)
    return y.size, {
        "lgamma": lambda b: b.lgamma_arr(y + 1.0),
        "poisson": lambda b: b.poisson_logpmf_arr(y, mu),
        "nb": lambda b: b.nb_logpmf_arr(y, mu, 0.5),
        "lognormal": lambda b: b.ln_logpmf_arr(y, np.log(mu), np.log(3.0), t, lw2),
        "invgauss": lambda b: b.ig_logpmf_arr(y, mu, 2.0, t, lw2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=0, help="0: unique pairs")
    ap.add_argument("--nodes", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if kernels.numba_backend is None:
        print("numba backend unavailable; timing numpy only")
    backends = [("numpy", kernels.numpy_backend)]
    if kernels.numba_backend is not None:
        backends.append(("numba", kernels.numba_backend))

    n, cases = _cases(args.size, args.nodes)
    print(f"evaluations = {n}, nodes = {args.nodes}")
    print(f"{'kernel':<10}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        ref = fn(kernels.numpy_backend)
        times = []
        for _, b in backends:
            out = fn(b)  # also triggers compilation
            np.testing.assert_allclose(out, ref, rtol=1e-10, atol=1e-10)
            number = 20
            best = min(timeit.repeat(lambda: fn(b), number=number, repeat=args.repeat)) / number
            times.append(best)
        cols = "".join(f"{t * 1e6:>11.1f} us" for t in times)
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{name:<10}{cols}{speed}")


if __name__ == "__main__":
    main()
