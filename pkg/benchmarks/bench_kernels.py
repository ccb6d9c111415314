"""Time the compiled and pure-numpy kernel backends on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]
"""
import argparse
import timeit

import numpy as np

from nftdrain import kernels


def _cases(scale, rng):
    n_edges, n_seg, d = int(200_000 * scale), int(20_000 * scale), 64
    seg = rng.integers(0, n_seg, n_edges).astype(np.intp)
    vals = rng.normal(size=(n_edges, d))
    scores = rng.normal(size=(n_edges, 8))
    A, B = rng.normal(size=(n_seg, d)), rng.normal(size=(5_000, d))
    ia = rng.integers(0, n_seg, n_edges).astype(np.intp)
    ib = rng.integers(0, 5_000, n_edges).astype(np.intp)
    n_svm = int(1_500 * scale)
    X = rng.normal(size=(n_svm, 20))
    y = np.where(X[:, 0] + 0.7 * rng.normal(size=n_svm) > 0, 1.0, -1.0)
    sq = (X ** 2).sum(1)
    K = np.exp(-0.05 * (sq[:, None] + sq[None, :] - 2 * X @ X.T))
    return {
        "segment_sum": lambda m: m.segment_sum(vals, seg, n_seg),
        "segment_softmax": lambda m: m.segment_softmax(scores, seg, n_seg),
        "gather_rowdot": lambda m: m.gather_rowdot(A, ia, B, ib),
        "smo_solve": lambda m: m.smo_solve(K, y, 0.1, 1e-3, 10_000_000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is reported)")
    ap.add_argument("--scale", type=float, default=1.0, help="problem-size multiplier")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")
    cases = _cases(args.scale, np.random.default_rng(args.seed))
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        best = {b: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
                for b, mod in backends.items()}
        speed = f"{best['python'] / best['cython']:>9.1f}x" if "cython" in best else ""
        print(f"{name:<16}" + "".join(f"{best[b] * 1e3:>10.1f}ms" for b in backends) + speed)


if __name__ == "__main__":
    main()
