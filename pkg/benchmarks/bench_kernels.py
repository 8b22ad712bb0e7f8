"""Time the compiled and numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time per backend and checks that both
backends return identical arrays.
"""
import argparse
import time

import numpy as np

from conformal_lab import kernels
from conformal_lab.expr import parse
from conformal_lab.separation import all_words, features

Q_MAPS = ("0.1*x^2+0.3*x+0.05", "0.1*x^2+0.3*x+0.55")


def _program(maps):
    return kernels.combine([parse(m).program for m in maps])


def cases():
    prog = _program(Q_MAPS)
    words = np.asarray(all_words(2, 12), dtype=np.int64)
    lengths = np.full(len(words), 12, dtype=np.int64)
    xs = np.linspace(0.0, 1.0, 20001)
    los = np.zeros(len(words))
    his = np.ones(len(words))
    from conformal_lab.ifs import validate_ifs
    feats = features(validate_ifs(Q_MAPS), all_words(2, 10))
    return {
        "point_chain (20001 pts, length 40)": lambda impl: kernels.point_chain(
            prog, [0, 1] * 20, xs, impl=impl),
        "log_derivative_chain (4096 words)": lambda impl: kernels.log_derivative_chain(
            prog, words, lengths, impl=impl),
        "interval_chain_words (4096 words)": lambda impl: kernels.interval_chain_words(
            prog, words, lengths, los, his, impl=impl),
        "cut_set (level 14)": lambda impl: kernels.cut_set(prog, [0.5, 0.5], 14, 10 ** 7,
                                                           impl=impl),
        "chebyshev_min (1024 words)": lambda impl: kernels.chebyshev_min(feats, impl=impl),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"{'kernel':40s}" + "".join(f"{n:>12s}" for n in names) + "   speedup  identical")
    for label, fn in cases().items():
        best, results = {}, {}
        for n in names:
            times = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                results[n] = fn(backends[n])
                times.append(time.perf_counter() - t0)
            best[n] = min(times)
        row = f"{label:40s}" + "".join(f"{best[n] * 1e3:10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"{best['python'] / best['cython']:9.1f}x"
            row += f"  {_same(results['python'], results['cython'])!s:>9s}"
        print(row)


if __name__ == "__main__":
    main()
