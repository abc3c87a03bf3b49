"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--n 100000] [--J 1000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from w2fair import _kernels


def make_inputs(n, J, seed=0):
    rng = np.random.default_rng(seed)
    scores = rng.beta(2, 5, n)
    other = rng.beta(5, 2, n)
    eta = np.linspace(0.0, 1.0 + 1e-9, J + 1)
    return scores, other, eta


def cases(mod, scores, other, eta, batch):
    counts = mod.cdf_counts(scores, eta)
    levels = counts / scores.size
    other_levels = mod.cdf_counts(other, eta) / other.size
    taus = (np.arange(eta.size - 1) + 0.5) / (eta.size - 1)
    return {
        "cdf_counts": lambda: mod.cdf_counts(scores, eta),
        "locate_bins": lambda: mod.locate_bins(eta, batch),
        "inverse_levels": lambda: mod.inverse_levels(eta, levels, taus),
        "quantile_distance": lambda: mod.quantile_distance(eta, levels, other_levels, 2.0),
        "transport_terms": lambda: mod.transport_terms(eta, counts, scores.size, other_levels, batch, 0),
        "transport_coarse": lambda: mod.transport_terms(eta, counts, scores.size, other_levels, batch, 1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000, help="population size for the CDFs")
    ap.add_argument("--J", type=int, default=1000)
    ap.add_argument("--batch", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    scores, other, eta = make_inputs(args.n, args.J)
    batch = scores[: args.batch]
    backends = _kernels.available_backends()
    if len(backends) < 2:
        print("compiled backend not built; timing the numpy backend only")
    table = {}
    for name, mod in sorted(backends.items()):
        for op, fn in cases(mod, scores, other, eta, batch).items():
            number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            table.setdefault(op, {})[name] = best

    names = sorted(backends)
    print(f"n={args.n} J={args.J} batch={args.batch}")
    print(f"{'kernel':<20}" + "".join(f"{n + ' (us)':>16}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for op, row in table.items():
        line = f"{op:<20}" + "".join(f"{row[n] * 1e6:>16.1f}" for n in names)
        if len(names) > 1:
            line += f"{row['python'] / row['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
