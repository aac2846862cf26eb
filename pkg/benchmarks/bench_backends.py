"""Side-by-side timing of the jitted and pure-numpy kernels.

Usage:
    python3 benchmarks/bench_backends.py [--repeats N]

Each kernel runs on a representative workload: projections at quadratic-model
width, a full multi-start tune on a 20/20 cohort for both model kinds, and
one training pass of each loss over the cohort's pair and triplet sets.
Reported numbers are the best wall time over N repeats, after one untimed
warmup call so jit compilation never counts.
"""

import argparse
import time

import numpy as np

from aqindex import qp
from aqindex.backend import available_backends, get_backend
from aqindex.cohort import (
    SyntheticSpec,
    generate,
    make_pairs,
    make_triplets,
    pair_arrays,
    triplet_arrays,
)
from aqindex.regression import M1, M2
from aqindex.siamese import SiameseNet, TrainConfig, train_contrastive


def best_of(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def build_cases():
    cohort = generate(SyntheticSpec(n_pos=20, n_neg=20, rng_seed=42))
    x_a, x_b, y = pair_arrays(make_pairs(cohort))
    t_a, t_p, t_n = triplet_arrays(make_triplets(cohort))
    rng = np.random.default_rng(0)
    v252 = rng.normal(size=252)
    lo, hi = np.zeros(252), np.ones(252)
    form1, cons1 = qp.assemble(cohort, M1)
    form2, cons2 = qp.assemble(cohort, M2)
    net = SiameseNet.init(seed=1)
    big_batch = rng.uniform(size=(2000, 21))

    def cases(backend):
        kb = get_backend(backend)
        cfg = qp.OptimizerConfig()
        return [
            ("simplex projection (n=252)",
             lambda: kb.project_bounded_simplex(v252, lo, hi)),
            ("isotonic projection (n=252)",
             lambda: kb.isotonic_non_increasing(v252)),
            ("dykstra projection (n=252)",
             lambda: kb.dykstra_project(v252, lo, hi, None,
                                        np.abs(v252), 1e-11, 5000)),
            ("tune linear model, 20/20 cohort",
             lambda: qp.solve(form1, cons1, cfg, backend=kb)),
            ("tune quadratic model, 20/20 cohort",
             lambda: qp.solve(form2, cons2, cfg, backend=kb)),
            ("score 2000 vectors through the net",
             lambda: net.score(big_batch, backend=kb)),
            ("contrastive training, 20 epochs",
             lambda: train_contrastive(net, x_a, x_b, y,
                                       TrainConfig(epochs=20), backend=kb)),
        ]

    return cases


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    cases = build_cases()
    names = available_backends()
    results = {}
    for backend in names:
        for label, fn in cases(backend):
            results.setdefault(label, {})[backend] = best_of(fn, args.repeats)

    width = max(len(label) for label in results)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{n:>12}" for n in names)
    if len(names) > 1:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, times in results.items():
        row = f"{label:<{width}}  "
        row += "  ".join(f"{times[n] * 1e3:>10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"  {times[names[-1]] / times[names[0]]:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
