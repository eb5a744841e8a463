"""Benchmark the numba loop kernels against their numpy counterparts.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is called once
to trigger compilation, then timed over ``--repeats`` calls; both variants
are also checked for agreement on the same inputs.
"""

import argparse
import time

import numpy as np

from asqchain import kernels
from asqchain._accel import HAS_NUMBA
from asqchain.coupling import spin_configurations


def best_of(fn, args, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def cases(rng, size):
    n = 12
    e_so = rng.uniform(0.1, 0.5, n)
    e_j_asq = rng.uniform(0.0, 0.5, n)
    fluxes = rng.uniform(0.0, 1.0, (size, n))
    yield "coupling_matrices", (e_so, e_j_asq, 10.0, fluxes)

    yield "walsh_coefficients", (rng.normal(size=1 << 16),)

    nq = 16
    pairs = rng.normal(size=(nq, nq)) * 1e-3
    pairs = np.triu(pairs, 1) + np.triu(pairs, 1).T
    triples = np.array([(i, i + 1, i + 2) for i in range(nq - 2)], dtype=np.int64)
    yield "diagonal_energies", (nq, rng.normal(size=nq), pairs, triples, rng.normal(size=nq - 2) * 1e-5)

    nq = 8
    spins = spin_configurations(nq).astype(float)
    theta = 2 * np.pi * rng.uniform(size=nq)
    yield "oracle_minima", (
        10.0, rng.uniform(0, 0.05, nq), rng.uniform(0, 0.05, nq), np.zeros(nq), theta, spins, 1e-12
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=20000, help="flux vectors in the coupling batch")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("numba is not installed; only the numpy kernels can run")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<20} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max |diff|':>11}")
    for name, inputs in cases(rng, args.size):
        ref_fn = getattr(kernels, f"{name}_numpy")
        loop_fn = getattr(kernels, f"{name}_loops")
        t_np, ref = best_of(ref_fn, inputs, args.repeats)
        if not HAS_NUMBA:
            print(f"{name:<20} {t_np * 1e3:11.3f} {'-':>11} {'-':>8} {'-':>11}")
            continue
        loop_fn(*inputs)  # compile
        t_nb, got = best_of(loop_fn, inputs, args.repeats)
        ref0, got0 = (ref[0], got[0]) if isinstance(ref, tuple) else (ref, got)
        diff = float(np.nanmax(np.abs(np.asarray(ref0) - np.asarray(got0))))
        print(f"{name:<20} {t_np * 1e3:11.3f} {t_nb * 1e3:11.3f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
