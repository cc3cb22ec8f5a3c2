"""Benchmark the jitted kernels against the pure-numpy fallback.

Times the pmf kernels and the fused per-event-time likelihood kernel on
representative workload sizes and prints a comparison table. The numba
side is compiled (and disk-cached) on first call; compilation time is
excluded by warming up before timing.

Run:  python benchmarks/bench_backends.py
"""

import time

import numpy as np

from pbcox import _kernels_numpy as knp

try:
    from pbcox import _kernels_numba as knb
except ImportError:
    knb = None


def _apl_workload(rng, n, k):
    r = np.exp(rng.normal(0.0, 1.0, n))
    prefix = np.concatenate([[0.0], np.cumsum(r)])
    nj = np.linspace(n, max(2, n // 5), k).astype(np.int64)
    dj = np.maximum(1, (0.2 * nj).astype(np.int64))
    ev_off = np.concatenate([[0], np.cumsum(dj)]).astype(np.int64)
    ev_flat = np.concatenate(
        [rng.choice(nj[j], dj[j], replace=False) for j in range(k)]
    ).astype(np.int64)
    lam = rng.uniform(0.01, 0.2, k)
    return r, prefix, nj, dj, ev_flat, ev_off, lam


def bench(fn, args, repeat):
    fn(*args)  # warm-up / jit
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    rng = np.random.default_rng(0)
    cases = []
    for n in (50, 200, 1000):
        p = rng.uniform(0.0, 1.0, n)
        cases.append((f"pmf_conv            n={n:5d}", "pmf_conv", (p,), 200))
        cases.append((f"pmf_conv_prefix     n={n:5d} d={n // 5}", "pmf_conv_prefix",
                      (p, n // 5), 200))
        cases.append((f"pmf_dft_single      n={n:5d} d={n // 5}", "pmf_dft_single",
                      (p, n // 5), 50 if n >= 1000 else 200))
    cases.append(("apl_terms           n=  200 k=5", "apl_terms",
                  _apl_workload(rng, 200, 5), 200))
    cases.append(("apl_terms           n= 1000 k=40", "apl_terms",
                  _apl_workload(rng, 1000, 40), 50))

    header = f"{'workload':38s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for label, name, args, repeat in cases:
        t_np = bench(getattr(knp, name), args, repeat)
        if knb is None:
            print(f"{label:38s} {t_np * 1e6:10.1f}us {'n/a':>12s} {'n/a':>9s}")
            continue
        t_nb = bench(getattr(knb, name), args, repeat)
        print(f"{label:38s} {t_np * 1e6:10.1f}us {t_nb * 1e6:10.1f}us "
              f"{t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
