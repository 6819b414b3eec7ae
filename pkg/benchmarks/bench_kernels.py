"""Time a head forward pass plus its batched VJP on each kernel backend.

    python3 benchmarks/bench_kernels.py [--threads N] [--repeat R]
"""

import argparse
import time

import numpy as np

from aevqc import kernels
from aevqc.head import AnsatzSpec, QuantumHead

CASES = [(6, 32), (10, 32), (12, 32), (15, 8)]


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    kernels.set_num_threads(args.threads)
    rng = np.random.default_rng(0)
    names = sorted(kernels.BACKENDS)
    print(f"threads={args.threads}  backends={names}")
    print(f"{'qubits':>6} {'batch':>5} {'ansatz':>6} " + " ".join(f"{n + ' [ms]':>14}" for n in names) + "  speedup")
    for n, batch in CASES:
        for family in ("a1", "a2"):
            head = QuantumHead(AnsatzSpec(family, n, 2), 2**n, rng=rng)
            raw = rng.normal(size=(batch, 2**n))
            up = rng.normal(size=(batch, n))
            ms = {}
            for name in names:
                with kernels.using(name):
                    ms[name] = 1e3 * best_time(lambda: (head.forward_rows(raw), head.vjp_rows(raw, up)), args.repeat)
            ratio = ms["python"] / ms["cython"] if "cython" in ms else float("nan")
            print(f"{n:>6} {batch:>5} {family:>6} " + " ".join(f"{ms[k]:>14.2f}" for k in names) + f"  {ratio:7.2f}x")


if __name__ == "__main__":
    main()
