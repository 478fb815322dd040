"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Two workloads: exhaustive linking over a batch of random structures (the
``feasible`` search dominates) and a full coalition scan on random forests.
"""

import argparse
import random
import time

from keylink import _kernels_py, kernels
from keylink.access import random_structure
from keylink.linker import exhaustive_link

try:
    from keylink import _kernels as compiled
except ImportError:
    compiled = None


def linking_batch():
    batch = []
    for seed in range(300):
        rng = random.Random(seed)
        n = rng.randint(3, 8)
        batch.append(random_structure(n, min(12, 2**n - 1), rng))
    return batch


def scan_batch():
    batch = []
    for seed in range(40):
        rng = random.Random(seed)
        n, m = 12, 40
        children = [0] * m
        for r in range(1, m):
            if rng.random() < 0.7:
                children[rng.randrange(r)] |= 1 << r
        stored = [rng.randrange(1 << m) for _ in range(n)]
        entitled = [rng.randrange(1 << m) for _ in range(n)]
        batch.append((stored, entitled, list(range(m)), children, n))
    return batch


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    structures = linking_batch()
    scans = scan_batch()
    backends = [("python", _kernels_py)] + ([("cython", compiled)] if compiled else [])
    rows = []
    for name, module in backends:
        kernels._compiled = module if module is compiled else None
        link_t = timed(lambda: [exhaustive_link(s) for s in structures], args.repeat)
        scan_t = timed(lambda: [module.scan_coalitions(*job) for job in scans], args.repeat)
        rows.append((name, link_t, scan_t))
    kernels._compiled = compiled

    print(f"{'backend':<8} {'exhaustive x300':>16} {'scan x40':>10}")
    for name, link_t, scan_t in rows:
        print(f"{name:<8} {link_t:>15.3f}s {scan_t:>9.3f}s")
    if len(rows) == 2:
        py, cy = rows
        print(f"speedup  {py[1] / cy[1]:>15.1f}x {py[2] / cy[2]:>9.1f}x")
    else:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
