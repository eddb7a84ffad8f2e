"""Compare the compiled and numpy kernel backends on forward+backward.

    python benchmarks/bench_kernels.py [--size 65536] [--repeats 11] [--kind sigmoid]

Prints one row per N with the median seconds of each backend and the ratio.
"""

import argparse

from fracact import kernels
from fracact.activations import ActivationSpec
from fracact.bench import time_forward_backward


def run(size, repeats, kind, n_list):
    backends = kernels.available_backends()
    prev = kernels.get_backend()
    rows = []
    try:
        for N in n_list:
            spec = ActivationSpec(kind, fractional=True, order=0.6, terms=N)
            t = {}
            for b in backends:
                kernels.set_backend(b)
                t[b] = time_forward_backward(spec, size, repeats=repeats)
            rows.append((N, t))
    finally:
        kernels.set_backend(prev)
    return backends, rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=65536)
    p.add_argument("--repeats", type=int, default=11)
    p.add_argument("--kind", default="sigmoid")
    p.add_argument("--n-list", default="1,2,4,8,16")
    args = p.parse_args(argv)
    n_list = [int(v) for v in args.n_list.split(",")]
    backends, rows = run(args.size, args.repeats, args.kind, n_list)
    head = f"{'N':>3} " + " ".join(f"{b + ' [ms]':>14}" for b in backends)
    if len(backends) == 2:
        head += f" {'python/cython':>14}"
    print(f"kind={args.kind} size={args.size} repeats={args.repeats}")
    print(head)
    for N, t in rows:
        line = f"{N:>3} " + " ".join(f"{t[b] * 1e3:>14.3f}" for b in backends)
        if len(backends) == 2:
            line += f" {t['python'] / t['cython']:>14.2f}"
        print(line)
    if len(backends) == 1:
        print("compiled extension not available; only the numpy backend was timed")


if __name__ == "__main__":
    main()
