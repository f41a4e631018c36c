"""Time the numba and pure-numpy sweep kernels on the same transfer matrices.

    python3 benchmarks/bench_kernels.py [--b 40] [--repeat 5]

Prints one line per kernel with the best wall time of each backend, the
speed-up, and the largest entry-wise disagreement between the two results.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from weylpair import _kernels
from weylpair.model import ExpDecay, Problem
from weylpair.propagator import _initial_block, make_grid, matrix_system, transfer_matrices


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _gap(a, b):
    if isinstance(a, tuple):
        return max(_gap(x, y) for x, y in zip(a, b))
    if a is None or isinstance(a, (float, int)):
        return abs((a or 0.0) - (b or 0.0))
    a, b = np.asarray(a), np.asarray(b)
    if a.size == 0:
        return 0.0
    return float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--b", type=float, default=40.0, help="sweep length")
    ap.add_argument("--lam", type=complex, default=3 + 1j)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    p = Problem(potential=ExpDecay(amplitude=1 + 1j, rate=1.0), alpha=1 + 1j)
    sys = matrix_system(p)
    nodes = make_grid(sys, args.lam, args.b, p.step)
    T, h = transfer_matrices(sys, args.lam, nodes)
    Tr, _ = transfer_matrices(sys, args.lam, nodes, reverse=True)
    Y0 = _initial_block(sys)
    Yb = np.zeros((4, 2), complex)
    Yb[2:] = np.eye(2)

    cases = {
        "forward_sweep": lambda be: _kernels.forward_sweep(T, Y0, h, 2, True, None, backend=be)[:3],
        "backward_sweep": lambda be: _kernels.backward_sweep(Tr, Yb, keep=True, backend=be)[0],
        "gram_qr_sweep": lambda be: _kernels.gram_qr_sweep(T, Y0[:, :2], h, 2, backend=be),
    }
    print(f"steps={h.size}  numba available={_kernels.USE_NUMBA}")
    for name, fn in cases.items():
        fn("numba")  # compile outside the timing
        t_nb, r_nb = _best(lambda: fn("numba"), args.repeat)
        t_np, r_np = _best(lambda: fn("numpy"), args.repeat)
        print(f"{name:15s} numba {t_nb * 1e3:9.2f} ms  numpy {t_np * 1e3:9.2f} ms  "
              f"speed-up {t_np / t_nb:6.1f}x  rel diff {_gap(r_nb, r_np):.1e}")


if __name__ == "__main__":
    main()
