"""Timing comparison of the ascent kernels: compiled extension vs batched numpy.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py

Both backends implement the same restart/backtracking schedule, so they visit
the same iterates and return the same maxima. The benchmark times the frame
ascent (rbc_max) and the vector ascent (quartic_vec_max) on curvature-like
random tensors at the batch sizes a field sweep actually produces.
"""
import argparse
import time

import numpy as np

from curvgap import kernels
from curvgap import _ascent_np


def haar_frames(rng, b, r, n):
    z = rng.standard_normal((b, r, n, n)) + 1j * rng.standard_normal((b, r, n, n))
    q, rr = np.linalg.qr(z)
    d = np.einsum("...ii->...i", rr)
    return q * (d / np.abs(d))[..., None, :]


def haar_vectors(rng, b, r, n):
    z = rng.standard_normal((b, r, n)) + 1j * rng.standard_normal((b, r, n))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def curvature_like(rng, b, n, scale=0.3):
    z = rng.standard_normal((b, n, n, n, n)) + 1j * rng.standard_normal((b, n, n, n, n))
    t = 0.5 * (z + z.conj().transpose(0, 2, 1, 4, 3))
    return scale * t


def timed(fn, *args, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=256, help="points per batch")
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if kernels.BACKEND != "compiled":
        print("compiled backend unavailable; timing numpy against itself "
              "(set up the extension build to get a real comparison)")
    compiled = kernels._impl if kernels.BACKEND == "compiled" else _ascent_np

    rng = np.random.default_rng(2024)
    b, r = args.batch, args.restarts
    print(f"batch={b} restarts={r} repeats={args.repeats}")
    print(f"{'kernel':<26}{'n':>3}{'numpy [s]':>12}{'compiled [s]':>14}"
          f"{'speedup':>9}{'max|dv|':>12}")

    for n in (2, 3):
        t = curvature_like(rng, b, n)
        frames = haar_frames(rng, b, r, n)
        t_np, out_np = timed(_ascent_np.rbc_max, t, frames, repeats=args.repeats)
        t_cy, out_cy = timed(compiled.rbc_max, t, frames, repeats=args.repeats)
        dv = float(np.max(np.abs(out_np[0] - out_cy[0])))
        print(f"{'rbc_max':<26}{n:>3}{t_np:>12.4f}{t_cy:>14.4f}"
              f"{t_np / t_cy:>9.1f}{dv:>12.2e}")

        a = np.einsum("mijkk->mij", t)
        a = 0.5 * (a + np.swapaxes(a, -1, -2).conj())
        vecs = haar_vectors(rng, b, r, n)
        t_np, out_np = timed(
            _ascent_np.quartic_vec_max, a, t, vecs, 1.0, 1.0, repeats=args.repeats)
        t_cy, out_cy = timed(
            compiled.quartic_vec_max, a, t, vecs, 1.0, 1.0, repeats=args.repeats)
        dv = float(np.max(np.abs(out_np[0] - out_cy[0])))
        print(f"{'quartic_vec_max (a=b=1)':<26}{n:>3}{t_np:>12.4f}{t_cy:>14.4f}"
              f"{t_np / t_cy:>9.1f}{dv:>12.2e}")


if __name__ == "__main__":
    main()
