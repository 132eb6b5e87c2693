"""Time the compiled and pure-numpy blur kernels on the same inputs.

    python benchmarks/bench_warp.py [--size 5 5 64 64] [--poses 8] [--repeat 3]

Prints per-backend best-of-N wall time, the speedup, and whether the two
outputs are bit-identical.
"""

import argparse
import time

import numpy as np

from lfdeblur import _warp_py
from lfdeblur.blur import pose_terms
from lfdeblur.lightfield import Intrinsics
from lfdeblur.motion import make_random_trajectory, sample_poses

try:
    from lfdeblur import _warp_ext
except ImportError:
    _warp_ext = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, nargs=4, default=[5, 5, 64, 64], metavar=("U", "V", "H", "W"))
    ap.add_argument("--poses", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    U, V, H, W = args.size
    data = np.random.default_rng(args.seed).random((U, V, H, W, 3)).astype(np.float32)
    intr = Intrinsics()
    pc, qc = intr.principal((H, W))
    poses = sample_poses(make_random_trajectory(args.seed), args.poses)
    terms = np.array([pose_terms(p, intr.focal_px) for p in poses])

    def call(mod):
        return lambda: mod.blur_accumulate(data, terms, intr.focal_px, intr.baseline_px, pc, qc)

    samples = U * V * H * W * len(poses)
    t_py, out_py = best_of(call(_warp_py), args.repeat)
    print(f"light field {U}x{V}x{H}x{W}, {len(poses)} poses, {samples:,} warped samples")
    print(f"python  {t_py * 1e3:9.1f} ms  {samples / t_py / 1e6:7.2f} Msample/s")
    if _warp_ext is None:
        print("cython  not built (install with Cython available to compile it)")
        return
    t_cy, out_cy = best_of(call(_warp_ext), args.repeat)
    print(f"cython  {t_cy * 1e3:9.1f} ms  {samples / t_cy / 1e6:7.2f} Msample/s")
    print(f"speedup {t_py / t_cy:.1f}x, outputs bit-identical: {np.array_equal(out_py, out_cy)}")


if __name__ == "__main__":
    main()
