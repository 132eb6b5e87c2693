"""6-DOF light-field motion-blur forward model and dataset generation.

A pose moves every sample (x, y, u, v) of the sharp light field to a
sampling position: roll rotates (x, y) about the view's principal point,
pitch/yaw add a shift ``f*theta`` (x) and ``-f*phi`` (y), in-plane
translation shifts the angular coordinates and out-of-plane translation
shears them in proportion to the spatial position. The blurred light field
is the mean of the warped copies over the sampled shutter times.

Two ``WarpMode`` values decide where the pitch/yaw shift lands:
``angular_shift`` adds it to the angular coordinates together with the
in-plane translation; ``spatial_rotation`` applies it to the spatial
coordinates as the rotation homography does.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .lightfield import (Intrinsics, LightField, LightFieldError, is_lightfield_dir,
                         load_lightfield, save_lightfield)
from .motion import (CameraPose, MotionBounds, MotionError, Trajectory, is_normalized,
                     make_random_trajectory, sample_poses)

log = logging.getLogger(__name__)

DEFAULT_NT = 32

if os.environ.get("LFDEBLUR_BACKEND", "").lower() == "python":
    from . import _warp_py as _kernel
    BACKEND = "python"
else:
    try:
        from . import _warp_ext as _kernel
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _warp_py as _kernel
        BACKEND = "python"


class WarpMode(str, Enum):
    ANGULAR_SHIFT = "angular_shift"
    SPATIAL_ROTATION = "spatial_rotation"


def pose_terms(pose: CameraPose, focal_px: float, mode=WarpMode.ANGULAR_SHIFT) -> np.ndarray:
    """Per-pose constants consumed by the kernels.

    Returns [angular shift u, angular shift v, spatial shift x, spatial
    shift y, p_z, cos(psi) - 1, sin(psi)].
    """
    mode = WarpMode(mode)
    rot_x = focal_px * pose.theta
    rot_y = -focal_px * pose.phi
    # written via sin^2 so that psi == 0 gives an exact zero
    cm1 = -2.0 * math.sin(pose.psi / 2.0) ** 2
    sn = math.sin(pose.psi)
    if mode is WarpMode.ANGULAR_SHIFT:
        return np.array([pose.px + rot_x, pose.py + rot_y, 0.0, 0.0, pose.pz, cm1, sn])
    return np.array([pose.px, pose.py, rot_x, rot_y, pose.pz, cm1, sn])


def warp_coords(pose: CameraPose, x, y, u, v, intr: Intrinsics | None = None,
                mode=WarpMode.ANGULAR_SHIFT, angular_size=(1, 1), spatial_size=(1, 1)):
    """Sampling coordinates (x', y', u', v') of the sharp light field for output (x, y, u, v).

    ``angular_size`` locates the central view (where the view offsets
    vanish); ``spatial_size`` is only used when ``intr`` has no explicit
    principal point.
    """
    intr = intr or Intrinsics()
    pc, qc = intr.principal(spatial_size)
    ang_u, ang_v, sp_x, sp_y, pz, cm1, sn = pose_terms(pose, intr.focal_px, mode)
    cu = (angular_size[0] - 1) / 2.0
    cv = (angular_size[1] - 1) / 2.0
    x, y, u, v = (np.asarray(a, dtype=np.float64) for a in (x, y, u, v))
    du = (u - cu) * intr.baseline_px
    dv = (v - cv) * intr.baseline_px
    dx = x - (pc + du)
    dy = y - (qc + dv)
    xj = x + (dx * cm1 - dy * sn)
    yj = y + (dx * sn + dy * cm1)
    uu = u + ang_u - (xj - pc) * pz
    vv = v + ang_v - (yj - qc) * pz
    out = (xj + sp_x, yj + sp_y, uu, vv)
    if all(a.ndim == 0 for a in out):
        return tuple(float(a) for a in out)
    return out


def _run_kernel(lf: LightField, poses, mode) -> np.ndarray:
    intr = lf.intrinsics
    pc, qc = intr.principal(lf.spatial_size)
    terms = np.ascontiguousarray([pose_terms(p, intr.focal_px, mode) for p in poses],
                                 dtype=np.float64).reshape(-1, 7)
    return _kernel.blur_accumulate(lf.data, terms, intr.focal_px, intr.baseline_px, pc, qc)


def warp_lightfield(lf: LightField, pose: CameraPose, mode=WarpMode.ANGULAR_SHIFT) -> LightField:
    """Resample ``lf`` under a single pose (one integrand of the blur integral)."""
    return lf.with_data(_run_kernel(lf, [pose], mode))


def synthesize_blur(lf: LightField, traj: Trajectory, n_t: int = DEFAULT_NT,
                    mode=WarpMode.ANGULAR_SHIFT) -> tuple[LightField, LightField]:
    """Return (blurred, ground truth) for a midpoint-normalised trajectory.

    The ground truth is the mid-exposure warp, which is the input itself.
    """
    if not is_normalized(traj):
        raise MotionError("trajectory must be midpoint-normalised (pose_at(0.5) == identity)")
    poses = sample_poses(traj, n_t)
    return lf.with_data(_run_kernel(lf, poses, mode)), lf


# ------------------------------------------------------------------ datasets

@dataclass(frozen=True)
class BlurJob:
    sharp: LightField
    trajectory: Trajectory
    n_t: int = DEFAULT_NT
    mode: WarpMode = WarpMode.ANGULAR_SHIFT

    def run(self) -> tuple[LightField, LightField]:
        return synthesize_blur(self.sharp, self.trajectory, self.n_t, self.mode)

    def manifest(self) -> dict:
        return {"tool_version": __version__, "N_t": self.n_t, "warp_mode": WarpMode(self.mode).value,
                "trajectory": self.trajectory.to_dict(self.n_t),
                "intrinsics": self.sharp.intrinsics.to_dict()}


def find_lightfields(root) -> list[Path]:
    """Light-field directories below ``root`` (or ``root`` itself), sorted by name."""
    root = Path(root)
    if is_lightfield_dir(root):
        return [root]
    if not root.is_dir():
        return []
    return sorted(p for p in root.iterdir() if p.is_dir() and is_lightfield_dir(p))


def trajectory_seeds(seed: int, count: int) -> list[int]:
    """``count`` distinct 31-bit trajectory seeds derived from a master seed."""
    rng = np.random.default_rng(seed)
    return [int(s) for s in rng.choice(2 ** 31, size=count, replace=False)]


def generate_dataset(sharp_dir, count_motions: int, bounds: MotionBounds | None, n_t: int,
                     seed: int, out_dir, mode=WarpMode.ANGULAR_SHIFT, bit_depth: int = 8) -> dict:
    """Blur every sharp light field in ``sharp_dir`` with ``count_motions`` unique trajectories.

    Writes ``blurred/``, ``sharp/`` and ``trajectories/`` under ``out_dir``
    plus ``manifest.json``; returns the manifest. Paths inside the manifest
    are relative to ``out_dir``.
    """
    sources = find_lightfields(sharp_dir)
    if not sources:
        raise LightFieldError(f"no light fields found in {sharp_dir}")
    if count_motions < 1:
        raise ValueError(f"count_motions must be >= 1, got {count_motions}")
    bounds = bounds or MotionBounds()
    mode = WarpMode(mode)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = trajectory_seeds(seed, len(sources) * count_motions)

    pairs = []
    k = 0
    for src in sources:
        sharp = load_lightfield(src)
        sharp_id = src.name
        gt_rel = Path("sharp") / sharp_id
        save_lightfield(sharp, out_dir / gt_rel, bit_depth=bit_depth)
        for m in range(count_motions):
            tseed = seeds[k]
            k += 1
            traj = make_random_trajectory(tseed, bounds)
            blurred, _ = synthesize_blur(sharp, traj, n_t, mode)
            name = f"{sharp_id}_m{m:03d}"
            b_rel = Path("blurred") / name
            t_rel = Path("trajectories") / f"{name}.json"
            save_lightfield(blurred, out_dir / b_rel, bit_depth=bit_depth)
            (out_dir / t_rel).parent.mkdir(parents=True, exist_ok=True)
            _write_json(out_dir / t_rel, traj.to_dict(n_t))
            pairs.append({"sharp_id": sharp_id, "trajectory_seed": tseed,
                          "blurred": b_rel.as_posix(), "ground_truth": gt_rel.as_posix(),
                          "trajectory": t_rel.as_posix()})
            log.info("blurred %s with trajectory seed %d", name, tseed)

    manifest = {
        "version": 1,
        "tool_version": __version__,
        "config": {"N_t": n_t, "bounds": asdict(bounds), "warp_mode": mode.value, "seed": seed,
                   "count_motions": count_motions, "bit_depth": bit_depth},
        "pairs": pairs,
    }
    _write_json(out_dir / "manifest.json", manifest)
    return manifest


def load_dataset_manifest(path) -> tuple[dict, Path]:
    """Read a dataset manifest (file or directory); returns it with its base directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    with open(path) as fh:
        manifest = json.load(fh)
    base = path.parent
    for row in manifest.get("pairs", []):
        for key in ("blurred", "ground_truth"):
            if not is_lightfield_dir(base / row[key]):
                raise LightFieldError(f"dataset manifest references missing light field: "
                                      f"{base / row[key]}")
    return manifest, base


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
