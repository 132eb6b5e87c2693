"""Procedural layered-scene light fields for tests, toy datasets and benchmarks."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .lightfield import Intrinsics, LightField
from .motion import MotionBounds

# Half of the default bounds: mild shake used for the toy end-to-end experiment.
SMALL_BOUNDS = MotionBounds(max_pxy=1.0, max_pz=0.01, max_phi_theta=0.0025, max_psi=0.01)


def _texture(rng, h, w, sigma):
    tex = ndimage.gaussian_filter(rng.random((h, w, 3)), sigma=(sigma, sigma, 0), mode="wrap")
    tex = (tex - tex.mean()) / max(tex.std(), 1e-12)
    return np.clip(0.5 + 0.22 * tex, 0.0, 1.0)


def layered_lightfield(seed: int, angular_size=(5, 5), spatial_size=(64, 64),
                       n_shapes: int = 6, disparity=(-1.0, 2.0),
                       intrinsics: Intrinsics | None = None) -> LightField:
    """Background texture plus textured rectangles/discs at different depths.

    Each layer has a constant disparity (pixels per view step); view (u, v)
    shows the layer shifted by disparity * (u - cu, v - cv). Nearer layers
    occlude farther ones.
    """
    rng = np.random.default_rng(seed)
    U, V = angular_size
    H, W = spatial_size
    pad = int(np.ceil(max(abs(d) for d in disparity) * max(U, V))) + 2
    ph, pw = H + 2 * pad, W + 2 * pad
    cu, cv = (U - 1) / 2.0, (V - 1) / 2.0

    layers = [(disparity[0], _texture(rng, ph, pw, 1.0), np.ones((ph, pw)))]
    for _ in range(n_shapes):
        d = rng.uniform(*disparity)
        tex = _texture(rng, ph, pw, rng.uniform(0.6, 1.5))
        tint = rng.uniform(0.0, 1.0, size=3)
        tex = np.clip(0.5 * tex + 0.5 * tint, 0.0, 1.0)
        yy, xx = np.mgrid[0:ph, 0:pw]
        cy, cx = rng.uniform(pad, pad + H), rng.uniform(pad, pad + W)
        r = rng.uniform(0.08, 0.25) * min(H, W)
        if rng.random() < 0.5:
            mask = ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r).astype(np.float64)
        else:
            mask = ((np.abs(xx - cx) <= r) & (np.abs(yy - cy) <= 0.7 * r)).astype(np.float64)
        layers.append((d, tex, mask))
    layers.sort(key=lambda t: t[0])  # far (small disparity) first

    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    data = np.empty((U, V, H, W, 3), dtype=np.float32)
    for u in range(U):
        for v in range(V):
            img = np.zeros((H, W, 3))
            for d, tex, mask in layers:
                cx = xs + pad + d * (u - cu)
                cy = ys + pad + d * (v - cv)
                m = ndimage.map_coordinates(mask, [cy, cx], order=1, mode="nearest")
                for c in range(3):
                    t = ndimage.map_coordinates(tex[..., c], [cy, cx], order=1, mode="nearest")
                    img[..., c] = m * t + (1.0 - m) * img[..., c]
            data[u, v] = np.clip(img, 0.0, 1.0)
    return LightField(data, intrinsics or Intrinsics())


def toy_pairs(count: int, seed: int = 0, angular_size=(5, 5), spatial_size=(64, 64),
              bounds=None, n_t: int = 16, mode="angular_shift"):
    """(blurred, sharp) pairs from layered scenes and seeded random trajectories."""
    from .blur import synthesize_blur, trajectory_seeds
    from .motion import make_random_trajectory

    seeds = trajectory_seeds(seed, 2 * count)
    pairs = []
    for i in range(count):
        sharp = layered_lightfield(seeds[2 * i], angular_size, spatial_size)
        traj = make_random_trajectory(seeds[2 * i + 1], bounds)
        blurred, gt = synthesize_blur(sharp, traj, n_t, mode)
        pairs.append((blurred, gt))
    return pairs
