"""4D light-field container, on-disk format, sampling, spiral ordering and EPIs.

A light field is stored as a float32 array indexed ``(u, v, y, x, c)``. The
first angular axis ``u`` is the horizontal viewpoint coordinate and pairs
with the spatial column ``x``; ``v`` pairs with the row ``y``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

FORMAT_VERSION = 1
VIEW_PATTERN = "u{u}_v{v}.png"
RAW_PAYLOAD = "data.f32"

_VIEW_RE = re.compile(r"^u(\d+)_v(\d+)\.png$")


class LightFieldError(ValueError):
    """Invalid light-field data or a malformed light-field directory."""


@dataclass(frozen=True)
class Intrinsics:
    focal_px: float = 500.0
    baseline_px: float = 1.0
    # (p_c, q_c); None means the image centre
    central_principal: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.focal_px > 0:
            raise LightFieldError(f"focal_px must be > 0, got {self.focal_px}")
        if not self.baseline_px > 0:
            raise LightFieldError(f"baseline_px must be > 0, got {self.baseline_px}")

    def principal(self, spatial_size: tuple[int, int]) -> tuple[float, float]:
        """Central principal point (p_c, q_c) in pixels for an (H, W) view."""
        if self.central_principal is not None:
            return float(self.central_principal[0]), float(self.central_principal[1])
        h, w = spatial_size
        return (w - 1) / 2.0, (h - 1) / 2.0

    def view_offset(self, u: float, v: float,
                    angular_size: tuple[int, int]) -> tuple[float, float]:
        """Offsets (delta_u, delta_v) of view (u, v) from the central view, in pixels."""
        cu = (angular_size[0] - 1) / 2.0
        cv = (angular_size[1] - 1) / 2.0
        return (u - cu) * self.baseline_px, (v - cv) * self.baseline_px

    def to_dict(self) -> dict:
        return {
            "focal_px": self.focal_px,
            "baseline_px": self.baseline_px,
            "principal_point": (None if self.central_principal is None
                                else list(self.central_principal)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        pp = d.get("principal_point")
        return cls(focal_px=float(d.get("focal_px", 500.0)),
                   baseline_px=float(d.get("baseline_px", 1.0)),
                   central_principal=None if pp is None else (float(pp[0]), float(pp[1])))


@dataclass(frozen=True, eq=False)
class LightField:
    """Immutable RGB light field with samples in [0, 1].

    ``data`` has shape (U, V, H, W, 3) and dtype float32; it is made read-only
    on construction.
    """

    data: np.ndarray
    intrinsics: Intrinsics = field(default_factory=Intrinsics)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 5:
            raise LightFieldError(f"expected a 5D (U, V, H, W, C) array, got shape {data.shape}")
        if min(data.shape[:4]) < 1:
            raise LightFieldError(f"all dimensions must be >= 1, got shape {data.shape}")
        if data.shape[4] != 3:
            raise LightFieldError(f"expected 3 colour channels, got {data.shape[4]}")
        data = np.ascontiguousarray(data, dtype=np.float32)
        if not np.all(np.isfinite(data)):
            raise LightFieldError("light field contains non-finite samples")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise LightFieldError(
                f"samples must lie in [0, 1], got range [{data.min()}, {data.max()}]")
        if data is self.data:
            data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def angular_size(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def spatial_size(self) -> tuple[int, int]:
        return self.data.shape[2], self.data.shape[3]

    @property
    def channels(self) -> int:
        return self.data.shape[4]

    def view(self, u: int, v: int) -> np.ndarray:
        return self.data[u, v]

    def with_data(self, data: np.ndarray) -> "LightField":
        return replace(self, data=data)

    def __repr__(self):
        U, V = self.angular_size
        H, W = self.spatial_size
        return f"LightField({U}x{V}x{H}x{W}x{self.channels}, {self.intrinsics})"


# --------------------------------------------------------------------------- I/O

def save_lightfield(lf: LightField, path, bit_depth: int = 8) -> Path:
    """Write ``lf`` as a directory of per-view PNGs (8-bit) or a float32 payload (32-bit)."""
    if bit_depth not in (8, 32):
        raise LightFieldError(f"bit_depth must be 8 or 32, got {bit_depth}")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    U, V = lf.angular_size
    H, W = lf.spatial_size
    manifest = {
        "version": FORMAT_VERSION,
        "angular_size": [U, V],
        "spatial_size": [H, W],
        "channels": lf.channels,
        "bit_depth": bit_depth,
        **lf.intrinsics.to_dict(),
        "filename_pattern": VIEW_PATTERN if bit_depth == 8 else RAW_PAYLOAD,
    }
    if bit_depth == 8:
        q = np.round(lf.data.astype(np.float64) * 255.0).astype(np.uint8)
        for u in range(U):
            for v in range(V):
                Image.fromarray(q[u, v], mode="RGB").save(path / VIEW_PATTERN.format(u=u, v=v))
    else:
        lf.data.astype("<f4").tofile(path / RAW_PAYLOAD)
    with open(path / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_lightfield(path) -> LightField:
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.is_file():
        raise LightFieldError(f"missing manifest: {mpath}")
    try:
        with open(mpath) as fh:
            m = json.load(fh)
        U, V = (int(n) for n in m["angular_size"])
        H, W = (int(n) for n in m["spatial_size"])
        channels = int(m.get("channels", 3))
        bit_depth = int(m.get("bit_depth", 8))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise LightFieldError(f"malformed manifest {mpath}: {exc}") from exc
    if channels != 3:
        raise LightFieldError(f"{mpath}: only 3-channel light fields are supported")
    intr = Intrinsics.from_dict(m)

    if bit_depth == 32:
        raw = path / m.get("filename_pattern", RAW_PAYLOAD)
        if not raw.is_file():
            raise LightFieldError(f"missing raw payload: {raw}")
        flat = np.fromfile(raw, dtype="<f4")
        if flat.size != U * V * H * W * 3:
            raise LightFieldError(
                f"{raw}: expected {U * V * H * W * 3} samples, found {flat.size}")
        return LightField(flat.reshape(U, V, H, W, 3).astype(np.float32), intr)
    if bit_depth != 8:
        raise LightFieldError(f"{mpath}: unsupported bit_depth {bit_depth}")

    expected = {VIEW_PATTERN.format(u=u, v=v) for u in range(U) for v in range(V)}
    present = {p.name for p in path.iterdir() if _VIEW_RE.match(p.name)}
    missing = sorted(expected - present)
    if missing:
        raise LightFieldError(f"missing view file: {path / missing[0]}"
                              + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    extra = sorted(present - expected)
    if extra:
        raise LightFieldError(f"unexpected view file: {path / extra[0]}")

    data = np.empty((U, V, H, W, 3), dtype=np.float32)
    for u in range(U):
        for v in range(V):
            fp = path / VIEW_PATTERN.format(u=u, v=v)
            with Image.open(fp) as im:
                arr = np.asarray(im.convert("RGB"))
            if arr.shape != (H, W, 3):
                raise LightFieldError(
                    f"{fp}: image is {arr.shape[1]}x{arr.shape[0]}, manifest declares {W}x{H}")
            data[u, v] = arr.astype(np.float32) / np.float32(255.0)
    return LightField(data, intr)


def is_lightfield_dir(path) -> bool:
    return (Path(path) / "manifest.json").is_file()


# ----------------------------------------------------------------- spiral order

def spiral_order(U: int, V: int) -> list[tuple[int, int]]:
    """Outward ring walk over a U x V grid, starting at the centre view.

    Ring k is entered from the previous ring's last cell by one step to the
    right, then walks up the right edge, left along the top, down the left
    edge and right along the bottom, finishing on the ring's bottom-right
    corner. Cells outside a non-square grid are skipped, so the unit-step
    property only holds for square grids.
    """
    if U < 1 or V < 1 or U % 2 == 0 or V % 2 == 0:
        raise LightFieldError(f"spiral_order needs odd U, V >= 1, got ({U}, {V})")
    cu, cv = U // 2, V // 2
    order = [(cu, cv)]
    for k in range(1, max(cu, cv) + 1):
        ring = [(cu + k - 1 - d, cv + k) for d in range(2 * k)]
        ring += [(cu - k, cv + k - d) for d in range(1, 2 * k + 1)]
        ring += [(cu - k + d, cv - k) for d in range(1, 2 * k + 1)]
        ring += [(cu + k, cv - k + d) for d in range(1, 2 * k + 1)]
        order += [(a, b) for a, b in ring if 0 <= a < U and 0 <= b < V]
    return order


def angular_sample(seq, n: int) -> list:
    """Pick ``n`` entries of a spiral sequence at uniform stride, endpoints included."""
    L = len(seq)
    if not 1 <= n <= L:
        raise LightFieldError(f"angular sample count must be in [1, {L}], got {n}")
    return [seq[i] for i in angular_sample_positions(L, n)]


def angular_sample_positions(L: int, n: int) -> list[int]:
    if not 1 <= n <= L:
        raise LightFieldError(f"angular sample count must be in [1, {L}], got {n}")
    if n == 1:
        return [0]
    # round half up; Python's round() would round half to even
    return [int(math.floor(i * (L - 1) / (n - 1) + 0.5)) for i in range(n)]


# --------------------------------------------------------------- interpolation

def _axis_taps(c, n):
    """Clamp coordinates to [0, n-1] and return (i0, i1, w0, w1) for linear interpolation."""
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, n - 1.0)
    i0 = np.floor(c)
    f = c - i0
    i0 = i0.astype(np.intp)
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, 1.0 - f, f


def sample_points(data: np.ndarray, x, y, u, v) -> np.ndarray:
    """Quadrilinear samples of ``data`` (U, V, H, W, C) at broadcastable real coordinates.

    Taps are summed in a fixed order (u, v, y, x nested, low index first) in
    float64 so results are reproducible across backends.
    """
    U, V, H, W, _ = data.shape
    x, y, u, v = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, y, u, v)))
    tu, tv, ty, tx = _axis_taps(u, U), _axis_taps(v, V), _axis_taps(y, H), _axis_taps(x, W)
    out = np.zeros(x.shape + (data.shape[4],), dtype=np.float64)
    for a in (0, 1):
        for b in (0, 1):
            wuv = tu[2 + a] * tv[2 + b]
            for c in (0, 1):
                wuvy = wuv * ty[2 + c]
                for d in (0, 1):
                    w = wuvy * tx[2 + d]
                    out += w[..., None] * data[tu[a], tv[b], ty[c], tx[d]]
    return out


def sample_quadrilinear(lf: LightField, x: float, y: float, u: float, v: float) -> np.ndarray:
    """RGB value of ``lf`` at continuous (x, y, u, v), with edge clamping."""
    return sample_points(lf.data, x, y, u, v).astype(np.float32)


# -------------------------------------------------------------------------- EPI

def extract_epi(lf: LightField, axis: str, fixed_spatial: int, fixed_angular: int) -> np.ndarray:
    """Epipolar plane image.

    ``horizontal``: rows are views u = 0..U-1 at fixed (v, y); shape (U, W, 3).
    ``vertical``: rows are views v = 0..V-1 at fixed (u, x); shape (V, H, 3).
    """
    U, V = lf.angular_size
    H, W = lf.spatial_size
    if axis == "horizontal":
        _check_index("y", fixed_spatial, H)
        _check_index("v", fixed_angular, V)
        return lf.data[:, fixed_angular, fixed_spatial, :, :].copy()
    if axis == "vertical":
        _check_index("x", fixed_spatial, W)
        _check_index("u", fixed_angular, U)
        return lf.data[fixed_angular, :, :, fixed_spatial, :].copy()
    raise LightFieldError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def _check_index(name, i, n):
    if not (isinstance(i, (int, np.integer)) and 0 <= i < n):
        raise LightFieldError(f"{name} index {i} out of range [0, {n})")


def save_epi(epi: np.ndarray, path) -> None:
    Image.fromarray(np.round(np.clip(epi, 0, 1) * 255.0).astype(np.uint8), mode="RGB").save(path)
