"""6-DOF camera poses and shutter-time trajectories.

Translations follow a cubic Bezier curve over normalised shutter time
s in [0, 1]; rotations are slerped between two unit quaternions
(``[w, x, y, z]``). Rotation angles (phi, theta, psi) are the components of
the rotation vector, i.e. the skew entries of the matrix logarithm.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

RNG_NAME = "numpy.PCG64"
QUAT_TOL = 1e-9


class MotionError(ValueError):
    pass


@dataclass(frozen=True)
class CameraPose:
    px: float = 0.0
    py: float = 0.0
    pz: float = 0.0
    phi: float = 0.0    # pitch, about x
    theta: float = 0.0  # yaw, about y
    psi: float = 0.0    # roll, about z

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.as_tuple()):
            raise MotionError(f"non-finite pose component in {self}")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.px, self.py, self.pz, self.phi, self.theta, self.psi)

    @property
    def translation(self) -> tuple[float, float, float]:
        return (self.px, self.py, self.pz)

    @property
    def angles(self) -> tuple[float, float, float]:
        return (self.phi, self.theta, self.psi)

    def is_identity(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.as_tuple())


@dataclass(frozen=True)
class MotionBounds:
    """Per-component magnitude limits: translations in baseline units, p_z per pixel, angles in radians."""

    max_pxy: float = 2.0
    max_pz: float = 0.02
    max_phi_theta: float = 0.005
    max_psi: float = 0.02

    def __post_init__(self):
        for k, val in asdict(self).items():
            if not (math.isfinite(val) and val >= 0):
                raise MotionError(f"bounds.{k} must be finite and >= 0, got {val}")

    def limits(self) -> np.ndarray:
        """Limits ordered like ``CameraPose.as_tuple()``."""
        return np.array([self.max_pxy, self.max_pxy, self.max_pz,
                         self.max_phi_theta, self.max_phi_theta, self.max_psi])

    def contains(self, pose: CameraPose, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(pose.as_tuple()) <= self.limits() + tol))

    @classmethod
    def zero(cls) -> "MotionBounds":
        return cls(0.0, 0.0, 0.0, 0.0)


# ----------------------------------------------------------------- rotations

def skew(w) -> np.ndarray:
    a, b, c = w
    return np.array([[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]])


def rotation_matrix(pose: CameraPose, mode: str = "exact") -> np.ndarray:
    """Out-of-plane rotation for a pose; roll is handled separately and ignored here.

    ``exact`` is the matrix exponential of the skew matrix (Rodrigues);
    ``small_angle`` keeps only the first-order term I + [Omega].
    """
    w = np.array([pose.phi, pose.theta, 0.0])
    K = skew(w)
    if mode == "small_angle":
        return np.eye(3) + K
    if mode != "exact":
        raise MotionError(f"mode must be 'exact' or 'small_angle', got {mode!r}")
    angle = float(np.linalg.norm(w))
    if angle == 0.0:
        return np.eye(3)
    # sin(a)/a and (1 - cos(a))/a^2 without cancellation for small a
    s = math.sin(angle) / angle
    c = 2.0 * (math.sin(angle / 2.0) / angle) ** 2
    return np.eye(3) + s * K + c * (K @ K)


def quat_from_rotvec(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    angle = float(np.linalg.norm(w))
    if angle == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = angle / 2.0
    return np.concatenate([[math.cos(half)], w * (math.sin(half) / angle)])


def rotvec_from_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q[0] < 0:
        q = -q
    vnorm = float(np.linalg.norm(q[1:]))
    if vnorm == 0.0:
        return np.zeros(3)
    angle = 2.0 * math.atan2(vnorm, q[0])
    return q[1:] * (angle / vnorm)


def quat_mul(a, b) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _check_unit(q, name):
    n = float(np.linalg.norm(q))
    if abs(n - 1.0) > QUAT_TOL:
        raise MotionError(f"{name} is not a unit quaternion (norm {n!r})")


def slerp(q0, q1, s: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    _check_unit(q0, "q0")
    _check_unit(q1, "q1")
    if not 0.0 <= s <= 1.0:
        raise MotionError(f"slerp parameter must be in [0, 1], got {s}")
    if s == 0.0:
        return q0.copy()
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1, dot = -q1, -dot
    if s == 1.0:
        return q1.copy()
    # relative rotation q0^-1 q1 keeps tiny angles accurate, unlike acos(dot)
    rel = quat_mul(quat_conj(q0), q1)
    half = math.atan2(float(np.linalg.norm(rel[1:])), rel[0])
    if half < 1e-12:
        out = (1.0 - s) * q0 + s * q1
    else:
        sin_half = math.sin(half)
        out = (math.sin((1.0 - s) * half) / sin_half) * q0 + (math.sin(s * half) / sin_half) * q1
    return out / np.linalg.norm(out)


# -------------------------------------------------------------- trajectories

def bezier_eval(control, s: float) -> np.ndarray:
    """Cubic Bernstein evaluation of 4 control points."""
    P = np.asarray(control, dtype=np.float64)
    if P.shape[0] != 4:
        raise MotionError(f"cubic Bezier needs 4 control points, got {P.shape[0]}")
    if not 0.0 <= s <= 1.0:
        raise MotionError(f"Bezier parameter must be in [0, 1], got {s}")
    if s == 0.0:
        return P[0].copy()
    if s == 1.0:
        return P[3].copy()
    r = 1.0 - s
    return (r ** 3) * P[0] + (3 * r * r * s) * P[1] + (3 * r * s * s) * P[2] + (s ** 3) * P[3]


@dataclass(frozen=True, eq=False)
class Trajectory:
    control: np.ndarray                      # (4, 3) translation control points
    q0: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    q1: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    seed: int | None = None
    bounds: MotionBounds | None = None
    # set by normalize_midpoint; pose_at(0.5) then returns the exact identity
    normalized: bool = False

    def __post_init__(self):
        ctrl = np.array(self.control, dtype=np.float64).reshape(4, 3)
        q0 = np.array(self.q0, dtype=np.float64)
        q1 = np.array(self.q1, dtype=np.float64)
        if not (np.all(np.isfinite(ctrl)) and np.all(np.isfinite(q0)) and np.all(np.isfinite(q1))):
            raise MotionError("trajectory contains non-finite values")
        _check_unit(q0, "q0")
        _check_unit(q1, "q1")
        for a in (ctrl, q0, q1):
            a.flags.writeable = False
        object.__setattr__(self, "control", ctrl)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "q1", q1)

    @classmethod
    def identity(cls, **kw) -> "Trajectory":
        return cls(np.zeros((4, 3)), **kw)

    def to_dict(self, n_t: int | None = None) -> dict:
        d = {
            "seed": self.seed,
            "rng": RNG_NAME,
            "bounds": None if self.bounds is None else asdict(self.bounds),
            "translation_control_points": self.control.tolist(),
            "rotation_quaternions": [self.q0.tolist(), self.q1.tolist()],
        }
        if n_t is not None:
            d["N_t"] = n_t
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        try:
            q0, q1 = d["rotation_quaternions"]
            b = d.get("bounds")
            traj = cls(np.array(d["translation_control_points"], dtype=np.float64),
                       np.array(q0, dtype=np.float64), np.array(q1, dtype=np.float64),
                       seed=d.get("seed"), bounds=None if b is None else MotionBounds(**b))
        except (KeyError, TypeError, ValueError) as exc:
            raise MotionError(f"malformed trajectory: {exc}") from exc
        if is_normalized(traj):
            traj = replace(traj, normalized=True)
        return traj

    def same_as(self, other: "Trajectory") -> bool:
        return (np.array_equal(self.control, other.control)
                and np.array_equal(self.q0, other.q0) and np.array_equal(self.q1, other.q1))


def pose_at(traj: Trajectory, s: float) -> CameraPose:
    if not 0.0 <= s <= 1.0:
        raise MotionError(f"shutter time must be in [0, 1], got {s}")
    if traj.normalized and s == 0.5:
        return CameraPose()
    t = bezier_eval(traj.control, s)
    w = rotvec_from_quat(slerp(traj.q0, traj.q1, s))
    return CameraPose(*(float(c) for c in t), *(float(c) for c in w))


def normalize_midpoint(traj: Trajectory) -> Trajectory:
    """Shift the trajectory so the mid-exposure pose is the identity."""
    mid_t = bezier_eval(traj.control, 0.5)
    qm_inv = quat_conj(slerp(traj.q0, traj.q1, 0.5))
    q0 = quat_mul(qm_inv, traj.q0)
    q1 = quat_mul(qm_inv, traj.q1)
    return Trajectory(traj.control - mid_t, q0 / np.linalg.norm(q0), q1 / np.linalg.norm(q1),
                      seed=traj.seed, bounds=traj.bounds, normalized=True)


def is_normalized(traj: Trajectory, tol: float = 1e-9) -> bool:
    if traj.normalized:
        return True
    return pose_at(traj, 0.5).is_identity(tol)


def _pose_extent(traj: Trajectory, samples: int = 129) -> np.ndarray:
    return np.max([np.abs(pose_at(traj, s).as_tuple())
                   for s in np.linspace(0.0, 1.0, samples)], axis=0)


def make_random_trajectory(seed: int, bounds: MotionBounds | None = None) -> Trajectory:
    """Seeded random shake, midpoint-normalised and kept inside ``bounds``.

    Draw order from ``numpy.random.default_rng(seed)``: 12 uniforms in [-1, 1)
    for the translation control points (row-major), then 6 for the two
    endpoint rotation vectors. Everything is drawn at half the bounds so the
    midpoint shift keeps translations in range; rotations are shrunk by 0.9
    until the composed angles fit.
    """
    bounds = bounds or MotionBounds()
    lim = bounds.limits()
    rng = np.random.default_rng(seed)
    ctrl = rng.uniform(-1.0, 1.0, size=(4, 3)) * (lim[:3] / 2.0)
    rot = rng.uniform(-1.0, 1.0, size=(2, 3)) * (lim[3:] / 2.0)
    scale = 1.0
    for _ in range(64):
        traj = normalize_midpoint(Trajectory(ctrl, quat_from_rotvec(rot[0] * scale),
                                             quat_from_rotvec(rot[1] * scale),
                                             seed=seed, bounds=bounds))
        if np.all(_pose_extent(traj)[3:] <= lim[3:]):
            return traj
        scale *= 0.9
    raise MotionError(f"could not fit rotation within bounds for seed {seed}")


def sample_times(n_t: int) -> np.ndarray:
    if n_t < 1:
        raise MotionError(f"N_t must be >= 1, got {n_t}")
    if n_t == 1:
        return np.array([0.5])
    return np.arange(n_t) / (n_t - 1)


def sample_poses(traj: Trajectory, n_t: int) -> list[CameraPose]:
    """Poses at uniformly spaced shutter times; a single sample sits at mid-exposure."""
    return [pose_at(traj, float(s)) for s in sample_times(n_t)]
