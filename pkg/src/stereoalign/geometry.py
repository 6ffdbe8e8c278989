"""Pinhole two-camera rig: poses, projection, rig sampling, guarded 2x2 algebra.

Conventions used throughout the package:

  * World frame is the robot base: +z up, units in meters.
  * Camera frame: +z forward (into the scene), +x image-right, +y image-down.
  * A ``Pose`` stores the world->camera rotation ``R`` and the camera origin
    ``t`` in world coordinates, so a world point maps to camera coordinates
    via ``p_c = R @ (p - t)``.
  * Image coordinates are normalized and dimensionless; a point is "in view"
    iff |u| <= 1 and |v| <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Normalized-coordinate focal scale, ~80 degree horizontal field of view.
DEFAULT_FOCAL = 1.2

# Beyond this condition number a probe-response matrix amplifies image noise
# enough to drown a millimeter-scale probe signal.
DEFAULT_COND_MAX = 50.0


class DegenerateLookAt(ValueError):
    """Eye coincides with target, or the up hint is parallel to the view ray."""


class IllConditioned(ArithmeticError):
    """A 2x2 probe-response matrix is singular or too ill-conditioned to invert."""


class SamplerExhausted(RuntimeError):
    """Rig sampling hit the resample budget without passing visibility checks."""


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def vec2(u: float, v: float) -> np.ndarray:
    return np.array([u, v], dtype=np.float64)


@dataclass(frozen=True)
class Pose:
    """Rigid camera pose: world->camera rotation and camera origin in world."""

    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,), camera origin in world frame

    def to_camera(self, p: np.ndarray) -> np.ndarray:
        return self.rotation @ (np.asarray(p, dtype=np.float64) - self.translation)

    @property
    def forward(self) -> np.ndarray:
        """Optical axis (+z of the camera) expressed in the world frame."""
        return self.rotation[2].copy()


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = DEFAULT_FOCAL
    fy: float = DEFAULT_FOCAL

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal scales must be positive, got fx={self.fx} fy={self.fy}")


@dataclass(frozen=True)
class Camera:
    pose: Pose
    intrinsics: CameraIntrinsics


@dataclass(frozen=True)
class Rig:
    """Two cameras on a common mount, separated by a fixed baseline."""

    left: Camera
    right: Camera
    baseline: float


@dataclass
class RigSampler:
    """Spherical-shell camera placement, either fixed ("fc") or randomized ("rc").

    Angles are degrees, distances meters. In "fc" mode the ranges are ignored
    and the canonical pose below is returned bit-identically on every call.
    The randomized ranges are deliberately aggressive (full azimuth circle,
    near-grazing elevations, wide roll): they are what make raw-point policies
    fail while calibrated mappings keep working.
    """

    mode: str = "fc"  # "fc" | "rc"
    azimuth_range_deg: tuple[float, float] = (-180.0, 180.0)
    elevation_range_deg: tuple[float, float] = (1.0, 45.0)
    radius_range_m: tuple[float, float] = (0.22, 0.65)
    lookat_jitter_m: float = 0.05
    roll_jitter_deg: float = 60.0
    baseline_m: float = 0.06
    max_resample: int = 100
    # Canonical fixed placement used by "fc" mode.
    fixed_azimuth_deg: float = 25.0
    fixed_elevation_deg: float = 35.0
    fixed_radius_m: float = 0.35

    def __post_init__(self):
        if self.mode not in ("fc", "rc"):
            raise ValueError(f"unknown camera mode {self.mode!r}")
        for lo, hi in (self.azimuth_range_deg, self.elevation_range_deg, self.radius_range_m):
            if hi < lo:
                raise ValueError("sampler ranges must be non-empty")
        if self.baseline_m <= 0:
            raise ValueError("baseline must be positive")
        if self.max_resample < 1:
            raise ValueError("max_resample must be >= 1")


def look_at_pose(eye: np.ndarray, target: np.ndarray, up_hint: np.ndarray) -> Pose:
    """Pose of a camera at ``eye`` whose optical axis points at ``target``.

    The image-down (+y) direction is chosen so that ``up_hint`` lands at
    negative image v; raises DegenerateLookAt when eye and target coincide or
    the hint is parallel to the view ray.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up_hint = np.asarray(up_hint, dtype=np.float64)

    forward = target - eye
    dist = np.linalg.norm(forward)
    if dist <= 1e-6:
        raise DegenerateLookAt("eye and target coincide")
    forward = forward / dist

    hint_norm = np.linalg.norm(up_hint)
    if hint_norm <= 1e-6:
        raise DegenerateLookAt("up hint has zero length")
    hint = up_hint / hint_norm
    up_perp = hint - (hint @ forward) * forward
    perp_norm = np.linalg.norm(up_perp)
    if perp_norm <= 1e-6:
        raise DegenerateLookAt("up hint parallel to view direction")

    y_axis = -up_perp / perp_norm  # image-down opposes the up hint
    x_axis = np.cross(y_axis, forward)  # right-handed with x right, y down, z forward
    rotation = np.stack([x_axis, y_axis, forward])
    return Pose(rotation=rotation, translation=eye.copy())


def project(pose: Pose, intr: CameraIntrinsics, p: np.ndarray) -> np.ndarray | None:
    """Normalized image coordinates of world point ``p``, or None when out of view.

    Out of view means behind the camera (depth <= 1e-6) or outside the
    [-1, 1]^2 image square.
    """
    p_c = pose.to_camera(p)
    z = p_c[2]
    if z <= 1e-6:
        return None
    u = intr.fx * p_c[0] / z
    v = intr.fy * p_c[1] / z
    if abs(u) > 1.0 or abs(v) > 1.0:
        return None
    return np.array([u, v], dtype=np.float64)


def _rotate_about_axis(v: np.ndarray, axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` about unit ``axis``."""
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1.0 - c)


def _shell_point(center: np.ndarray, azimuth_deg: float, elevation_deg: float, radius: float) -> np.ndarray:
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    direction = np.array(
        [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)],
        dtype=np.float64,
    )
    return center + radius * direction


def sample_rig(sampler: RigSampler, workspace_center: np.ndarray, rng: np.random.Generator) -> Rig:
    """Draw one rig from the sampler around ``workspace_center``.

    The rig center lies on a spherical shell; both cameras look at the
    (jittered) workspace center and sit ``baseline_m`` apart along the rolled
    image-right direction. "fc" mode consumes no randomness and always returns
    the canonical rig.
    """
    workspace_center = np.asarray(workspace_center, dtype=np.float64)
    world_up = vec3(0.0, 0.0, 1.0)

    if sampler.mode == "fc":
        azimuth = sampler.fixed_azimuth_deg
        elevation = sampler.fixed_elevation_deg
        radius = sampler.fixed_radius_m
        lookat = workspace_center
        roll_rad = 0.0
    else:
        azimuth = rng.uniform(*sampler.azimuth_range_deg)
        elevation = rng.uniform(*sampler.elevation_range_deg)
        radius = rng.uniform(*sampler.radius_range_m)
        jitter = rng.uniform(-sampler.lookat_jitter_m, sampler.lookat_jitter_m, size=3)
        lookat = workspace_center + jitter
        roll_rad = math.radians(rng.uniform(-sampler.roll_jitter_deg, sampler.roll_jitter_deg))

    center = _shell_point(workspace_center, azimuth, elevation, radius)
    view_dir = lookat - center
    view_dir = view_dir / np.linalg.norm(view_dir)

    right_dir = np.cross(view_dir, world_up)
    right_dir = right_dir / np.linalg.norm(right_dir)
    up_hint = world_up
    if roll_rad != 0.0:
        # The whole mount rolls about the shared view axis.
        right_dir = _rotate_about_axis(right_dir, view_dir, roll_rad)
        up_hint = _rotate_about_axis(world_up, view_dir, roll_rad)

    half = 0.5 * sampler.baseline_m
    left_eye = center - half * right_dir
    right_eye = center + half * right_dir
    intr = CameraIntrinsics()
    return Rig(
        left=Camera(pose=look_at_pose(left_eye, lookat, up_hint), intrinsics=intr),
        right=Camera(pose=look_at_pose(right_eye, lookat, up_hint), intrinsics=intr),
        baseline=sampler.baseline_m,
    )


def mat2_inverse_guarded(m: np.ndarray, cond_max: float = DEFAULT_COND_MAX) -> np.ndarray:
    """Exact inverse of a 2x2 matrix, guarded against degeneracy.

    Raises IllConditioned when |det| <= 1e-12 or the spectral condition number
    exceeds ``cond_max`` (near-collinear probe responses).
    """
    m = np.asarray(m, dtype=np.float64)
    a, b = m[0, 0], m[0, 1]
    c, d = m[1, 0], m[1, 1]
    det = a * d - b * c
    if abs(det) <= 1e-12:
        raise IllConditioned(f"singular probe matrix, det={det:.3e}")
    cond = mat2_cond(m)
    if cond > cond_max:
        raise IllConditioned(f"probe matrix condition number {cond:.1f} > {cond_max}")
    return np.array([[d, -b], [-c, a]], dtype=np.float64) / det


def mat2_cond(m: np.ndarray) -> float:
    """Spectral condition number of a 2x2 matrix (inf when singular)."""
    sv = np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)
    if sv[1] == 0.0:
        return math.inf
    return float(sv[0] / sv[1])


def canonical_sampler(mode: str) -> RigSampler:
    """Sampler with package defaults for the given camera mode."""
    return RigSampler(mode=mode)
