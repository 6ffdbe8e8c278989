"""Points-only alignment simulator: episodes, probing, stepping, reward, errors.

An episode places a target point ``p_b`` near the origin, a vertical
alignment direction ``h``, and a controlled point ``p_a`` on the fixed action
plane ``z = standoff_plane_height``. The goal position ``p_star`` is where the
alignment line crosses the action plane. Policies act in the base-frame x/y
plane and observe only projected image points; the 3D distance ``d_sim`` is a
simulator-side diagnostic that is never exposed to policies.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import (
    DEFAULT_COND_MAX,
    IllConditioned,
    Rig,
    RigSampler,
    SamplerExhausted,
    canonical_sampler,
    mat2_cond,
    project,
    sample_rig,
    vec3,
)


class SteppedAfterDone(RuntimeError):
    """step() or probe was called on a finished episode."""


class ProbeOutOfView(RuntimeError):
    """A probe displacement left a camera frustum or the workspace."""


class Status(str, enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAIL_TIMEOUT = "fail_timeout"
    FAIL_OUT_OF_VIEW = "fail_out_of_view"
    FAIL_OUT_OF_WORKSPACE = "fail_out_of_workspace"


@dataclass
class EnvConfig:
    """Simulator parameters. All distances in meters, image noise in
    normalized image units."""

    action_scale: float = 0.005
    probe_scale: float = 0.005
    max_steps: int = 20
    success_eps_sim: float = 0.001
    success_eps_img: float = 0.004
    workspace_half_extent: float = 0.08
    init_offset_range: float = 0.04
    standoff_plane_height: float = 0.05
    obs_noise_std: float = 0.003
    camera_mode: str = "fc"
    seed: int = 0
    rig_sampler: Optional[RigSampler] = None

    def __post_init__(self):
        if self.action_scale <= 0:
            raise ValueError("action_scale must be positive")
        if not (0 < self.probe_scale <= self.workspace_half_extent / 4):
            raise ValueError("probe_scale must be in (0, workspace_half_extent/4]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.success_eps_sim <= 0 or self.success_eps_img <= 0:
            raise ValueError("success thresholds must be positive")
        if self.init_offset_range >= self.workspace_half_extent:
            raise ValueError("init_offset_range must be below workspace_half_extent")
        if self.camera_mode not in ("fc", "rc"):
            raise ValueError(f"unknown camera mode {self.camera_mode!r}")
        if self.rig_sampler is None:
            self.rig_sampler = canonical_sampler(self.camera_mode)
        elif self.rig_sampler.mode != self.camera_mode:
            self.rig_sampler = replace(self.rig_sampler, mode=self.camera_mode)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "rig_sampler"}
        d["rig_sampler"] = dict(self.rig_sampler.__dict__)
        for key in ("azimuth_range_deg", "elevation_range_deg", "radius_range_m"):
            d["rig_sampler"][key] = list(d["rig_sampler"][key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        sampler = d.pop("rig_sampler", None)
        if sampler is not None:
            sampler = dict(sampler)
            for key in ("azimuth_range_deg", "elevation_range_deg", "radius_range_m"):
                if key in sampler:
                    sampler[key] = tuple(sampler[key])
            sampler = RigSampler(**sampler)
        return cls(rig_sampler=sampler, **d)

    @classmethod
    def from_json(cls, path: str) -> "EnvConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Observation:
    """Per-camera image points plus the user-given target-line image vectors."""

    a_left: np.ndarray
    b_left: np.ndarray
    aux_left: np.ndarray
    a_right: np.ndarray
    b_right: np.ndarray
    aux_right: np.ndarray
    h_img_left: np.ndarray
    h_img_right: np.ndarray


@dataclass
class Action:
    ax: float
    ay: float

    def clamped(self) -> "Action":
        return Action(
            ax=min(1.0, max(-1.0, self.ax)),
            ay=min(1.0, max(-1.0, self.ay)),
        )


@dataclass
class ProbeVectors:
    """Image displacement of the controlled point per unit probe action.

    ``m_left``/``m_right`` hold (v_i1, v_i2) as columns: a local estimate of
    the action->image response of each camera.
    """

    v_l1: np.ndarray
    v_l2: np.ndarray
    v_r1: np.ndarray
    v_r2: np.ndarray
    m_left: np.ndarray = field(init=False)
    m_right: np.ndarray = field(init=False)

    def __post_init__(self):
        self.m_left = np.column_stack([self.v_l1, self.v_l2])
        self.m_right = np.column_stack([self.v_r1, self.v_r2])


@dataclass
class StepResult:
    obs: Optional[Observation]
    reward: float
    done: bool
    status: Status
    d_sim: float
    err_img: float


@dataclass
class EnvState:
    rig: Rig
    p_a: np.ndarray
    p_b: np.ndarray
    h: np.ndarray
    aux_point: np.ndarray
    p_star: np.ndarray
    step_count: int = 0
    status: Status = Status.RUNNING

    @property
    def d_sim(self) -> float:
        return float(np.linalg.norm(self.p_a - self.p_star))


def env_rng(cfg: EnvConfig) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))


def _workspace_center(cfg: EnvConfig) -> np.ndarray:
    return vec3(0.0, 0.0, 0.5 * cfg.standoff_plane_height)


def _points_visible(rig: Rig, points: list[np.ndarray]) -> bool:
    for cam in (rig.left, rig.right):
        for p in points:
            if project(cam.pose, cam.intrinsics, p) is None:
                return False
    return True


def _dry_run_probe_ok(rig: Rig, p_a: np.ndarray, probe_scale: float) -> bool:
    """Noise-free rehearsal of the probe: endpoints visible, both response
    matrices invertible within the conditioning guard."""
    dx = p_a + vec3(probe_scale, 0.0, 0.0)
    dy = p_a + vec3(0.0, probe_scale, 0.0)
    for cam in (rig.left, rig.right):
        base = project(cam.pose, cam.intrinsics, p_a)
        px = project(cam.pose, cam.intrinsics, dx)
        py = project(cam.pose, cam.intrinsics, dy)
        if base is None or px is None or py is None:
            return False
        m = np.column_stack([px - base, py - base])
        if mat2_cond(m) > DEFAULT_COND_MAX:
            return False
    return True


def create_env(cfg: EnvConfig, rng: np.random.Generator) -> EnvState:
    """Sample a fresh episode: scene points, goal, and a usable camera rig.

    Rigs that hide any scene point (the goal position included, since the task
    is otherwise unsolvable) or fail the dry-run probe are resampled up to the
    sampler's budget; raises SamplerExhausted past it.
    """
    h = vec3(0.0, 0.0, 1.0)
    p_b = vec3(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), 0.0)
    p_star = vec3(p_b[0], p_b[1], cfg.standoff_plane_height)
    offset = rng.uniform(-cfg.init_offset_range, cfg.init_offset_range, size=2)
    p_a = vec3(p_star[0] + offset[0], p_star[1] + offset[1], cfg.standoff_plane_height)
    aux_point = p_b + rng.uniform(0.2, 0.8) * (p_star - p_b)

    center = _workspace_center(cfg)
    sampler = cfg.rig_sampler
    points = [p_a, p_b, aux_point, p_star]
    for _ in range(sampler.max_resample):
        rig = sample_rig(sampler, center, rng)
        if _points_visible(rig, points) and _dry_run_probe_ok(rig, p_a, cfg.probe_scale):
            return EnvState(rig=rig, p_a=p_a, p_b=p_b, h=h, aux_point=aux_point, p_star=p_star)
        if sampler.mode == "fc":
            # The canonical rig never changes; retrying cannot help.
            break
    raise SamplerExhausted(
        f"no usable rig within {sampler.max_resample} draws (mode={sampler.mode})"
    )


def _project_pair(rig: Rig, p: np.ndarray) -> Optional[tuple[np.ndarray, np.ndarray]]:
    left = project(rig.left.pose, rig.left.intrinsics, p)
    right = project(rig.right.pose, rig.right.intrinsics, p)
    if left is None or right is None:
        return None
    return left, right


def observe(cfg: EnvConfig, state: EnvState, rng: np.random.Generator) -> Optional[Observation]:
    """Noisy projections of the scene points, or None when any leaves a view.

    The target-line vectors ``h_img_*`` are noise-free: they stand for the
    operator-drawn line, not a detection.
    """
    if state.status is not Status.RUNNING:
        raise SteppedAfterDone(f"observe() on episode with status {state.status.value}")
    pairs = []
    for p in (state.p_a, state.p_b, state.aux_point):
        pair = _project_pair(state.rig, p)
        if pair is None:
            return None
        pairs.append(pair)
    star = _project_pair(state.rig, state.p_star)
    if star is None:
        return None

    (a_l, a_r), (b_l, b_r), (aux_l, aux_r) = pairs
    if cfg.obs_noise_std > 0.0:
        noise = rng.normal(0.0, cfg.obs_noise_std, size=(6, 2))
        a_l = a_l + noise[0]
        a_r = a_r + noise[1]
        b_l = b_l + noise[2]
        b_r = b_r + noise[3]
        aux_l = aux_l + noise[4]
        aux_r = aux_r + noise[5]
    return Observation(
        a_left=a_l,
        b_left=b_l,
        aux_left=aux_l,
        a_right=a_r,
        b_right=b_r,
        aux_right=aux_r,
        h_img_left=pairs[1][0] - star[0],
        h_img_right=pairs[1][1] - star[1],
    )


def step(cfg: EnvConfig, state: EnvState, action: Action, rng: np.random.Generator) -> StepResult:
    """Apply one planar action, then score and classify the new state.

    Termination precedence: success, out-of-workspace, out-of-view, timeout.
    The reward is always the distance formula value; failures add no extra
    penalty term.
    """
    if state.status is not Status.RUNNING:
        raise SteppedAfterDone(f"step() on episode with status {state.status.value}")
    act = action.clamped()
    state.p_a = state.p_a + vec3(act.ax * cfg.action_scale, act.ay * cfg.action_scale, 0.0)
    state.step_count += 1

    d = state.d_sim
    reward = float(np.clip(-80.0 * d + 1.0, -10.0, 1.0))
    obs = observe(cfg, state, rng)

    offset_xy = np.max(np.abs(state.p_a[:2] - state.p_b[:2]))
    if d < cfg.success_eps_sim:
        state.status = Status.SUCCESS
    elif offset_xy > cfg.workspace_half_extent:
        state.status = Status.FAIL_OUT_OF_WORKSPACE
    elif obs is None:
        state.status = Status.FAIL_OUT_OF_VIEW
    elif state.step_count >= cfg.max_steps:
        state.status = Status.FAIL_TIMEOUT

    err = image_residual_error(obs) if obs is not None else math.inf
    return StepResult(
        obs=obs,
        reward=reward,
        done=state.status is not Status.RUNNING,
        status=state.status,
        d_sim=d,
        err_img=err,
    )


def _snapshot_controlled_point(
    cfg: EnvConfig, state: EnvState, p: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    pair = _project_pair(state.rig, p)
    if pair is None:
        raise ProbeOutOfView("controlled point left a camera view during probing")
    left, right = pair
    if cfg.obs_noise_std > 0.0:
        noise = rng.normal(0.0, cfg.obs_noise_std, size=(2, 2))
        left = left + noise[0]
        right = right + noise[1]
    return left, right


def run_calibration_probe(cfg: EnvConfig, state: EnvState, rng: np.random.Generator) -> ProbeVectors:
    """Execute the two self-calibration moves and collect image displacements.

    Moves +probe_scale along base x, returns, then +probe_scale along base y,
    returning again; each recorded vector is the difference of noisy image
    snapshots of the controlled point. Probe moves consume no steps, earn no
    reward, and restore the controlled point exactly.
    """
    if state.status is not Status.RUNNING:
        raise SteppedAfterDone(f"probe on episode with status {state.status.value}")
    if state.step_count != 0:
        raise SteppedAfterDone("probe is only available before the first step")

    start = state.p_a.copy()
    displacements = []
    try:
        for delta in (vec3(cfg.probe_scale, 0.0, 0.0), vec3(0.0, cfg.probe_scale, 0.0)):
            base_l, base_r = _snapshot_controlled_point(cfg, state, start, rng)
            moved = start + delta
            if np.max(np.abs(moved[:2] - state.p_b[:2])) > cfg.workspace_half_extent:
                raise ProbeOutOfView("probe displacement left the workspace")
            state.p_a = moved
            moved_l, moved_r = _snapshot_controlled_point(cfg, state, moved, rng)
            displacements.append((moved_l - base_l, moved_r - base_r))
    finally:
        state.p_a = start
    (v_l1, v_r1), (v_l2, v_r2) = displacements
    return ProbeVectors(v_l1=v_l1, v_l2=v_l2, v_r1=v_r1, v_r2=v_r2)


def image_residual_error(obs: Observation) -> float:
    """Worst-camera norm of the image alignment residual (b - a) - h_img.

    This is the only success signal available outside the simulator; it is
    zero in both views exactly when the controlled point sits on the target
    line as seen from both cameras.
    """
    res_left = (obs.b_left - obs.a_left) - obs.h_img_left
    res_right = (obs.b_right - obs.a_right) - obs.h_img_right
    return float(max(np.linalg.norm(res_left), np.linalg.norm(res_right)))
