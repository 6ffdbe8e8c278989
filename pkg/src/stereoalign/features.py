"""Policy-input construction from probe vectors and image observations.

Six observation mappings are supported, selected by ``FeatureVariant``:

  nm      raw image points of both cameras, no calibration use (12)
  pml     probe vectors concatenated with the residuals (12)
  mml     probe matrix times residual, per camera (4)
  iml     inverse probe matrix times residual, per camera (4)
  moniml  left-camera block of iml only (2)
  rtl     residuals only, one timestep of a recurrent sequence (4)

The inverse mapping re-expresses image residuals in action units, which makes
the feature nearly independent of where the cameras happen to be mounted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .env import Action, Observation, ProbeVectors
from .geometry import DEFAULT_COND_MAX, mat2_inverse_guarded


class FeatureVariant(str, enum.Enum):
    NM = "nm"
    PML = "pml"
    MML = "mml"
    IML = "iml"
    MONIML = "moniml"
    RTL = "rtl"

    @property
    def dim(self) -> int:
        return _FEATURE_DIMS[self]

    @property
    def uses_probe(self) -> bool:
        return self not in (FeatureVariant.NM, FeatureVariant.RTL)

    @property
    def recurrent(self) -> bool:
        return self is FeatureVariant.RTL


_FEATURE_DIMS = {
    FeatureVariant.NM: 12,
    FeatureVariant.PML: 12,
    FeatureVariant.MML: 4,
    FeatureVariant.IML: 4,
    FeatureVariant.MONIML: 2,
    FeatureVariant.RTL: 4,
}


@dataclass
class ResidualVectors:
    """Per-camera image residual between the observed and desired alignment."""

    v_lrel: np.ndarray
    v_rrel: np.ndarray


def compute_residual(obs: Observation) -> ResidualVectors:
    """Residual (b - a) - h_img for each camera; zero in both views at alignment."""
    return ResidualVectors(
        v_lrel=(obs.b_left - obs.a_left) - obs.h_img_left,
        v_rrel=(obs.b_right - obs.a_right) - obs.h_img_right,
    )


def build_features(
    variant: FeatureVariant,
    probe: Optional[ProbeVectors],
    residual: ResidualVectors,
    obs: Observation,
    cond_max: float = DEFAULT_COND_MAX,
) -> np.ndarray:
    """Flat policy-input vector for the given variant.

    Raises IllConditioned for the inverse variants when a probe matrix fails
    the conditioning guard; callers treat that as an aborted episode.
    """
    if variant.uses_probe and probe is None:
        raise ValueError(f"variant {variant.value} requires probe vectors")
    if variant is FeatureVariant.NM:
        parts = [obs.a_left, obs.b_left, obs.aux_left, obs.a_right, obs.b_right, obs.aux_right]
    elif variant is FeatureVariant.PML:
        parts = [probe.v_l1, probe.v_l2, residual.v_lrel, probe.v_r1, probe.v_r2, residual.v_rrel]
    elif variant is FeatureVariant.MML:
        parts = [probe.m_left @ residual.v_lrel, probe.m_right @ residual.v_rrel]
    elif variant is FeatureVariant.IML:
        parts = [
            mat2_inverse_guarded(probe.m_left, cond_max) @ residual.v_lrel,
            mat2_inverse_guarded(probe.m_right, cond_max) @ residual.v_rrel,
        ]
    elif variant is FeatureVariant.MONIML:
        parts = [mat2_inverse_guarded(probe.m_left, cond_max) @ residual.v_lrel]
    elif variant is FeatureVariant.RTL:
        parts = [residual.v_lrel, residual.v_rrel]
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unhandled variant {variant!r}")
    return np.concatenate(parts).astype(np.float64)


def analytic_iml_action(
    probe: ProbeVectors,
    residual: ResidualVectors,
    gain: float,
    probe_scale: float,
    action_scale: float,
    cond_max: float = DEFAULT_COND_MAX,
) -> Action:
    """Learning-free controller: average the per-camera inverse corrections.

    The probe_scale/action_scale factor converts image displacement per probe
    unit into action units, so gain 1 is a full Newton-style step. Components
    are clamped to the [-1, 1] action box.
    """
    if not (0.0 < gain <= 1.0):
        raise ValueError("gain must be in (0, 1]")
    corr_left = mat2_inverse_guarded(probe.m_left, cond_max) @ residual.v_lrel
    corr_right = mat2_inverse_guarded(probe.m_right, cond_max) @ residual.v_rrel
    raw = gain * (probe_scale / action_scale) * 0.5 * (corr_left + corr_right)
    return Action(ax=float(raw[0]), ay=float(raw[1])).clamped()
