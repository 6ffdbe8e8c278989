"""Self-calibrating binocular point alignment at desk scale."""

from .env import Action, EnvConfig, EnvState, Observation, ProbeVectors, Status, StepResult
from .features import FeatureVariant, ResidualVectors
from .geometry import CameraIntrinsics, Pose, Rig, RigSampler

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CameraIntrinsics",
    "EnvConfig",
    "EnvState",
    "FeatureVariant",
    "Observation",
    "Pose",
    "ProbeVectors",
    "ResidualVectors",
    "Rig",
    "RigSampler",
    "Status",
    "StepResult",
    "__version__",
]
