"""Versioned policy checkpoints.

Layout: one line of JSON (format_version, variant, configs, seed, training
step counter, and a named tensor manifest with shapes) followed by a binary
payload of little-endian float32 tensors in manifest order. A pure-JSON
variant exists for cross-language fixtures; both declare themselves via the
header's "payload" field. Tensors are float32 on disk, so a checkpoint
round-trips bit-exactly once written.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import EnvConfig
from .features import FeatureVariant
from .nets import RunningNorm
from .ppo import PolicyAgent, PpoHyper

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    variant: FeatureVariant
    env_cfg: EnvConfig
    hyper: PpoHyper
    arrays: dict[str, np.ndarray]
    seed: int
    train_steps: int
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_agent(
        cls, agent: PolicyAgent, env_cfg: EnvConfig, hyper: PpoHyper, seed: int, train_steps: int
    ) -> "Checkpoint":
        return cls(
            variant=agent.variant,
            env_cfg=env_cfg,
            hyper=hyper,
            arrays=agent.all_arrays(),
            seed=seed,
            train_steps=train_steps,
        )

    def to_agent(self) -> PolicyAgent:
        params = {k: v for k, v in self.arrays.items() if not k.startswith("norm.")}
        normalizer = RunningNorm.from_state(self.arrays)
        return PolicyAgent(self.variant, params, normalizer)


def _header(ckpt: Checkpoint, payload: str) -> dict:
    names = sorted(ckpt.arrays)
    return {
        "format_version": ckpt.format_version,
        "payload": payload,
        "variant": ckpt.variant.value,
        "env_config": ckpt.env_cfg.to_dict(),
        "hyper": ckpt.hyper.to_dict(),
        "seed": ckpt.seed,
        "train_steps": ckpt.train_steps,
        "tensors": [{"name": n, "shape": list(ckpt.arrays[n].shape)} for n in names],
    }


def save_checkpoint(ckpt: Checkpoint, path: str | Path, json_format: bool = False) -> None:
    path = Path(path)
    if json_format:
        header = _header(ckpt, "json")
        header["data"] = {
            n: np.asarray(ckpt.arrays[n], dtype=np.float32).reshape(-1).tolist()
            for n in sorted(ckpt.arrays)
        }
        blob = json.dumps(header, sort_keys=True).encode() + b"\n"
        path.write_bytes(blob)
        return
    header = json.dumps(_header(ckpt, "binary-f32-le"), sort_keys=True).encode() + b"\n"
    payload = b"".join(
        np.ascontiguousarray(ckpt.arrays[n], dtype="<f4").tobytes() for n in sorted(ckpt.arrays)
    )
    path.write_bytes(header + payload)


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline])
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['format_version']}")
    arrays: dict[str, np.ndarray] = {}
    if header["payload"] == "json":
        for spec in header["tensors"]:
            flat = np.asarray(header["data"][spec["name"]], dtype=np.float32)
            arrays[spec["name"]] = flat.astype(np.float64).reshape(spec["shape"])
    else:
        offset = newline + 1
        for spec in header["tensors"]:
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            flat = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
            offset += 4 * count
            arrays[spec["name"]] = flat.astype(np.float64).reshape(spec["shape"])
    return Checkpoint(
        variant=FeatureVariant(header["variant"]),
        env_cfg=EnvConfig.from_dict(header["env_config"]),
        hyper=PpoHyper.from_dict(header["hyper"]),
        arrays=arrays,
        seed=header["seed"],
        train_steps=header["train_steps"],
    )
