#!/usr/bin/env python3
"""Sweep observation noise and rig-placement ranges to locate the regime
where the ablation matrix separates: inverse-mapped features keep working
while raw-point and single-camera policies degrade.

Writes one line per (config, variant, train_mode) with test success rates.
"""

from __future__ import annotations

import argparse
import time

from stereoalign.env import EnvConfig
from stereoalign.features import FeatureVariant
from stereoalign.geometry import RigSampler
from stereoalign.ppo import PpoHyper, evaluate_policy, success_rate, train


def make_cfg(mode: str, seed: int, knobs: dict) -> EnvConfig:
    sampler = RigSampler(
        mode=mode,
        azimuth_range_deg=(-knobs["azimuth"], knobs["azimuth"]),
        elevation_range_deg=(knobs["elev_lo"], knobs["elev_hi"]),
        radius_range_m=(knobs["radius_lo"], knobs["radius_hi"]),
        roll_jitter_deg=knobs["roll"],
        baseline_m=knobs["baseline"],
    )
    return EnvConfig(
        camera_mode=mode, seed=seed, obs_noise_std=knobs["noise"], rig_sampler=sampler
    )


def run_point(knobs: dict, seed: int, variants: list[str], fc_iml: bool):
    tag = " ".join(f"{k}={v}" for k, v in knobs.items())
    jobs = [(v, "rc") for v in variants] + ([("iml", "fc")] if fc_iml else [])
    for variant, train_mode in jobs:
        t0 = time.time()
        res = train(
            FeatureVariant(variant), make_cfg(train_mode, seed, knobs), PpoHyper(), seed=seed
        )
        rates = {}
        for test_mode in ("fc", "rc"):
            outs = evaluate_policy(res.agent, make_cfg(test_mode, seed, knobs), 200, seed)
            rates[test_mode] = success_rate(outs)
        print(
            f"{tag} seed={seed} | {variant:7s} {train_mode}-train: "
            f"fc={rates['fc']:.3f} rc={rates['rc']:.3f} "
            f"(discarded {res.discarded_episodes}, {time.time() - t0:.0f}s)",
            flush=True,
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--noise", type=float, nargs="+", default=[0.002])
    parser.add_argument("--elev-lo", type=float, default=8.0)
    parser.add_argument("--elev-hi", type=float, default=70.0)
    parser.add_argument("--azimuth", type=float, default=180.0)
    parser.add_argument("--radius-lo", type=float, default=0.25)
    parser.add_argument("--radius-hi", type=float, default=0.5)
    parser.add_argument("--roll", type=float, nargs="+", default=[60.0])
    parser.add_argument("--baseline", type=float, default=0.06)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-fc-iml", action="store_true")
    parser.add_argument("--variants", nargs="+", default=["iml", "moniml", "nm", "mml", "pml"])
    args = parser.parse_args()
    for noise in args.noise:
        for roll in args.roll:
            knobs = dict(
                noise=noise,
                elev_lo=args.elev_lo,
                elev_hi=args.elev_hi,
                azimuth=args.azimuth,
                radius_lo=args.radius_lo,
                radius_hi=args.radius_hi,
                roll=roll,
                baseline=args.baseline,
            )
            run_point(knobs, args.seed, args.variants, not args.no_fc_iml)


if __name__ == "__main__":
    main()
