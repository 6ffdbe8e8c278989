"""Command-line interface: train, eval, ablate, oracle, serve.

JSON config files provide defaults; every flag overrides the corresponding
config key. Exit code is 0 only when everything requested completed.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .env import EnvConfig
from .features import FeatureVariant
from .harness import (
    ExperimentConfig,
    atomic_write,
    compare_binocular_monocular,
    outcomes_to_record,
    run_ablation_matrix,
)
from .ppo import AnalyticAgent, PpoHyper, evaluate_policy, metrics_to_csv, train


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _split_cfg(config: dict) -> tuple[dict, dict]:
    return dict(config.get("env", {})), dict(config.get("hyper", {}))


def cmd_train(args) -> int:
    env_kw, hyper_kw = _split_cfg(_load_json(args.config))
    if args.camera_mode:
        env_kw["camera_mode"] = args.camera_mode
        # A configured sampler for another mode would fight the flag.
        sampler = env_kw.get("rig_sampler")
        if sampler is not None and sampler.get("mode") != args.camera_mode:
            env_kw.pop("rig_sampler")
    env_kw["seed"] = args.seed
    env_cfg = EnvConfig.from_dict(env_kw)
    hyper = PpoHyper(**hyper_kw)
    variant = FeatureVariant(args.variant)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        print(
            f"update {row['update']:4d}  steps {row['env_steps']:7d}  "
            f"reward {row['mean_episode_reward']:8.2f}  "
            f"train-success {row['success_rate_train']:.2f}",
            file=sys.stderr,
        )

    result = train(variant, env_cfg, hyper, args.seed, progress=progress if args.verbose else None)
    atomic_write(out / "metrics.csv", metrics_to_csv(result.metrics).encode())
    ckpt = Checkpoint.from_agent(result.agent, env_cfg, hyper, args.seed, result.env_steps)
    save_checkpoint(ckpt, out / "checkpoint")
    if args.ckpt_json:
        save_checkpoint(ckpt, out / "checkpoint.json", json_format=True)
    print(f"trained {variant.value} ({result.env_steps} env steps) -> {out / 'checkpoint'}")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    env_kw = {}
    if args.camera_mode:
        env_kw["camera_mode"] = args.camera_mode
    if args.noise is not None:
        env_kw["obs_noise_std"] = args.noise
    env_cfg = EnvConfig(seed=args.seed, **env_kw)
    outcomes = evaluate_policy(ckpt.to_agent(), env_cfg, args.episodes, args.seed)
    record = outcomes_to_record(
        ckpt.variant.value, ckpt.env_cfg.camera_mode, env_cfg.camera_mode, args.seed, outcomes
    )
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def cmd_oracle(args) -> int:
    env_cfg = EnvConfig(camera_mode=args.camera_mode, seed=args.seed, obs_noise_std=args.noise)
    outcomes = evaluate_policy(AnalyticAgent(gain=args.gain), env_cfg, args.episodes, args.seed)
    record = outcomes_to_record("oracle", "-", args.camera_mode, args.seed, outcomes)
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg_kw = _load_json(args.config)
    if args.out:
        cfg_kw["output_dir"] = args.out
    cfg = ExperimentConfig(**cfg_kw)
    cells, errors = run_ablation_matrix(cfg)
    table = Path(cfg.output_dir) / "ablation.txt"
    print(table.read_text())
    try:
        comparison = compare_binocular_monocular(cfg)
        print("two-camera vs one-camera (rc-trained, fc-tested):")
        print(json.dumps(comparison, indent=2))
    except Exception:
        pass
    for err in errors:
        print(f"FAILED {err}", file=sys.stderr)
    return 1 if errors else 0


def cmd_serve(args) -> int:
    from .play import serve

    env_kw, _ = _split_cfg(_load_json(args.config))
    env_kw.setdefault("camera_mode", "fc")
    env_kw.setdefault("obs_noise_std", 0.0)
    env_cfg = EnvConfig.from_dict(env_kw)
    print(f"serving on ws://{args.host}:{args.port} (camera_mode={env_cfg.camera_mode})")
    try:
        asyncio.run(serve(args.port, env_cfg, args.out, host=args.host))
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stereoalign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one policy")
    p.add_argument("--variant", required=True, choices=[v.value for v in FeatureVariant])
    p.add_argument("--camera-mode", choices=["fc", "rc"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with env/hyper sections")
    p.add_argument("--out", default="runs/train")
    p.add_argument("--ckpt-json", action="store_true", help="also write a pure-JSON checkpoint")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--camera-mode", choices=["fc", "rc"])
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="evaluate the learning-free controller")
    p.add_argument("--camera-mode", choices=["fc", "rc"], default="rc")
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--gain", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("ablate", help="run the variant x camera-mode matrix")
    p.add_argument("--config", help="JSON ExperimentConfig")
    p.add_argument("--out", help="output directory override")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="serve live play sessions over websockets")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", help="JSON file with an env section for session defaults")
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
