"""Ablation-matrix runner: train/evaluate every (variant, camera mode, seed)
cell, persist per-cell artifacts, and aggregate success statistics.

Layout under ``output_dir``:

    <variant>/<train_mode>/seed<k>/checkpoint
    <variant>/<train_mode>/seed<k>/metrics.csv
    <variant>/<train_mode>/seed<k>/eval_<test_mode>.json
    ablation.csv
    ablation.txt

Every cell artifact is written atomically and skipped when already present,
so a partially completed matrix resumes where it stopped.
"""

from __future__ import annotations

import json
import math
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .env import EnvConfig
from .features import FeatureVariant
from .ppo import EpisodeOutcome, PpoHyper, evaluate_policy, metrics_to_csv, train
from .stats import rate_difference_ci, success_rate_ci


class MissingCell(LookupError):
    pass


@dataclass
class ExperimentConfig:
    variants: list[str] = field(default_factory=lambda: [v.value for v in FeatureVariant])
    train_modes: list[str] = field(default_factory=lambda: ["fc", "rc"])
    test_modes: list[str] = field(default_factory=lambda: ["fc", "rc"])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    episodes_per_eval: int = 200
    env_overrides: dict = field(default_factory=dict)
    hyper_overrides: dict = field(default_factory=dict)
    output_dir: str = "runs/ablation"

    def __post_init__(self):
        if not (self.variants and self.train_modes and self.test_modes and self.seeds):
            raise ValueError("variants, modes, and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass
class AblationCell:
    variant: str
    train_mode: str
    test_mode: str
    per_seed_rates: dict[int, float]
    mean: float
    spread: float
    failure_causes: dict[str, int]
    median_steps_to_success: float
    successes: int
    trials: int


def atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _env_cfg(cfg: ExperimentConfig, mode: str, seed: int) -> EnvConfig:
    return EnvConfig(camera_mode=mode, seed=seed, **cfg.env_overrides)


def _run_dir(cfg: ExperimentConfig, variant: str, train_mode: str, seed: int) -> Path:
    return Path(cfg.output_dir) / variant / train_mode / f"seed{seed}"


def ensure_trained(cfg: ExperimentConfig, variant: str, train_mode: str, seed: int) -> Path:
    """Train the run if its checkpoint is missing; returns the checkpoint path."""
    run_dir = _run_dir(cfg, variant, train_mode, seed)
    ckpt_path = run_dir / "checkpoint"
    if ckpt_path.exists():
        return ckpt_path
    run_dir.mkdir(parents=True, exist_ok=True)
    hyper = PpoHyper(**cfg.hyper_overrides)
    env_cfg = _env_cfg(cfg, train_mode, seed)
    result = train(FeatureVariant(variant), env_cfg, hyper, seed)
    atomic_write(run_dir / "metrics.csv", metrics_to_csv(result.metrics).encode())
    ckpt = Checkpoint.from_agent(result.agent, env_cfg, hyper, seed, result.env_steps)
    tmp = run_dir / "checkpoint.tmp"
    save_checkpoint(ckpt, tmp)
    os.replace(tmp, ckpt_path)
    return ckpt_path


def outcomes_to_record(
    variant: str, train_mode: str, test_mode: str, seed: int, outcomes: list[EpisodeOutcome]
) -> dict:
    successes = sum(o.success for o in outcomes)
    rate, lo, hi = success_rate_ci(successes, len(outcomes))
    causes: dict[str, int] = {}
    for o in outcomes:
        causes[o.cause] = causes.get(o.cause, 0) + 1
    steps = sorted(o.steps for o in outcomes if o.success)
    return {
        "variant": variant,
        "train_mode": train_mode,
        "test_mode": test_mode,
        "seed": seed,
        "episodes": len(outcomes),
        "successes": successes,
        "success_rate": rate,
        "wilson_95": [lo, hi],
        "failure_causes": causes,
        "steps_to_success": steps,
    }


def ensure_evaluated(
    cfg: ExperimentConfig, variant: str, train_mode: str, test_mode: str, seed: int
) -> dict:
    """Evaluate the run against one test mode if not already recorded."""
    run_dir = _run_dir(cfg, variant, train_mode, seed)
    eval_path = run_dir / f"eval_{test_mode}.json"
    if eval_path.exists():
        return json.loads(eval_path.read_text())
    ckpt_path = ensure_trained(cfg, variant, train_mode, seed)
    agent = load_checkpoint(ckpt_path).to_agent()
    outcomes = evaluate_policy(agent, _env_cfg(cfg, test_mode, seed), cfg.episodes_per_eval, seed)
    record = outcomes_to_record(variant, train_mode, test_mode, seed, outcomes)
    atomic_write(eval_path, (json.dumps(record, indent=2, sort_keys=True) + "\n").encode())
    return record


def _aggregate_cell(
    variant: str, train_mode: str, test_mode: str, records: list[dict]
) -> AblationCell:
    rates = {r["seed"]: r["success_rate"] for r in records}
    values = list(rates.values())
    causes: dict[str, int] = {}
    steps: list[int] = []
    for r in records:
        for cause, count in r["failure_causes"].items():
            causes[cause] = causes.get(cause, 0) + count
        steps.extend(r["steps_to_success"])
    return AblationCell(
        variant=variant,
        train_mode=train_mode,
        test_mode=test_mode,
        per_seed_rates=rates,
        mean=sum(values) / len(values),
        spread=statistics.pstdev(values) if len(values) > 1 else 0.0,
        failure_causes=causes,
        median_steps_to_success=float(statistics.median(steps)) if steps else math.nan,
        successes=sum(r["successes"] for r in records),
        trials=sum(r["episodes"] for r in records),
    )


def render_table(cells: list[AblationCell], variants: list[str]) -> str:
    """Text table: one row per variant, one column per train/test mode pair."""
    pairs = sorted({(c.train_mode, c.test_mode) for c in cells})
    headers = ["variant"] + [f"{tr}_train/{te}_test" for tr, te in pairs]
    by_key = {(c.variant, c.train_mode, c.test_mode): c for c in cells}
    rows = [headers]
    for variant in variants:
        row = [variant]
        for tr, te in pairs:
            cell = by_key.get((variant, tr, te))
            row.append(f"{100.0 * cell.mean:.1f}%" if cell else "-")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = ["  ".join(val.ljust(widths[i]) for i, val in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def cells_to_csv(cells: list[AblationCell]) -> str:
    header = (
        "variant,train_mode,test_mode,n_seeds,episodes,successes,"
        "mean_success_rate,std_success_rate,median_steps_to_success"
    )
    lines = [header]
    for c in sorted(cells, key=lambda c: (c.variant, c.train_mode, c.test_mode)):
        lines.append(
            f"{c.variant},{c.train_mode},{c.test_mode},{len(c.per_seed_rates)},"
            f"{c.trials},{c.successes},{c.mean!r},{c.spread!r},{c.median_steps_to_success!r}"
        )
    return "\n".join(lines) + "\n"


def run_ablation_matrix(cfg: ExperimentConfig) -> tuple[list[AblationCell], list[str]]:
    """Run every requested cell; returns (cells, error strings).

    Failed runs are recorded and skipped so the rest of the matrix still
    completes; rerunning resumes from persisted artifacts.
    """
    cells: list[AblationCell] = []
    errors: list[str] = []
    for variant in cfg.variants:
        for train_mode in cfg.train_modes:
            for test_mode in cfg.test_modes:
                records = []
                for seed in cfg.seeds:
                    try:
                        records.append(ensure_evaluated(cfg, variant, train_mode, test_mode, seed))
                    except Exception as exc:  # noqa: BLE001 - preserve partial matrix
                        errors.append(f"{variant}/{train_mode}->{test_mode}/seed{seed}: {exc}")
                if records:
                    cells.append(_aggregate_cell(variant, train_mode, test_mode, records))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "ablation.csv", cells_to_csv(cells).encode())
    atomic_write(out / "ablation.txt", render_table(cells, cfg.variants).encode())
    if errors:
        atomic_write(out / "ablation_errors.json", (json.dumps(errors, indent=2) + "\n").encode())
    return cells, errors


def compare_binocular_monocular(
    cfg: ExperimentConfig, train_mode: str = "rc", test_mode: str = "fc"
) -> dict:
    """Paired two-camera vs one-camera comparison on identical seeds and episodes."""
    records: dict[str, list[dict]] = {}
    for variant in ("iml", "moniml"):
        recs = []
        for seed in cfg.seeds:
            path = _run_dir(cfg, variant, train_mode, seed) / f"eval_{test_mode}.json"
            if path.exists():
                recs.append(json.loads(path.read_text()))
        if not recs:
            raise MissingCell(f"no evaluations for {variant} {train_mode}->{test_mode}")
        records[variant] = recs
    seeds_a = {r["seed"] for r in records["iml"]}
    seeds_b = {r["seed"] for r in records["moniml"]}
    common = sorted(seeds_a & seeds_b)
    if not common:
        raise MissingCell("no common seeds between iml and moniml evaluations")

    def _pool(recs: list[dict]) -> tuple[int, int]:
        recs = [r for r in recs if r["seed"] in common]
        return sum(r["successes"] for r in recs), sum(r["episodes"] for r in recs)

    s_a, n_a = _pool(records["iml"])
    s_b, n_b = _pool(records["moniml"])
    rate_a, lo_a, hi_a = success_rate_ci(s_a, n_a)
    rate_b, lo_b, hi_b = success_rate_ci(s_b, n_b)
    diff, d_lo, d_hi = rate_difference_ci(s_a, n_a, s_b, n_b)
    return {
        "train_mode": train_mode,
        "test_mode": test_mode,
        "seeds": common,
        "iml": {"successes": s_a, "episodes": n_a, "rate": rate_a, "wilson_95": [lo_a, hi_a]},
        "moniml": {"successes": s_b, "episodes": n_b, "rate": rate_b, "wilson_95": [lo_b, hi_b]},
        "difference": diff,
        "difference_95": [d_lo, d_hi],
    }
