"""Experiment orchestration: train a trial spec, log, checkpoint, resume.

Artifacts in the output directory:
    spec.yaml       echo of the spec that ran
    metrics.csv     one row per episode end (plus the latest update stats)
    ck_<step>.npz   checkpoints at the configured cadence (update boundaries)
    final.npz       checkpoint at the end of training
    summary.json    machine-readable result summary

A run is resumable from its latest checkpoint: parameters, optimizer
state, normalizers, rng streams and counters are restored; training then
continues to exactly the originally configured step count. (The SAC
replay buffer is not persisted; it refills after resume.)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import nn
from ..env import CoralEnv
from ..rl.checkpoint import load_checkpoint, save_checkpoint
from ..rl.trainers import PPOTrainer, SACTrainer
from .spec import ExperimentSpec, checkpoint_extras, save_experiment_spec

PPO_METRIC_KEYS = ["policy_loss", "value_loss", "entropy", "clip_fraction"]
SAC_METRIC_KEYS = ["critic_loss", "actor_loss", "alpha", "entropy_estimate"]


@dataclass
class RunResult:
    output_dir: Path
    metrics_path: Path
    final_checkpoint: Path
    env_steps: int
    episodes: int
    mean_reward_last100: float
    per_agent_mean_last100: list[float]


def _metric_keys(algorithm: str) -> list[str]:
    return SAC_METRIC_KEYS if algorithm == "sac" else PPO_METRIC_KEYS


def _format(x) -> str:
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _opt_state_arrays(prefix: str, opt: nn.Adam) -> dict:
    return {
        f"{prefix}_m": np.concatenate([m.ravel() for m in opt.m]),
        f"{prefix}_v": np.concatenate([v.ravel() for v in opt.v]),
        f"{prefix}_t": np.array([opt.t], dtype=float),
    }


def _load_opt_state(prefix: str, opt: nn.Adam, arrays: dict) -> None:
    m_flat, v_flat = arrays[f"{prefix}_m"], arrays[f"{prefix}_v"]
    offset = 0
    for m, v in zip(opt.m, opt.v):
        n = m.size
        m[...] = m_flat[offset:offset + n].reshape(m.shape)
        v[...] = v_flat[offset:offset + n].reshape(v.shape)
        offset += n
    opt.t = int(arrays[f"{prefix}_t"][0])


def _save_trainer_checkpoint(path, spec: ExperimentSpec, trainer) -> None:
    extras = checkpoint_extras(spec)
    arrays: dict[str, np.ndarray] = {}
    rng_states: dict[str, dict] = {}
    if isinstance(trainer, PPOTrainer):
        nets = {}
        norm = trainer.learners[0].normalizer
        for i, learner in enumerate(trainer.learners):
            suffix = "" if len(trainer.learners) == 1 else f"_{i}"
            nets[f"policy{suffix}"] = learner.policy.params()
            nets[f"value{suffix}"] = learner.value.params()
            arrays.update(_opt_state_arrays(f"popt{suffix}", learner.policy_opt))
            arrays.update(_opt_state_arrays(f"vopt{suffix}", learner.value_opt))
            arrays[f"norm{suffix}_mean"] = learner.normalizer.mean
            arrays[f"norm{suffix}_var"] = learner.normalizer.var
            arrays[f"norm{suffix}_count"] = np.array([learner.normalizer.count])
            rng_states[f"sample{suffix}"] = learner.sample_rng.bit_generator.state
            rng_states[f"update{suffix}"] = learner.update_rng.bit_generator.state
        extras["rng_states"] = rng_states
        extras["episode_counter"] = trainer.episode_counter
        save_checkpoint(path, trainer.config.algorithm, trainer.net_config, nets,
                        norm, trainer.env_step, trainer.episode_counter,
                        extras=extras, arrays=arrays)
    else:
        p = trainer.params
        nets = {"policy": p.actor.params(), "q1": p.q1.params(), "q2": p.q2.params(),
                "q1_target": p.q1_target.params(), "q2_target": p.q2_target.params()}
        arrays["log_alpha"] = p.log_alpha.value
        arrays.update(_opt_state_arrays("aopt", p.actor_opt))
        arrays.update(_opt_state_arrays("q1opt", p.q1_opt))
        arrays.update(_opt_state_arrays("q2opt", p.q2_opt))
        arrays.update(_opt_state_arrays("alopt", p.alpha_opt))
        rng_states["sample"] = trainer.sample_rng.bit_generator.state
        rng_states["update"] = trainer.update_rng.bit_generator.state
        extras["rng_states"] = rng_states
        extras["episode_counter"] = trainer.episode_counter
        save_checkpoint(path, "sac", trainer.net_config, nets, trainer.normalizer,
                        trainer.env_step, trainer.episode_counter,
                        extras=extras, arrays=arrays)


def _restore_trainer(trainer, ck) -> None:
    if isinstance(trainer, PPOTrainer):
        for i, learner in enumerate(trainer.learners):
            suffix = "" if len(trainer.learners) == 1 else f"_{i}"
            nn.set_flat(learner.policy.params(), ck.nets[f"policy{suffix}"])
            nn.set_flat(learner.value.params(), ck.nets[f"value{suffix}"])
            _load_opt_state(f"popt{suffix}", learner.policy_opt, ck.arrays)
            _load_opt_state(f"vopt{suffix}", learner.value_opt, ck.arrays)
            learner.normalizer.load_state({
                "mean": ck.arrays[f"norm{suffix}_mean"],
                "var": ck.arrays[f"norm{suffix}_var"],
                "count": float(ck.arrays[f"norm{suffix}_count"][0])})
            states = ck.extras["rng_states"]
            learner.sample_rng.bit_generator.state = states[f"sample{suffix}"]
            learner.update_rng.bit_generator.state = states[f"update{suffix}"]
    else:
        p = trainer.params
        nn.set_flat(p.actor.params(), ck.nets["policy"])
        nn.set_flat(p.q1.params(), ck.nets["q1"])
        nn.set_flat(p.q2.params(), ck.nets["q2"])
        nn.set_flat(p.q1_target.params(), ck.nets["q1_target"])
        nn.set_flat(p.q2_target.params(), ck.nets["q2_target"])
        p.log_alpha.value[...] = ck.arrays["log_alpha"]
        _load_opt_state("aopt", p.actor_opt, ck.arrays)
        _load_opt_state("q1opt", p.q1_opt, ck.arrays)
        _load_opt_state("q2opt", p.q2_opt, ck.arrays)
        _load_opt_state("alopt", p.alpha_opt, ck.arrays)
        trainer.normalizer.load_state(ck.normalizer.state())
        states = ck.extras["rng_states"]
        trainer.sample_rng.bit_generator.state = states["sample"]
        trainer.update_rng.bit_generator.state = states["update"]
    trainer.env_step = ck.env_step
    trainer.episode_counter = int(ck.extras["episode_counter"])


def _truncate_metrics(path: Path, max_step: int, header: list[str]) -> list[str]:
    """Drop episode rows logged after the checkpoint we resume from."""
    kept = []
    if path.exists():
        lines = path.read_text().splitlines()
        for line in lines[1:]:
            if line and int(line.split(",", 1)[0]) <= max_step:
                kept.append(line)
    path.write_text(",".join(header) + "\n" + "".join(l + "\n" for l in kept))
    return kept


def latest_checkpoint(output_dir: Path) -> Path | None:
    cks = sorted(output_dir.glob("ck_*.npz"))
    return cks[-1] if cks else None


def run_experiment(spec: ExperimentSpec, resume: bool = False) -> RunResult:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_experiment_spec(spec, out / "spec.yaml")

    env = CoralEnv(spec.world, spec.vehicle, spec.sensors)
    algorithm = spec.train.algorithm
    if algorithm in ("ppo", "ippo"):
        trainer = PPOTrainer(env, spec.train, spec.network)
    else:
        trainer = SACTrainer(env, spec.train, spec.network)

    keys = _metric_keys(algorithm)
    header = ["step", "episode", "agent", "reward", "length"] + keys
    metrics_path = out / "metrics.csv"

    rewards_by_agent: dict[int, list[float]] = {}
    if resume:
        ck_path = latest_checkpoint(out)
        if ck_path is None:
            raise FileNotFoundError(f"no checkpoint to resume from in {out}")
        _restore_trainer(trainer, load_checkpoint(ck_path))
        for line in _truncate_metrics(metrics_path, trainer.env_step, header):
            parts = line.split(",")
            rewards_by_agent.setdefault(int(parts[2]), []).append(float(parts[3]))
    else:
        metrics_path.write_text(",".join(header) + "\n")
    last_ck_bucket = trainer.env_step // spec.checkpoint_every

    with open(metrics_path, "a", newline="") as metrics_file:
        def on_episode(record):
            if algorithm == "sac":
                metrics = trainer.last_metrics
            else:
                metrics = trainer.learners[record.agent].last_metrics
            row = [record.env_step, record.episode, record.agent,
                   _format(record.reward), record.length]
            row += [_format(float(metrics[k])) if k in metrics else ""
                    for k in keys]
            metrics_file.write(",".join(str(x) for x in row) + "\n")
            rewards_by_agent.setdefault(record.agent, []).append(record.reward)

        num_agents = env.num_agents

        def on_update(env_step, agent, metrics):
            nonlocal last_ck_bucket
            is_last_agent = (algorithm == "sac") or (agent == num_agents - 1)
            if not is_last_agent:
                return
            bucket = env_step // spec.checkpoint_every
            if bucket > last_ck_bucket:
                last_ck_bucket = bucket
                metrics_file.flush()
                _save_trainer_checkpoint(out / f"ck_{env_step:09d}.npz", spec, trainer)

        trainer.run(on_episode=on_episode, on_update=on_update)

    final_path = out / "final.npz"
    _save_trainer_checkpoint(final_path, spec, trainer)

    per_agent = []
    for agent in sorted(rewards_by_agent):
        tail = rewards_by_agent[agent][-100:]
        per_agent.append(float(np.mean(tail)) if tail else 0.0)
    mean100 = float(np.mean(per_agent)) if per_agent else 0.0
    summary = {
        "name": spec.name,
        "algorithm": algorithm,
        "env_steps": trainer.env_step,
        "episodes": trainer.episode_counter,
        "num_agents": env.num_agents,
        "mean_reward_last100": mean100,
        "per_agent_mean_last100": per_agent,
        "total_reward_last100": float(np.sum(per_agent)),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return RunResult(
        output_dir=out,
        metrics_path=metrics_path,
        final_checkpoint=final_path,
        env_steps=trainer.env_step,
        episodes=trainer.episode_counter,
        mean_reward_last100=mean100,
        per_agent_mean_last100=per_agent,
    )
