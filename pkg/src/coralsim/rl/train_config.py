"""Training hyperparameters for all three algorithms."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "ppo"          # ppo | sac | ippo
    total_steps: int = 200_000      # environment steps (per agent for ippo)
    seed: int = 0

    # shared
    gamma: float = 0.99
    learning_rate: float = 3e-4
    grad_clip: float = 0.5

    # on-policy (ppo / ippo)
    horizon: int = 2048
    minibatch_size: int = 256
    epochs: int = 3
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    entropy_coef: float = 0.005
    value_coef: float = 0.5

    # off-policy (sac)
    replay_capacity: int = 100_000
    batch_size: int = 256
    tau: float = 0.005
    initial_temperature: float = 0.2
    update_every: int = 1           # env steps per gradient update
    warmup_steps: int = 1000        # random actions before learning starts

    def __post_init__(self):
        if self.algorithm not in ("ppo", "sac", "ippo"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gamma and gae_lambda must be in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")
        if min(self.total_steps, self.horizon, self.minibatch_size, self.epochs,
               self.replay_capacity, self.batch_size, self.update_every) <= 0:
            raise ValueError("sizes must be positive")
