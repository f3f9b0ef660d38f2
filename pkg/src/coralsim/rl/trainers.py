"""Training loops: PPO (N independent learners over one shared env) and SAC.

Each learner owns its networks, optimizers, observation normalizer, rollout
buffer and rng streams; nothing is shared between agents (independent PPO
is plain PPO with N > 1). Episodes re-randomize the world layout: episode k
resets the environment with seed base_seed + k.

All randomness flows from numpy SeedSequence spawns of the training seed,
so a fixed (config, seed) pair reproduces training bit for bit on one
machine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..control import ActionCommand
from ..env import CoralEnv
from .buffers import ReplayBuffer, RolloutBuffer, RunningMeanStd
from .distributions import log_prob, sample_policy
from .networks import NetworkConfig, PolicyNetwork, QNetwork, ValueNetwork, copy_params
from .ppo import ppo_update
from .sac import SACParams, sac_update
from .train_config import TrainConfig

ACTION_DIM = 3
VECTOR_DIM = 4


@dataclass
class EpisodeRecord:
    agent: int
    episode: int
    env_step: int
    reward: float
    length: int


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, *key]))


class PPOLearner:
    """One agent's networks, buffer and rng streams."""

    def __init__(self, net_config: NetworkConfig, config: TrainConfig, agent: int):
        init_rng = _rng(config.seed, 10, agent)
        self.policy = PolicyNetwork(net_config, ACTION_DIM, init_rng)
        self.value = ValueNetwork(net_config, init_rng)
        self.policy_opt = nn.Adam(self.policy.params(), config.learning_rate)
        self.value_opt = nn.Adam(self.value.params(), config.learning_rate)
        self.normalizer = RunningMeanStd(VECTOR_DIM)
        self.sample_rng = _rng(config.seed, 11, agent)
        self.update_rng = _rng(config.seed, 12, agent)
        self.buffer = RolloutBuffer(config.horizon, net_config.image_shape,
                                    VECTOR_DIM, ACTION_DIM)
        self.raw_vectors: list[np.ndarray] = []
        self.last_metrics: dict = {}

    def prepare(self, obs):
        """Normalize an observation into network inputs (batch of one)."""
        image = obs.image[None] if self.policy.config.image_shape is not None else None
        vector = self.normalizer.normalize(obs.vector)[None]
        return image, vector

    def act(self, obs):
        image, vector = self.prepare(obs)
        mean, log_std = self.policy.forward(image, vector)
        sample = sample_policy(mean, log_std, self.sample_rng)
        value = float(self.value.forward(image, vector)[0])
        return sample, value, image, vector

    def act_deterministic(self, obs) -> np.ndarray:
        image, vector = self.prepare(obs)
        mean, _ = self.policy.forward(image, vector)
        return np.tanh(mean[0])


def collect_rollouts(env: CoralEnv, learners: list[PPOLearner], horizon: int,
                     seed: int = 0) -> list[RolloutBuffer]:
    """Collect horizon steps per learner from a fresh episode chain.

    Stands alone from the trainers: resets the env with `seed` (episode k
    mid-rollout resets with seed + k), samples actions from each learner's
    policy, and returns the filled (not yet finalized) buffers.
    Deterministic given the learners' rng states and the seed.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    obs = env.reset(seed=seed)
    episode = 0
    for _ in range(horizon):
        actions = []
        cached = []
        for i, learner in enumerate(learners):
            sample, value, image, vector = learner.act(obs[i])
            cached.append((sample, value, image, vector))
            actions.append(ActionCommand.from_array(sample.action[0]))
        next_obs, rewards, done, _ = env.step(actions)
        for i, learner in enumerate(learners):
            sample, value, image, vector = cached[i]
            learner.buffer.add(
                image[0] if image is not None else None, vector[0],
                sample.raw[0], sample.action[0], float(sample.log_probs[0]),
                rewards[i], value, done)
        obs = next_obs
        if done:
            episode += 1
            obs = env.reset(seed=seed + episode)
    return [learner.buffer for learner in learners]


class PPOTrainer:
    """PPO for one agent, independent PPO for several."""

    def __init__(self, env: CoralEnv, config: TrainConfig, net_config: NetworkConfig):
        if config.algorithm not in ("ppo", "ippo"):
            raise ValueError("PPOTrainer handles ppo/ippo configs")
        self.env = env
        self.config = config
        self.net_config = net_config
        self.learners = [PPOLearner(net_config, config, i)
                         for i in range(env.num_agents)]
        self.env_step = 0
        self.episode_counter = 0
        self.updates = 0
        self._obs = None
        self._ep_reward = np.zeros(env.num_agents)
        self._ep_length = 0

    def _reset_env(self):
        obs = self.env.reset(seed=self.config.seed + self.episode_counter)
        self._ep_reward[:] = 0.0
        self._ep_length = 0
        return obs

    def run(self, total_steps: int | None = None, on_episode=None, on_update=None):
        """Train for total_steps env steps (config default), firing callbacks.

        on_episode(record) runs at each episode end; on_update(env_step,
        agent, metrics) after each learner update.
        """
        total = total_steps if total_steps is not None else self.config.total_steps
        if self._obs is None:
            self._obs = self._reset_env()
        while self.env_step < total:
            self._collect(min(self.config.horizon, total - self.env_step), on_episode)
            for i, learner in enumerate(self.learners):
                bootstrap = self._bootstrap_value(learner, self._obs[i])
                learner.buffer.finalize(bootstrap, self.config.gamma,
                                        self.config.gae_lambda)
                metrics = ppo_update(learner.policy, learner.value,
                                     learner.policy_opt, learner.value_opt,
                                     learner.buffer, self.config, learner.update_rng)
                learner.normalizer.update(np.array(learner.raw_vectors))
                learner.raw_vectors.clear()
                learner.buffer.clear()
                learner.last_metrics = metrics
                if on_update is not None:
                    on_update(self.env_step, i, metrics)
            self.updates += 1
        return self.learners

    def _bootstrap_value(self, learner: PPOLearner, obs) -> float:
        image, vector = learner.prepare(obs)
        return float(learner.value.forward(image, vector)[0])

    def _collect(self, horizon: int, on_episode):
        for _ in range(horizon):
            samples = []
            actions = []
            for i, learner in enumerate(self.learners):
                sample, value, image, vector = learner.act(self._obs[i])
                samples.append((sample, value, image, vector))
                actions.append(ActionCommand.from_array(sample.action[0]))
            obs, rewards, done, _ = self.env.step(actions)
            self.env_step += 1
            self._ep_length += 1
            for i, learner in enumerate(self.learners):
                sample, value, image, vector = samples[i]
                learner.raw_vectors.append(self._obs[i].vector.copy())
                learner.buffer.add(
                    image[0] if image is not None else None, vector[0],
                    sample.raw[0], sample.action[0], float(sample.log_probs[0]),
                    rewards[i], value, done)
                self._ep_reward[i] += rewards[i]
            self._obs = obs
            if done:
                self.episode_counter += 1
                if on_episode is not None:
                    for i in range(len(self.learners)):
                        on_episode(EpisodeRecord(i, self.episode_counter,
                                                 self.env_step,
                                                 float(self._ep_reward[i]),
                                                 self._ep_length))
                self._obs = self._reset_env()


class SACTrainer:
    """Single-agent soft actor-critic over the same environment."""

    def __init__(self, env: CoralEnv, config: TrainConfig, net_config: NetworkConfig):
        if config.algorithm != "sac":
            raise ValueError("SACTrainer handles sac configs")
        if env.num_agents != 1:
            raise ValueError("SAC trainer is single-agent")
        self.env = env
        self.config = config
        self.net_config = net_config
        init_rng = _rng(config.seed, 20)
        actor = PolicyNetwork(net_config, ACTION_DIM, init_rng)
        q1 = QNetwork(net_config, ACTION_DIM, init_rng)
        q2 = QNetwork(net_config, ACTION_DIM, init_rng)
        q1_t = QNetwork(net_config, ACTION_DIM, init_rng)
        q2_t = QNetwork(net_config, ACTION_DIM, init_rng)
        copy_params(q1, q1_t)
        copy_params(q2, q2_t)
        self.params = SACParams(actor, q1, q2, q1_t, q2_t, config)
        self.normalizer = RunningMeanStd(VECTOR_DIM)
        self.replay = ReplayBuffer(config.replay_capacity, net_config.image_shape,
                                   VECTOR_DIM, ACTION_DIM)
        self.sample_rng = _rng(config.seed, 21)
        self.update_rng = _rng(config.seed, 22)
        self.env_step = 0
        self.episode_counter = 0
        self.last_metrics: dict = {}
        self._obs = None
        self._ep_reward = 0.0
        self._ep_length = 0

    def _reset_env(self):
        obs = self.env.reset(seed=self.config.seed + self.episode_counter)
        self._ep_reward = 0.0
        self._ep_length = 0
        return obs

    def _prepare(self, obs):
        image = obs.image[None] if self.net_config.image_shape is not None else None
        vector = self.normalizer.normalize(obs.vector)[None]
        return image, vector

    def act_deterministic(self, obs) -> np.ndarray:
        image, vector = self._prepare(obs)
        mean, _ = self.params.actor.forward(image, vector)
        return np.tanh(mean[0])

    def run(self, total_steps: int | None = None, on_episode=None, on_update=None):
        total = total_steps if total_steps is not None else self.config.total_steps
        cfg = self.config
        if self._obs is None:
            self._obs = self._reset_env()
        while self.env_step < total:
            obs = self._obs[0]
            self.normalizer.update(obs.vector[None])
            image, vector = self._prepare(obs)
            if self.env_step < cfg.warmup_steps:
                action = self.sample_rng.uniform(-1.0, 1.0, ACTION_DIM)
            else:
                mean, log_std = self.params.actor.forward(image, vector)
                action = sample_policy(mean, log_std, self.sample_rng).action[0]
            next_obs_list, rewards, done, _ = self.env.step(
                [ActionCommand.from_array(action)])
            self.env_step += 1
            self._ep_reward += rewards[0]
            self._ep_length += 1
            next_obs = next_obs_list[0]
            next_image, next_vector = self._prepare(next_obs)
            self.replay.add(
                image[0] if image is not None else 0.0, vector[0], action,
                rewards[0],
                next_image[0] if next_image is not None else 0.0, next_vector[0],
                done)
            self._obs = next_obs_list
            if done:
                self.episode_counter += 1
                if on_episode is not None:
                    on_episode(EpisodeRecord(0, self.episode_counter, self.env_step,
                                             float(self._ep_reward), self._ep_length))
                self._obs = self._reset_env()
            ready = (self.env_step >= cfg.warmup_steps
                     and self.replay.size >= cfg.batch_size
                     and self.env_step % cfg.update_every == 0)
            if ready:
                batch = self.replay.sample(cfg.batch_size, self.update_rng)
                if self.net_config.image_shape is None:
                    batch["images"] = None
                    batch["next_images"] = None
                self.last_metrics = sac_update(self.params, batch, cfg,
                                               self.update_rng)
                if on_update is not None:
                    on_update(self.env_step, 0, self.last_metrics)
        return self.params


def ippo_train(env: CoralEnv, config: TrainConfig, net_config: NetworkConfig,
               on_episode=None, on_update=None) -> list[PPOLearner]:
    """Independent PPO: one learner per agent, no parameter sharing.

    With a single agent this is exactly the PPO path (same trainer, same
    rng streams), so N = 1 reproduces single-agent PPO bit for bit.
    """
    trainer = PPOTrainer(env, config, net_config)
    return trainer.run(on_episode=on_episode, on_update=on_update)
