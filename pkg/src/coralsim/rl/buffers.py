"""Trajectory storage: on-policy rollout buffer and SAC replay ring."""

from __future__ import annotations

import numpy as np

from .gae import compute_gae


class RolloutBuffer:
    """Fixed-horizon on-policy storage for one agent.

    Stores observations (already normalized), pre- and post-squash actions,
    log-probs, rewards, value estimates and done flags; finalize() fills
    the advantage and return columns and must run before any update reads
    the buffer. Cleared after each policy update.
    """

    def __init__(self, horizon: int, image_shape, vector_dim: int, action_dim: int):
        self.horizon = horizon
        self.images = (np.zeros((horizon,) + tuple(image_shape))
                       if image_shape is not None else None)
        self.vectors = np.zeros((horizon, vector_dim))
        self.raw_actions = np.zeros((horizon, action_dim))
        self.actions = np.zeros((horizon, action_dim))
        self.log_probs = np.zeros(horizon)
        self.rewards = np.zeros(horizon)
        self.values = np.zeros(horizon)
        self.dones = np.zeros(horizon, dtype=bool)
        self.advantages = np.zeros(horizon)
        self.returns = np.zeros(horizon)
        self.size = 0
        self.finalized = False

    @property
    def full(self) -> bool:
        return self.size >= self.horizon

    def add(self, image, vector, raw_action, action, log_prob, reward, value, done):
        if self.full:
            raise RuntimeError("rollout buffer is full")
        i = self.size
        if self.images is not None:
            self.images[i] = image
        self.vectors[i] = vector
        self.raw_actions[i] = raw_action
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = done
        self.size += 1

    def finalize(self, bootstrap_value: float, gamma: float, lam: float) -> None:
        n = self.size
        adv, ret = compute_gae(self.rewards[:n], self.values[:n], self.dones[:n],
                               gamma, lam, bootstrap_value)
        self.advantages[:n] = adv
        self.returns[:n] = ret
        self.finalized = True

    def clear(self) -> None:
        self.size = 0
        self.finalized = False


class ReplayBuffer:
    """Uniform-sampling ring buffer of transitions for off-policy updates."""

    def __init__(self, capacity: int, image_shape, vector_dim: int, action_dim: int):
        self.capacity = capacity
        img = (capacity,) + tuple(image_shape) if image_shape is not None else None
        self.images = np.zeros(img, dtype=np.float32) if img else None
        self.next_images = np.zeros(img, dtype=np.float32) if img else None
        self.vectors = np.zeros((capacity, vector_dim))
        self.next_vectors = np.zeros((capacity, vector_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def add(self, image, vector, action, reward, next_image, next_vector, done):
        i = self._next
        if self.images is not None:
            self.images[i] = image
            self.next_images[i] = next_image
        self.vectors[i] = vector
        self.next_vectors[i] = next_vector
        self.actions[i] = action
        self.rewards[i] = reward
        self.dones[i] = done
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "images": self.images[idx].astype(float) if self.images is not None else None,
            "next_images": (self.next_images[idx].astype(float)
                            if self.next_images is not None else None),
            "vectors": self.vectors[idx],
            "next_vectors": self.next_vectors[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "dones": self.dones[idx],
        }


class RunningMeanStd:
    """Streaming mean/variance for observation-vector standardization.

    Updated between rollouts during training and frozen at evaluation;
    normalized values are clipped to +/- clip.
    """

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = eps
        self.clip = clip
        self.eps = eps

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        b_count = batch.shape[0]
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * b_count / total
        m_a = self.var * self.count
        m_b = b_var * b_count
        m2 = m_a + m_b + delta * delta * self.count * b_count / total
        self.var = m2 / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / np.sqrt(self.var + self.eps)
        return np.clip(z, -self.clip, self.clip)

    def state(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(),
                "count": float(self.count)}

    def load_state(self, state: dict) -> None:
        self.mean[...] = state["mean"]
        self.var[...] = state["var"]
        self.count = float(state["count"])
