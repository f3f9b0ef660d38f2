"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, dones, gamma: float, lam: float,
                bootstrap_value: float = 0.0):
    """Advantage recursion over one trajectory slice.

    A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    delta_t = r_t + gamma * (1 - done_t) * V_{t+1} - V_t

    values has the same length as rewards; V_{T} is bootstrap_value.
    done_t marks that the episode ended at step t, cutting the recursion.
    Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError("rewards, values and dones must be the same length")

    n = len(rewards)
    advantages = np.zeros(n)
    next_value = bootstrap_value
    next_advantage = 0.0
    for t in range(n - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * live * next_value - values[t]
        next_advantage = delta + gamma * lam * live * next_advantage
        advantages[t] = next_advantage
        next_value = values[t]
    return advantages, advantages + values
