"""Tanh-squashed diagonal Gaussian: sampling, densities, entropy.

Actions live in [-1, 1]^A: a raw Gaussian sample is squashed through tanh
and the log-density carries the change-of-variables correction
log(1 - tanh(x)^2), evaluated in the numerically stable form
2 * (log 2 - x - softplus(-2x)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)
HALF_LOG_2PI_E = 0.5 * (LOG_2PI + 1.0)


def softplus(x):
    return np.logaddexp(0.0, x)


def tanh_correction(raw):
    """log(1 - tanh(raw)^2), elementwise, stable for large |raw|."""
    return 2.0 * (np.log(2.0) - raw - softplus(-2.0 * raw))


def log_prob(mean, log_std, raw):
    """Log-density of squashed actions tanh(raw); shapes (B, A) -> (B,)."""
    std = np.exp(log_std)
    z = (raw - mean) / std
    gauss = -0.5 * z * z - log_std - 0.5 * LOG_2PI
    return np.sum(gauss - tanh_correction(raw), axis=-1)


def log_prob_grads(mean, log_std, raw):
    """d log_prob / d mean (B, A) and / d log_std (B, A)."""
    std = np.exp(log_std)
    z = (raw - mean) / std
    return z / std, z * z - 1.0


def gaussian_entropy(log_std) -> float:
    """Entropy of the pre-squash Gaussian (the usual PPO bonus)."""
    return float(np.sum(log_std + HALF_LOG_2PI_E))


@dataclass(frozen=True)
class PolicySample:
    mean: np.ndarray       # (B, A)
    log_std: np.ndarray    # (A,)
    raw: np.ndarray        # pre-squash sample (B, A)
    action: np.ndarray     # tanh(raw), in [-1, 1]
    log_probs: np.ndarray  # (B,), with squash correction


def sample_policy(mean, log_std, rng: np.random.Generator) -> PolicySample:
    noise = rng.standard_normal(mean.shape)
    raw = mean + np.exp(log_std) * noise
    action = np.tanh(raw)
    return PolicySample(mean=mean, log_std=np.array(log_std), raw=raw,
                        action=action, log_probs=log_prob(mean, log_std, raw))


def deterministic_action(mean) -> np.ndarray:
    return np.tanh(mean)
