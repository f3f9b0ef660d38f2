"""Clipped-surrogate policy optimization update.

The loss per minibatch is

    L = -E[min(rho * A, clip(rho, 1-eps, 1+eps) * A)]
        + c_v * E[(V - R)^2] - c_e * H(pi)

with rho the likelihood ratio against the stored log-probs, advantages
normalized per update batch, and H the pre-squash Gaussian entropy.
Gradients are pushed through the networks analytically (see nn); both
networks get global gradient-norm clipping before their Adam step.
"""

from __future__ import annotations

import numpy as np

from .. import nn
from .buffers import RolloutBuffer
from .distributions import gaussian_entropy, log_prob, log_prob_grads
from .train_config import TrainConfig


class NonFiniteLossError(ArithmeticError):
    """Update aborted: a loss term went NaN/Inf."""


def ppo_loss_terms(policy, value_net, images, vectors, raw_actions, old_log_probs,
                   advantages, returns, config: TrainConfig):
    """Forward pass plus per-sample gradient seeds for the PPO loss.

    Returns (metrics, d_mean, d_log_std, d_value) where the d_* arrays are
    the loss gradients at the network outputs, ready for backward().
    """
    b = len(raw_actions)
    mean, log_std = policy.forward(images, vectors)
    values = value_net.forward(images, vectors)

    logp = log_prob(mean, log_std, raw_actions)
    ratio = np.exp(logp - old_log_probs)
    unclipped = ratio * advantages
    clipped_ratio = np.clip(ratio, 1 - config.clip_epsilon, 1 + config.clip_epsilon)
    clipped = clipped_ratio * advantages
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = -float(np.mean(surrogate))

    value_err = values - returns
    value_loss = float(np.mean(value_err * value_err))
    entropy = gaussian_entropy(log_std)
    total = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy
    if not np.isfinite(total):
        raise NonFiniteLossError(f"loss = {total}")

    # d total / d logp: the active min branch, zero where the clip pins it.
    use_unclipped = unclipped <= clipped
    in_clip_band = np.abs(ratio - 1.0) < config.clip_epsilon
    branch_grad = np.where(use_unclipped | in_clip_band, ratio * advantages, 0.0)
    d_logp = -branch_grad / b

    dlp_dmean, dlp_dlogstd = log_prob_grads(mean, log_std, raw_actions)
    d_mean = d_logp[:, None] * dlp_dmean
    d_log_std = np.sum(d_logp[:, None] * dlp_dlogstd, axis=0) - config.entropy_coef
    d_value = 2.0 * config.value_coef * value_err / b

    metrics = {
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > config.clip_epsilon)),
        "ratio_mean": float(np.mean(ratio)),
        "ratio_max_abs_dev": float(np.max(np.abs(ratio - 1.0))),
        "total_loss": total,
    }
    return metrics, d_mean, d_log_std, d_value


def ppo_update(policy, value_net, policy_opt: nn.Adam, value_opt: nn.Adam,
               buffer: RolloutBuffer, config: TrainConfig,
               rng: np.random.Generator) -> dict:
    """Run epochs x minibatches of clipped-surrogate updates on one buffer.

    Advantages are normalized to zero mean and unit std over the whole
    batch before the first epoch. Returns averaged metrics, including the
    clip fraction and ratio statistics of the first minibatch of the first
    epoch (the on-policy sanity numbers).
    """
    if not buffer.finalized:
        raise RuntimeError("finalize() the buffer before updating")
    n = buffer.size
    adv = buffer.advantages[:n]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    # On-policy sanity over the whole batch before any parameter change:
    # every ratio must be 1 and nothing may sit outside the clip band.
    all_images = buffer.images[:n] if buffer.images is not None else None
    mean0, log_std0 = policy.forward(all_images, buffer.vectors[:n])
    ratio0 = np.exp(log_prob(mean0, log_std0, buffer.raw_actions[:n])
                    - buffer.log_probs[:n])
    first = {
        "epoch0_ratio_max_abs_dev": float(np.max(np.abs(ratio0 - 1.0))),
        "epoch0_clip_fraction": float(np.mean(np.abs(ratio0 - 1.0) > config.clip_epsilon)),
    }

    policy_params = policy.params()
    value_params = value_net.params()
    agg: dict[str, float] = {}
    passes = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            idx = order[start:start + config.minibatch_size]
            images = buffer.images[idx] if buffer.images is not None else None
            metrics, d_mean, d_log_std, d_value = ppo_loss_terms(
                policy, value_net, images, buffer.vectors[idx],
                buffer.raw_actions[idx], buffer.log_probs[idx],
                adv[idx], buffer.returns[idx], config)

            nn.zero_grads(policy_params)
            nn.zero_grads(value_params)
            policy.backward(d_mean, d_log_std)
            value_net.backward(d_value)
            nn.clip_grad_norm(policy_params, config.grad_clip)
            nn.clip_grad_norm(value_params, config.grad_clip)
            policy_opt.step()
            value_opt.step()
            policy.clamp_log_std()

            for k, v in metrics.items():
                agg[k] = agg.get(k, 0.0) + v
            passes += 1

    out = {k: v / passes for k, v in agg.items()}
    out.update(first)
    return out
