"""Soft actor-critic update: twin Q, squashed actor, tuned temperature.

Critic targets bootstrap through the minimum of the two target Q networks
minus the entropy term; the actor maximizes min-Q minus alpha * log-pi via
the reparameterization trick; alpha is adapted toward a target entropy of
-dim(A); targets track the online critics by Polyak averaging.
"""

from __future__ import annotations

import numpy as np

from .. import nn
from .distributions import log_prob, sample_policy, tanh_correction
from .networks import polyak_update
from .train_config import TrainConfig


class NonFiniteLossError(ArithmeticError):
    """Update aborted: a loss term went NaN/Inf."""


class SACParams:
    """All networks and optimizers of one SAC learner."""

    def __init__(self, actor, q1, q2, q1_target, q2_target, config: TrainConfig):
        self.actor = actor
        self.q1 = q1
        self.q2 = q2
        self.q1_target = q1_target
        self.q2_target = q2_target
        self.log_alpha = nn.Param(np.array([np.log(config.initial_temperature)]))
        self.target_entropy = -float(actor.action_dim)
        lr = config.learning_rate
        self.actor_opt = nn.Adam(actor.params(), lr)
        self.q1_opt = nn.Adam(q1.params(), lr)
        self.q2_opt = nn.Adam(q2.params(), lr)
        self.alpha_opt = nn.Adam([self.log_alpha], lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.value[0]))


def critic_loss_terms(params: SACParams, batch, config: TrainConfig,
                      rng: np.random.Generator):
    """Twin-Q regression toward the entropy-regularized bootstrap target."""
    b = len(batch["rewards"])
    next_mean, next_log_std = params.actor.forward(batch["next_images"],
                                                   batch["next_vectors"])
    next_sample = sample_policy(next_mean, next_log_std, rng)
    q1_next = params.q1_target.forward(batch["next_images"], batch["next_vectors"],
                                       next_sample.action)
    q2_next = params.q2_target.forward(batch["next_images"], batch["next_vectors"],
                                       next_sample.action)
    soft_next = np.minimum(q1_next, q2_next) - params.alpha * next_sample.log_probs
    live = 1.0 - batch["dones"].astype(float)
    y = batch["rewards"] + config.gamma * live * soft_next

    q1 = params.q1.forward(batch["images"], batch["vectors"], batch["actions"])
    q2 = params.q2.forward(batch["images"], batch["vectors"], batch["actions"])
    loss = float(np.mean((q1 - y) ** 2) + np.mean((q2 - y) ** 2))
    d_q1 = 2.0 * (q1 - y) / b
    d_q2 = 2.0 * (q2 - y) / b
    return loss, d_q1, d_q2, y


def actor_loss_terms(params: SACParams, batch, noise: np.ndarray):
    """Reparameterized actor loss: E[alpha * log_pi - min Q].

    noise is the fixed standard-normal draw; gradients at the actor outputs
    (d_mean, d_log_std) chain through both the entropy term and the Q
    networks' action input. Q parameter gradients accumulated here are a
    side effect the caller must discard.
    """
    b = len(batch["rewards"])
    mean, log_std = params.actor.forward(batch["images"], batch["vectors"])
    std = np.exp(log_std)
    raw = mean + std * noise
    action = np.tanh(raw)
    logp = np.sum(-0.5 * noise * noise - log_std - 0.5 * np.log(2 * np.pi)
                  - tanh_correction(raw), axis=1)

    q1 = params.q1.forward(batch["images"], batch["vectors"], action)
    q2 = params.q2.forward(batch["images"], batch["vectors"], action)
    q_min = np.minimum(q1, q2)
    alpha = params.alpha
    loss = float(np.mean(alpha * logp - q_min))

    # d loss / d action through whichever Q attains the min.
    take1 = q1 <= q2
    g_action = np.zeros_like(action)
    d_q1 = np.where(take1, -1.0 / b, 0.0)
    d_q2 = np.where(take1, 0.0, -1.0 / b)
    g_action += params.q1.backward(d_q1)
    g_action += params.q2.backward(d_q2)

    # d logp / d raw = 2 * tanh(raw) (the squash correction); the Gaussian
    # term is constant in raw once the noise is fixed.
    d_raw = g_action * (1.0 - action * action) + (alpha / b) * 2.0 * action
    d_mean = d_raw
    d_log_std = np.sum(d_raw * std * noise - alpha / b, axis=0)
    return loss, d_mean, d_log_std, logp


def sac_update(params: SACParams, batch, config: TrainConfig,
               rng: np.random.Generator) -> dict:
    """One gradient step on critics, actor and temperature from one batch."""
    critic_loss, d_q1, d_q2, _ = critic_loss_terms(params, batch, config, rng)
    if not np.isfinite(critic_loss):
        raise NonFiniteLossError(f"critic loss = {critic_loss}")
    q1_params = params.q1.params()
    q2_params = params.q2.params()
    nn.zero_grads(q1_params)
    nn.zero_grads(q2_params)
    params.q1.backward(d_q1)
    params.q2.backward(d_q2)
    nn.clip_grad_norm(q1_params, config.grad_clip)
    nn.clip_grad_norm(q2_params, config.grad_clip)
    params.q1_opt.step()
    params.q2_opt.step()

    noise = rng.standard_normal((len(batch["rewards"]), params.actor.action_dim))
    actor_params = params.actor.params()
    nn.zero_grads(actor_params)
    nn.zero_grads(q1_params)  # scratch space for action gradients
    nn.zero_grads(q2_params)
    actor_loss, d_mean, d_log_std, logp = actor_loss_terms(params, batch, noise)
    if not np.isfinite(actor_loss):
        raise NonFiniteLossError(f"actor loss = {actor_loss}")
    params.actor.backward(d_mean, d_log_std)
    nn.clip_grad_norm(actor_params, config.grad_clip)
    params.actor_opt.step()
    params.actor.clamp_log_std()
    nn.zero_grads(q1_params)  # discard critic grads accumulated by the actor pass
    nn.zero_grads(q2_params)

    # Temperature: relax alpha toward the target entropy.
    alpha = params.alpha
    alpha_err = float(np.mean(logp + params.target_entropy))
    params.log_alpha.grad[...] = -alpha * alpha_err
    params.alpha_opt.step()

    polyak_update(params.q1, params.q1_target, config.tau)
    polyak_update(params.q2, params.q2_target, config.tau)

    return {
        "critic_loss": critic_loss,
        "actor_loss": actor_loss,
        "alpha": params.alpha,
        "entropy_estimate": float(-np.mean(logp)),
    }
