import dataclasses

import numpy as np
import pytest

import coralsim as cs
from coralsim import nn
from coralsim.env import CoralEnv
from coralsim.rl import (NetworkConfig, PPOLearner, PPOTrainer, PolicyNetwork,
                         QNetwork, SACTrainer, TrainConfig, ValueNetwork,
                         collect_rollouts, compute_gae, copy_params,
                         gaussian_entropy, log_prob, sample_policy)
from coralsim.rl.buffers import RolloutBuffer, RunningMeanStd
from coralsim.rl.distributions import log_prob_grads, tanh_correction
from coralsim.rl.ppo import ppo_loss_terms, ppo_update
from coralsim.rl.sac import SACParams, actor_loss_terms, critic_loss_terms, sac_update


def brute_force_gae(rewards, values, dones, gamma, lam, bootstrap):
    """Double-loop advantage sum: A_t = sum_k (gamma*lam)^k delta_{t+k}."""
    n = len(rewards)
    v_next = list(values[1:]) + [bootstrap]
    deltas = [rewards[t] + gamma * (0 if dones[t] else 1) * v_next[t] - values[t]
              for t in range(n)]
    adv = np.zeros(n)
    for t in range(n):
        factor = 1.0
        for k in range(t, n):
            adv[t] += factor * deltas[k]
            if dones[k]:
                break
            factor *= gamma * lam
    return adv


class TestGAE:
    def test_lambda_zero_is_td_error(self):
        rng = np.random.default_rng(0)
        r, v = rng.standard_normal(8), rng.standard_normal(8)
        dones = np.zeros(8, dtype=bool)
        adv, ret = compute_gae(r, v, dones, 0.9, 0.0, bootstrap_value=0.3)
        v_next = np.append(v[1:], 0.3)
        assert np.allclose(adv, r + 0.9 * v_next - v, atol=1e-12)
        assert np.allclose(ret, adv + v, atol=1e-12)

    def test_gamma_lambda_one_zero_values_sums_rewards(self):
        r = np.array([1.0, 2.0, 3.0, 4.0])
        adv, _ = compute_gae(r, np.zeros(4), np.zeros(4, dtype=bool), 1.0, 1.0, 0.0)
        assert np.allclose(adv, [10.0, 9.0, 7.0, 4.0], atol=1e-12)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = rng.integers(2, 11)
            r = rng.standard_normal(n)
            v = rng.standard_normal(n)
            dones = rng.uniform(size=n) < 0.25
            gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
            boot = rng.standard_normal()
            adv, _ = compute_gae(r, v, dones, gamma, lam, boot)
            assert np.allclose(adv, brute_force_gae(r, v, dones, gamma, lam, boot),
                               atol=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_gae([1.0], [1.0, 2.0], [False], 0.9, 0.9)


class TestSquashedGaussian:
    def test_log_prob_matches_naive_density(self):
        rng = np.random.default_rng(2)
        mean = rng.standard_normal((10, 3))
        log_std = rng.uniform(-1.5, 0.2, 3)
        raw = mean + np.exp(log_std) * rng.standard_normal((10, 3))
        # Naive change of variables: p_a(a) = N(raw; mean, std) / |da/draw|
        std = np.exp(log_std)
        gauss = (np.exp(-0.5 * ((raw - mean) / std) ** 2)
                 / (std * np.sqrt(2 * np.pi)))
        jac = 1.0 - np.tanh(raw) ** 2
        expected = np.sum(np.log(gauss / jac), axis=1)
        assert np.allclose(log_prob(mean, log_std, raw), expected, atol=1e-8)

    def test_density_integrates_to_one_1d(self):
        for mean, log_std in ((0.0, -0.5), (0.4, -1.0), (-0.8, 0.0)):
            a = np.linspace(-1 + 1e-9, 1 - 1e-9, 200_001)
            raw = np.arctanh(a)
            logp = log_prob(np.full((a.size, 1), mean),
                            np.array([log_std]), raw[:, None])
            total = np.trapezoid(np.exp(logp), a)
            assert total == pytest.approx(1.0, abs=1e-3)

    def test_grads_match_finite_differences(self):
        rng = np.random.default_rng(3)
        mean = rng.standard_normal((4, 3))
        log_std = rng.uniform(-1, 0, 3)
        raw = rng.standard_normal((4, 3))
        d_mean, d_log_std = log_prob_grads(mean, log_std, raw)
        h = 1e-6
        for i in range(4):
            for j in range(3):
                mp, mm = mean.copy(), mean.copy()
                mp[i, j] += h
                mm[i, j] -= h
                fd = (log_prob(mp, log_std, raw)[i] - log_prob(mm, log_std, raw)[i]) / (2 * h)
                assert d_mean[i, j] == pytest.approx(fd, abs=1e-5)
        for j in range(3):
            lp, lm = log_std.copy(), log_std.copy()
            lp[j] += h
            lm[j] -= h
            fd = (log_prob(mean, lp, raw) - log_prob(mean, lm, raw)) / (2 * h)
            assert np.allclose(d_log_std[:, j], fd, atol=1e-5)

    def test_sample_reproducible_and_bounded(self):
        mean = np.zeros((5, 3))
        log_std = np.full(3, -0.5)
        a = sample_policy(mean, log_std, np.random.default_rng(9))
        b = sample_policy(mean, log_std, np.random.default_rng(9))
        assert np.all(a.action == b.action)
        assert np.all(np.abs(a.action) < 1.0)
        assert np.allclose(a.action, np.tanh(a.raw))


class TestNetworks:
    def test_zero_weights_zero_mean(self, tiny_net_config):
        policy = PolicyNetwork(tiny_net_config, 3, np.random.default_rng(0))
        nn.set_flat(policy.params(),
                    np.zeros(nn.get_flat(policy.params()).size))
        rng = np.random.default_rng(1)
        mean, log_std = policy.forward(rng.uniform(0, 1, (4, 8, 8, 3)),
                                       rng.standard_normal((4, 4)))
        assert np.all(mean == 0.0)
        assert np.all(log_std == 0.0)  # the log_std vector was zeroed too

    def test_identical_inputs_identical_outputs(self, tiny_net_config):
        policy = PolicyNetwork(tiny_net_config, 3, np.random.default_rng(2))
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 1, (2, 8, 8, 3))
        vec = rng.standard_normal((2, 4))
        m1, _ = policy.forward(img, vec)
        m2, _ = policy.forward(img.copy(), vec.copy())
        assert np.all(m1 == m2)

    def test_value_finite_over_random_inputs(self, tiny_net_config):
        value = ValueNetwork(tiny_net_config, np.random.default_rng(4))
        rng = np.random.default_rng(5)
        for _ in range(20):
            v = value.forward(rng.uniform(0, 1, (50, 8, 8, 3)),
                              rng.standard_normal((50, 4)))
            assert np.all(np.isfinite(v))

    def test_shape_mismatch_raises(self, tiny_net_config):
        policy = PolicyNetwork(tiny_net_config, 3, np.random.default_rng(6))
        with pytest.raises(nn.ShapeMismatchError):
            policy.forward(np.zeros((2, 9, 9, 3)), np.zeros((2, 4)))
        with pytest.raises(nn.ShapeMismatchError):
            policy.forward(None, np.zeros((2, 4)))

    def test_vector_only_network(self, vec_net_config):
        policy = PolicyNetwork(vec_net_config, 3, np.random.default_rng(7))
        mean, _ = policy.forward(None, np.random.default_rng(8).standard_normal((3, 4)))
        assert mean.shape == (3, 3)


def ppo_fixture(net_config, batch=6, seed=0):
    rng = np.random.default_rng(seed)
    policy = PolicyNetwork(net_config, 3, rng)
    value = ValueNetwork(net_config, rng)
    images = (rng.uniform(0, 1, (batch,) + net_config.image_shape)
              if net_config.image_shape else None)
    vectors = rng.standard_normal((batch, net_config.vector_dim))
    raw = 0.5 * rng.standard_normal((batch, 3))
    mean, log_std = policy.forward(images, vectors)
    old_logp = log_prob(mean, log_std, raw) + 0.05 * rng.standard_normal(batch)
    adv = rng.standard_normal(batch)
    ret = rng.standard_normal(batch)
    return policy, value, images, vectors, raw, old_logp, adv, ret


class TestPPOLoss:
    def test_hand_evaluated_clip_rule(self, vec_net_config):
        """Single sample with ratio 1.5, A=+1, eps=0.2: the clipped branch
        is active, the objective uses 1.2*A, and the policy gradient
        through the ratio is exactly zero."""
        policy, value, _, vectors, raw, old_logp, _, ret = ppo_fixture(
            vec_net_config, batch=1, seed=3)
        mean, log_std = policy.forward(None, vectors)
        logp = log_prob(mean, log_std, raw)
        old = logp - np.log(1.5)  # forces ratio = 1.5
        cfg = TrainConfig(entropy_coef=0.0, value_coef=0.5, clip_epsilon=0.2)
        metrics, d_mean, d_log_std, _ = ppo_loss_terms(
            policy, value, None, vectors, raw, old, np.array([1.0]),
            ret, cfg)
        assert metrics["policy_loss"] == pytest.approx(-1.2)
        assert np.allclose(d_mean, 0.0, atol=1e-15)
        assert np.allclose(d_log_std, 0.0, atol=1e-15)
        assert metrics["clip_fraction"] == 1.0

    def test_ratio_one_equals_vanilla_policy_gradient(self, vec_net_config):
        policy, value, _, vectors, raw, _, adv, ret = ppo_fixture(
            vec_net_config, batch=5, seed=4)
        mean, log_std = policy.forward(None, vectors)
        exact_old = log_prob(mean, log_std, raw)  # ratio exactly 1
        cfg = TrainConfig(entropy_coef=0.0)
        _, d_mean, d_log_std, _ = ppo_loss_terms(
            policy, value, None, vectors, raw, exact_old, adv, ret, cfg)
        # Vanilla PG: d(-mean(logp * A))/d mean
        dlp_dmean, dlp_dlogstd = log_prob_grads(mean, log_std, raw)
        expected_dmean = -(adv[:, None] * dlp_dmean) / 5
        assert np.allclose(d_mean, expected_dmean, atol=1e-12)

    @pytest.mark.parametrize("which", ["policy", "value"])
    def test_gradients_match_finite_differences(self, tiny_net_config, which):
        policy, value, images, vectors, raw, old_logp, adv, ret = ppo_fixture(
            tiny_net_config, batch=5, seed=5)
        cfg = TrainConfig()
        net = policy if which == "policy" else value
        params = net.params()

        def loss():
            m, _, _, _ = ppo_loss_terms(policy, value, images, vectors, raw,
                                        old_logp, adv, ret, cfg)
            return m["total_loss"]

        metrics, d_mean, d_log_std, d_value = ppo_loss_terms(
            policy, value, images, vectors, raw, old_logp, adv, ret, cfg)
        nn.zero_grads(policy.params())
        nn.zero_grads(value.params())
        policy.backward(d_mean, d_log_std)
        value.backward(d_value)
        analytic = nn.get_flat_grad(params)

        flat = nn.get_flat(params)
        rng = np.random.default_rng(6)
        idx = rng.choice(flat.size, size=min(80, flat.size), replace=False)
        h = 1e-5
        for i in idx:
            fp = flat.copy(); fp[i] += h
            nn.set_flat(params, fp)
            lp = loss()
            fp[i] -= 2 * h
            nn.set_flat(params, fp)
            lm = loss()
            nn.set_flat(params, flat)
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(analytic[i]), 1e-8)
            assert abs(fd - analytic[i]) / denom <= 1e-4, f"param {i}"


class TestSACLosses:
    def make(self, net_config, seed=0):
        rng = np.random.default_rng(seed)
        actor = PolicyNetwork(net_config, 3, rng)
        q1, q2 = QNetwork(net_config, 3, rng), QNetwork(net_config, 3, rng)
        q1t, q2t = QNetwork(net_config, 3, rng), QNetwork(net_config, 3, rng)
        copy_params(q1, q1t)
        copy_params(q2, q2t)
        cfg = TrainConfig(algorithm="sac")
        params = SACParams(actor, q1, q2, q1t, q2t, cfg)
        b = 6
        img = (rng.uniform(0, 1, (b,) + net_config.image_shape)
               if net_config.image_shape else None)
        nimg = (rng.uniform(0, 1, (b,) + net_config.image_shape)
                if net_config.image_shape else None)
        batch = {"images": img, "next_images": nimg,
                 "vectors": rng.standard_normal((b, 4)),
                 "next_vectors": rng.standard_normal((b, 4)),
                 "actions": np.tanh(rng.standard_normal((b, 3))),
                 "rewards": rng.standard_normal(b),
                 "dones": rng.uniform(size=b) < 0.3}
        return params, batch, cfg

    def test_gamma_zero_target_is_reward(self, vec_net_config):
        params, batch, cfg = self.make(vec_net_config, seed=1)
        cfg0 = dataclasses.replace(cfg, gamma=0.0)
        _, _, _, y = critic_loss_terms(params, batch, cfg0, np.random.default_rng(0))
        assert np.allclose(y, batch["rewards"], atol=1e-12)

    def test_identical_twins_min_is_either(self, vec_net_config):
        params, batch, cfg = self.make(vec_net_config, seed=2)
        copy_params(params.q1, params.q2)
        copy_params(params.q1_target, params.q2_target)
        q1 = params.q1.forward(batch["images"], batch["vectors"], batch["actions"])
        q2 = params.q2.forward(batch["images"], batch["vectors"], batch["actions"])
        assert np.allclose(q1, q2, atol=1e-12)

    def test_critic_gradcheck(self, tiny_net_config):
        params, batch, cfg = self.make(tiny_net_config, seed=3)
        frozen_rng_state = np.random.default_rng(11).bit_generator.state

        def loss():
            rng = np.random.default_rng(11)
            l, *_ = critic_loss_terms(params, batch, cfg, rng)
            return l

        l, d_q1, d_q2, _ = critic_loss_terms(params, batch, cfg,
                                             np.random.default_rng(11))
        for net, dq in ((params.q1, d_q1), (params.q2, d_q2)):
            ps = net.params()
            nn.zero_grads(ps)
            net.forward(batch["images"], batch["vectors"], batch["actions"])
            net.backward(dq)
            analytic = nn.get_flat_grad(ps)
            flat = nn.get_flat(ps)
            rng = np.random.default_rng(12)
            for i in rng.choice(flat.size, size=min(50, flat.size), replace=False):
                fp = flat.copy(); fp[i] += 1e-5
                nn.set_flat(ps, fp)
                lp = loss()
                fp[i] -= 2e-5
                nn.set_flat(ps, fp)
                lm = loss()
                nn.set_flat(ps, flat)
                fd = (lp - lm) / 2e-5
                denom = max(abs(fd), abs(analytic[i]), 1e-8)
                assert abs(fd - analytic[i]) / denom <= 1e-4

    def test_actor_gradcheck(self, tiny_net_config):
        params, batch, cfg = self.make(tiny_net_config, seed=4)
        noise = np.random.default_rng(13).standard_normal((len(batch["rewards"]), 3))
        aps = params.actor.params()

        def loss():
            l, *_ = actor_loss_terms(params, batch, noise)
            nn.zero_grads(params.q1.params())
            nn.zero_grads(params.q2.params())
            return l

        nn.zero_grads(aps)
        nn.zero_grads(params.q1.params())
        nn.zero_grads(params.q2.params())
        l, d_mean, d_log_std, _ = actor_loss_terms(params, batch, noise)
        params.actor.backward(d_mean, d_log_std)
        analytic = nn.get_flat_grad(aps)
        flat = nn.get_flat(aps)
        rng = np.random.default_rng(14)
        for i in rng.choice(flat.size, size=min(80, flat.size), replace=False):
            fp = flat.copy(); fp[i] += 1e-5
            nn.set_flat(aps, fp)
            lp = loss()
            fp[i] -= 2e-5
            nn.set_flat(aps, fp)
            lm = loss()
            nn.set_flat(aps, flat)
            fd = (lp - lm) / 2e-5
            denom = max(abs(fd), abs(analytic[i]), 1e-8)
            assert abs(fd - analytic[i]) / denom <= 1e-4


@pytest.fixture()
def small_env(vehicle, quiet_sensors):
    wc = cs.WorldConfig(seed=2, max_episode_steps=50)
    sensors = dataclasses.replace(quiet_sensors, camera=cs.CameraConfig(8, 8))
    return CoralEnv(wc, vehicle, sensors)


class TestRollouts:
    def test_horizon_one(self, small_env, tiny_net_config):
        cfg = TrainConfig(horizon=1, total_steps=1)
        learner = PPOLearner(tiny_net_config, cfg, 0)
        buffers = collect_rollouts(small_env, [learner], horizon=1, seed=5)
        assert buffers[0].size == 1

    def test_deterministic_buffers(self, small_env, tiny_net_config):
        def run():
            cfg = TrainConfig(horizon=30, seed=4)
            learner = PPOLearner(tiny_net_config, cfg, 0)
            buf = collect_rollouts(small_env, [learner], horizon=30, seed=5)[0]
            return buf.vectors.copy(), buf.actions.copy(), buf.rewards.copy()

        a, b = run(), run()
        for x, y in zip(a, b):
            assert np.all(x == y)

    def test_stored_log_probs_recomputable(self, small_env, tiny_net_config):
        cfg = TrainConfig(horizon=25, seed=6)
        learner = PPOLearner(tiny_net_config, cfg, 0)
        buf = collect_rollouts(small_env, [learner], horizon=25, seed=7)[0]
        mean, log_std = learner.policy.forward(buf.images[:25], buf.vectors[:25])
        recomputed = log_prob(mean, log_std, buf.raw_actions[:25])
        assert np.allclose(recomputed, buf.log_probs[:25], atol=1e-9)

    def test_bad_horizon(self, small_env, tiny_net_config):
        learner = PPOLearner(tiny_net_config, TrainConfig(), 0)
        with pytest.raises(ValueError):
            collect_rollouts(small_env, [learner], horizon=0)


class TestPPOUpdate:
    def test_epoch0_ratio_one_and_clip_zero(self, small_env, tiny_net_config):
        cfg = TrainConfig(horizon=40, minibatch_size=20, epochs=2, seed=8)
        learner = PPOLearner(tiny_net_config, cfg, 0)
        buf = collect_rollouts(small_env, [learner], horizon=40, seed=9)[0]
        buf.finalize(0.0, cfg.gamma, cfg.gae_lambda)
        metrics = ppo_update(learner.policy, learner.value, learner.policy_opt,
                             learner.value_opt, buf, cfg, learner.update_rng)
        assert metrics["epoch0_ratio_max_abs_dev"] < 1e-9
        assert metrics["epoch0_clip_fraction"] == 0.0

    def test_update_requires_finalize(self, small_env, tiny_net_config):
        cfg = TrainConfig(horizon=10, seed=8)
        learner = PPOLearner(tiny_net_config, cfg, 0)
        buf = collect_rollouts(small_env, [learner], horizon=10, seed=9)[0]
        with pytest.raises(RuntimeError):
            ppo_update(learner.policy, learner.value, learner.policy_opt,
                       learner.value_opt, buf, cfg, learner.update_rng)


class TestTrainers:
    def ppo_metrics_trace(self, vehicle, sensors, n_agents, steps, net_config,
                          algorithm="ppo"):
        wc = cs.WorldConfig(seed=3, max_episode_steps=40,
                            extent=(9.0, 6.0) if n_agents > 1 else (6.0, 3.0),
                            num_agents=n_agents)
        env = CoralEnv(wc, vehicle, sensors)
        cfg = TrainConfig(algorithm=algorithm, total_steps=steps, horizon=32,
                          minibatch_size=16, epochs=2, seed=11)
        trainer = PPOTrainer(env, cfg, net_config)
        records = []
        trainer.run(on_episode=lambda r: records.append((r.agent, r.episode,
                                                         round(r.reward, 12))))
        flats = [nn.get_flat(l.policy.params()) for l in trainer.learners]
        return records, flats

    def test_ippo_n1_reduces_to_ppo_bitwise(self, vehicle, quiet_sensors,
                                            tiny_net_config):
        sensors = dataclasses.replace(quiet_sensors, camera=cs.CameraConfig(8, 8))
        rec_ppo, flat_ppo = self.ppo_metrics_trace(vehicle, sensors, 1, 100,
                                                   tiny_net_config, "ppo")
        rec_ippo, flat_ippo = self.ppo_metrics_trace(vehicle, sensors, 1, 100,
                                                     tiny_net_config, "ippo")
        assert rec_ppo == rec_ippo
        assert np.all(flat_ppo[0] == flat_ippo[0])

    def test_ippo_three_agents_runs_and_diverges(self, vehicle, quiet_sensors,
                                                 vec_net_config):
        sensors = dataclasses.replace(quiet_sensors, camera=cs.CameraConfig(8, 8))
        wc = cs.WorldConfig(seed=3, max_episode_steps=40, extent=(9.0, 6.0),
                            num_agents=3, num_healthy=15, num_unhealthy=15,
                            num_buckets=3)
        env = CoralEnv(wc, vehicle, sensors)
        cfg = TrainConfig(algorithm="ippo", total_steps=80, horizon=40,
                          minibatch_size=20, epochs=2, seed=12)
        trainer = PPOTrainer(env, cfg, vec_net_config)
        # Learners start from identical weights to expose divergence.
        src = nn.get_flat(trainer.learners[0].policy.params())
        for learner in trainer.learners[1:]:
            nn.set_flat(learner.policy.params(), src)
        trainer.run()
        flat1 = nn.get_flat(trainer.learners[0].policy.params())
        flat2 = nn.get_flat(trainer.learners[1].policy.params())
        flat3 = nn.get_flat(trainer.learners[2].policy.params())
        assert not np.array_equal(flat1, flat2)
        assert not np.array_equal(flat2, flat3)

    def test_sac_trainer_smoke(self, vehicle, quiet_sensors, vec_net_config):
        sensors = dataclasses.replace(quiet_sensors, camera=cs.CameraConfig(8, 8))
        wc = cs.WorldConfig(seed=4, max_episode_steps=30)
        env = CoralEnv(wc, vehicle, sensors)
        cfg = TrainConfig(algorithm="sac", total_steps=120, warmup_steps=40,
                          batch_size=16, update_every=4, seed=13)
        trainer = SACTrainer(env, cfg, vec_net_config)
        updates = []
        trainer.run(on_update=lambda step, agent, m: updates.append(m))
        assert updates, "no SAC updates ran"
        assert all(np.isfinite(m["critic_loss"]) for m in updates)
        assert all(m["alpha"] > 0 for m in updates)


class TestRunningMeanStd:
    def test_matches_numpy_statistics(self):
        rng = np.random.default_rng(15)
        data = rng.standard_normal((1000, 4)) * np.array([1, 2, 3, 4]) + 5
        norm = RunningMeanStd(4)
        for chunk in np.array_split(data, 13):
            norm.update(chunk)
        assert np.allclose(norm.mean, data.mean(axis=0), atol=1e-9)
        assert np.allclose(norm.var, data.var(axis=0), atol=1e-9)

    def test_normalize_clips(self):
        norm = RunningMeanStd(2, clip=3.0)
        norm.update(np.zeros((10, 2)) + [0.0, 1.0])
        z = norm.normalize(np.array([1e9, -1e9]))
        assert np.all(np.abs(z) <= 3.0)
