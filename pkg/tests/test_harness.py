import dataclasses
import json
import shutil

import numpy as np
import pytest

import coralsim as cs
from coralsim.cli import main as cli_main
from coralsim.config import packaged_config_path
from coralsim.harness import (DegenerateInputError, MissingArtifactError,
                              emit_report, evaluate_policy, fit_trend,
                              ideal_polyline, latest_checkpoint,
                              load_experiment_spec, path_deviation,
                              point_to_polyline_distance, run_experiment)
from coralsim.harness.spec import checkpoint_extras
from coralsim.rl import (NetworkConfig, PolicyNetwork, RunningMeanStd,
                         load_checkpoint, save_checkpoint)


class TestFitTrend:
    def test_recovers_noiseless_log_law(self):
        x = np.linspace(1e4, 8e6, 400)
        y = 21.49 * np.log(x) - 267.03
        fit = fit_trend(np.column_stack([x, y]), "log")
        assert fit.a == pytest.approx(21.49, abs=1e-6)
        assert fit.b == pytest.approx(-267.03, abs=1e-6)
        assert fit.rmse < 1e-9

    def test_recovers_noiseless_linear_law(self):
        x = np.linspace(1e4, 8e6, 400)
        y = 2e-5 * x + 9.67
        fit = fit_trend(np.column_stack([x, y]), "linear")
        assert fit.a == pytest.approx(2e-5, rel=1e-9)
        assert fit.b == pytest.approx(9.67, abs=1e-6)

    def test_constant_data_linear(self):
        pts = [(x, 5.0) for x in (1.0, 2.0, 3.0, 4.0)]
        fit = fit_trend(pts, "linear")
        assert fit.a == pytest.approx(0.0, abs=1e-12)
        assert fit.b == pytest.approx(5.0)

    def test_noisy_recovery_within_bounds(self):
        rng = np.random.default_rng(0)
        x = np.linspace(1e3, 1e6, 2000)
        sigma = 5.0
        y = 9.09 * np.log(x) - 106.29 + sigma * rng.standard_normal(x.size)
        fit = fit_trend(np.column_stack([x, y]), "log")
        lx = np.log(x)
        se_a = sigma / np.sqrt(np.sum((lx - lx.mean()) ** 2))
        assert abs(fit.a - 9.09) < 3 * se_a * 1.5

    def test_idempotent_on_own_curve(self):
        x = np.linspace(10, 1e5, 300)
        fit = fit_trend(np.column_stack([x, 3.3 * np.log(x) + 1.1]), "log")
        refit = fit_trend(np.column_stack([x, fit.predict(x)]), "log")
        assert refit.a == pytest.approx(fit.a, abs=1e-9)
        assert refit.b == pytest.approx(fit.b, abs=1e-9)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateInputError):
            fit_trend([(1.0, 2.0), (2.0, 3.0)], "linear")
        with pytest.raises(DegenerateInputError):
            fit_trend([(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)], "linear")
        with pytest.raises(DegenerateInputError):
            fit_trend([(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)], "log")


class TestDeviation:
    POLY = np.array([[0.0, 0.0], [4.0, 0.0]])

    def test_point_on_polyline_zero(self):
        d = point_to_polyline_distance([[2.0, 0.0]], self.POLY)
        assert d[0] == pytest.approx(0.0, abs=1e-15)

    def test_uniform_offset_path(self):
        xs = np.linspace(0.5, 3.5, 50)
        path = np.column_stack([xs, np.full(50, 0.07)])
        report = path_deviation(path, self.POLY, success=True)
        assert report.max_deviation == pytest.approx(0.07, abs=1e-9)
        assert report.mean_deviation == pytest.approx(0.07, abs=1e-9)

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        path = rng.uniform(0, 4, (30, 2))
        poly = np.array([[0.0, 0.0], [1.0, 2.0], [4.0, 1.0]])
        shift = np.array([5.5, -2.2])
        a = point_to_polyline_distance(path, poly)
        b = point_to_polyline_distance(path + shift, poly + shift)
        assert np.allclose(a, b, atol=1e-12)

    def test_replayed_feasibility_geometry(self):
        """End-to-bucket distance from the published test-run coordinates."""
        bucket = np.array([0.913111808, 0.683606202])
        end = np.array([1.019691799, 0.6948003143])
        dist = float(np.linalg.norm(end - bucket))
        assert dist == pytest.approx(0.107, abs=1e-3)

    def test_path_length(self):
        path = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 9.0]])
        report = path_deviation(path, self.POLY, success=False)
        assert report.path_length == pytest.approx(10.0)


def tiny_spec(tmp_path, name="tiny", algorithm="ppo", steps=300):
    spec = load_experiment_spec(packaged_config_path("desk_ppo"))
    world = dataclasses.replace(spec.world, max_episode_steps=60)
    sensors = dataclasses.replace(spec.sensors, camera=cs.CameraConfig(8, 8))
    network = NetworkConfig(image_shape=(8, 8, 3), vector_dim=4,
                            conv_layers=((4, 3, 2),), dense_layers=(16,))
    train = dataclasses.replace(spec.train, algorithm=algorithm,
                                total_steps=steps, horizon=64,
                                minibatch_size=32, epochs=2,
                                warmup_steps=60, batch_size=16, update_every=4)
    return dataclasses.replace(spec, name=name, world=world, sensors=sensors,
                               network=network, train=train,
                               output_dir=str(tmp_path / name),
                               eval_episodes=2, checkpoint_every=128)


class TestRunExperiment:
    def test_smoke_run_writes_all_artifacts(self, tmp_path):
        spec = tiny_spec(tmp_path)
        result = run_experiment(spec)
        out = result.output_dir
        assert (out / "spec.yaml").exists()
        assert (out / "metrics.csv").exists()
        assert (out / "final.npz").exists()
        assert (out / "summary.json").exists()
        assert latest_checkpoint(out) is not None
        summary = json.loads((out / "summary.json").read_text())
        assert summary["env_steps"] == 300
        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0].startswith("step,episode,agent,reward,length")
        assert len(lines) > 1

    def test_interrupted_run_resumes_to_same_step_count(self, tmp_path):
        spec = tiny_spec(tmp_path, name="resume", steps=512)
        # Simulate a kill: run only part of the budget, leaving checkpoints.
        partial = dataclasses.replace(
            spec, train=dataclasses.replace(spec.train, total_steps=256))
        run_experiment(partial)
        assert latest_checkpoint(spec.output_dir and
                                 __import__("pathlib").Path(spec.output_dir)) is not None
        result = run_experiment(spec, resume=True)
        assert result.env_steps == 512
        rows = result.metrics_path.read_text().splitlines()[1:]
        steps = [int(r.split(",")[0]) for r in rows]
        assert steps == sorted(steps)
        assert result.final_checkpoint.exists()

    def test_resume_without_checkpoint_fails(self, tmp_path):
        spec = tiny_spec(tmp_path, name="nock")
        with pytest.raises(FileNotFoundError):
            run_experiment(spec, resume=True)

    def test_sac_smoke(self, tmp_path):
        spec = tiny_spec(tmp_path, name="tinysac", algorithm="sac", steps=200)
        result = run_experiment(spec)
        assert result.env_steps == 200
        header = result.metrics_path.read_text().splitlines()[0]
        assert "critic_loss" in header


class TestEvaluatePolicy:
    def test_eval_writes_trajectories_and_reports(self, tmp_path):
        spec = tiny_spec(tmp_path, name="evalrun")
        result = run_experiment(spec)
        reports, success_rate = evaluate_policy(result.final_checkpoint,
                                                episodes=2, seed=1234,
                                                out_dir=tmp_path / "eval",
                                                max_steps=40)
        assert len(reports) == 2
        assert 0.0 <= success_rate <= 1.0
        assert (tmp_path / "eval" / "trajectory_ep000.csv").exists()
        for r in reports:
            assert r.max_deviation >= r.mean_deviation >= 0.0

    def test_scripted_polyline_follower_zero_deviation(self):
        """A perfect follower reports essentially zero deviation."""
        poly = np.array([[0.5, 0.5], [2.0, 1.5], [4.0, 2.0]])
        samples = []
        for a, b in zip(poly[:-1], poly[1:]):
            for t in np.linspace(0, 1, 200):
                samples.append(a + t * (b - a))
        report = path_deviation(np.array(samples), poly, success=True)
        assert report.max_deviation < 1e-6

    def test_ideal_polyline_structure(self, vehicle, sensor_config):
        wc = cs.WorldConfig(seed=3)
        from coralsim.world import generate_world
        state = generate_world(wc)
        poly = ideal_polyline(state)
        assert poly.shape == (3, 2)
        assert np.allclose(poly[0], state.spawn_positions[0][:2])
        healthy_xy = [c.position[:2] for c in state.corals if c.healthy]
        dists = [np.linalg.norm(h - poly[0]) for h in healthy_xy]
        assert np.linalg.norm(poly[1] - poly[0]) == pytest.approx(min(dists))


class TestReport:
    def test_report_on_complete_run(self, tmp_path):
        spec = tiny_spec(tmp_path, name="reported")
        result = run_experiment(spec)
        path = emit_report(result.output_dir)
        text = path.read_text()
        assert "Trial report" in text
        assert "Reward trend fits" in text
        assert "coralsim train --spec" in text

    def test_report_on_empty_dir_fails(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(MissingArtifactError) as exc:
            emit_report(empty)
        assert "summary.json" in exc.value.missing
        assert "metrics.csv" in exc.value.missing


class TestCli:
    def test_fit_command(self, tmp_path, capsys):
        curve = tmp_path / "curve.csv"
        x = np.linspace(100, 10000, 50)
        rows = "\n".join(f"{a},{21.49 * np.log(a) - 267.03}" for a in x)
        curve.write_text("step,reward\n" + rows + "\n")
        assert cli_main(["fit", "--curve", str(curve), "--model", "log"]) == 0
        out = capsys.readouterr().out
        assert "21.49" in out

    def test_train_eval_report_pipeline(self, tmp_path, capsys):
        spec = tiny_spec(tmp_path, name="clirun")
        from coralsim.harness import save_experiment_spec
        spec_path = tmp_path / "spec.yaml"
        save_experiment_spec(spec, spec_path)
        assert cli_main(["train", "--spec", str(spec_path)]) == 0
        run_dir = tmp_path / "clirun"
        assert cli_main(["eval", "--checkpoint", str(run_dir / "final.npz"),
                         "--spec", str(spec_path), "--episodes", "1",
                         "--out", str(run_dir / "eval")]) == 0
        assert cli_main(["report", str(run_dir)]) == 0

    def test_config_error_exit_code(self, tmp_path):
        missing = tmp_path / "nope.yaml"
        assert cli_main(["train", "--spec", str(missing)]) == 1

    def test_runtime_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.npz"
        bad.write_bytes(b"not a checkpoint")
        assert cli_main(["infer", "--checkpoint", str(bad),
                         "--connect", "127.0.0.1:1", "--duration", "1",
                         "--out", str(tmp_path / "t.csv")]) == 1


class TestCheckpointRoundTrip:
    def test_checkpoint_rebuilds_identical_policy(self, tmp_path, tiny_net_config):
        rng = np.random.default_rng(5)
        policy = PolicyNetwork(tiny_net_config, 3, rng)
        norm = RunningMeanStd(4)
        norm.update(rng.standard_normal((50, 4)))
        spec = tiny_spec(tmp_path)
        path = tmp_path / "ck.npz"
        save_checkpoint(path, "ppo", tiny_net_config, {"policy": policy.params()},
                        norm, 123, 4, extras=checkpoint_extras(spec))
        ck = load_checkpoint(path)
        rebuilt = ck.build_policy()
        img = rng.uniform(0, 1, (2, 8, 8, 3))
        vec = rng.standard_normal((2, 4))
        m1, s1 = policy.forward(img, vec)
        m2, s2 = rebuilt.forward(img, vec)
        assert np.all(m1 == m2) and np.all(s1 == s2)
        assert np.all(ck.normalizer.mean == norm.mean)
        assert ck.env_step == 123
