"""A one-minute PPO training run plus a trend fit over its reward curve.

Uses a miniature network/horizon so the full pipeline (rollouts, updates,
metrics, checkpoints, trend fitting) is visible without the desk profile's
quarter-hour budget. Expect noise, not mastery.
"""

import dataclasses
import tempfile
from pathlib import Path

import coralsim as cs
from coralsim.config import packaged_config_path
from coralsim.harness import (fit_trend, load_experiment_spec, read_reward_curve,
                              run_experiment)
from coralsim.rl import NetworkConfig

spec = load_experiment_spec(packaged_config_path("desk_ppo"))
out = Path(tempfile.mkdtemp(prefix="tiny_ppo_"))
spec = dataclasses.replace(
    spec,
    name="tiny_ppo",
    world=dataclasses.replace(spec.world, max_episode_steps=100),
    sensors=dataclasses.replace(spec.sensors, camera=cs.CameraConfig(8, 8)),
    network=NetworkConfig(image_shape=(8, 8, 3), vector_dim=4,
                          conv_layers=((4, 3, 2),), dense_layers=(32,)),
    train=dataclasses.replace(spec.train, total_steps=6000, horizon=500,
                              minibatch_size=100, epochs=2),
    output_dir=str(out),
    checkpoint_every=2500,
)

result = run_experiment(spec)
print(f"episodes: {result.episodes}, mean reward (last 100): "
      f"{result.mean_reward_last100:+.3f}")
print(f"artifacts: {sorted(p.name for p in out.iterdir())}")

curve = read_reward_curve(result.metrics_path)
for model in ("log", "linear"):
    fit = fit_trend(curve, model)
    print(f"{model:6s} fit: a={fit.a:+.4g}  b={fit.b:+.4g}  rmse={fit.rmse:.3g}")
