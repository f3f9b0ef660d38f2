"""Policy evaluation: deterministic rollouts and trajectory deviation.

The reference for a feasibility run is the two-segment polyline
spawn -> nearest healthy coral -> bucket; deviation is the point-to-
polyline Euclidean distance in the horizontal plane, reported per step
with max/mean summaries and a success flag (a sample was collected AND
deposited).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..control import ActionCommand
from ..env import CoralEnv, format_event
from ..rl.checkpoint import Checkpoint, CheckpointError, load_checkpoint
from ..rl.distributions import deterministic_action


@dataclass(frozen=True)
class DeviationReport:
    max_deviation: float
    mean_deviation: float
    path_length: float
    success: bool
    deviations: np.ndarray  # per-step point-to-polyline distance


def point_to_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each 2D point to the segment ab."""
    points = np.atleast_2d(points)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def point_to_polyline_distance(points, polyline) -> np.ndarray:
    """Min distance from each 2D point to any polyline segment."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polyline, dtype=float)
    if poly.ndim != 2 or len(poly) < 2:
        raise ValueError("polyline needs at least 2 vertices")
    best = np.full(len(points), np.inf)
    for a, b in zip(poly[:-1], poly[1:]):
        best = np.minimum(best, point_to_segment_distance(points, a, b))
    return best


def path_deviation(path_xy, polyline_xy, success: bool) -> DeviationReport:
    path = np.atleast_2d(np.asarray(path_xy, dtype=float))
    deviations = point_to_polyline_distance(path, polyline_xy)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1) if len(path) > 1 else np.zeros(0)
    return DeviationReport(
        max_deviation=float(deviations.max()) if len(deviations) else 0.0,
        mean_deviation=float(deviations.mean()) if len(deviations) else 0.0,
        path_length=float(seg.sum()),
        success=success,
        deviations=deviations,
    )


def ideal_polyline(state) -> np.ndarray:
    """spawn -> nearest healthy coral -> nearest bucket, horizontal plane."""
    spawn = state.spawn_positions[0][:2]
    healthy = [c for c in state.corals if c.healthy and not c.collected]
    if not healthy or not state.buckets:
        return np.array([spawn, spawn])
    coral = min(healthy, key=lambda c: np.linalg.norm(c.position[:2] - spawn))
    bucket = min(state.buckets,
                 key=lambda b: np.linalg.norm(b.position[:2] - coral.position[:2]))
    return np.array([spawn, coral.position[:2], bucket.position[:2]])


def evaluate_policy(checkpoint_path, episodes: int, seed: int, out_dir,
                    max_steps: int | None = None):
    """Deterministic-policy rollouts; returns (reports, success_rate).

    Writes one trajectory CSV per episode into out_dir. The episode stops
    early once a sample has been deposited (the feasibility task is done).
    """
    ck = load_checkpoint(checkpoint_path)
    from ..hil.client import build_twin_from_checkpoint
    env = build_twin_from_checkpoint(ck)
    policy = ck.build_policy()
    normalizer = ck.normalizer
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports = []
    for episode in range(episodes):
        obs_list = env.reset(seed=seed + episode)
        polyline = ideal_polyline(env.state)
        collected = False
        deposited = False
        path = [env.state.vehicles[0].pose.position[:2].copy()]
        rows = []
        steps = max_steps if max_steps is not None else env.world_config.max_episode_steps
        for k in range(steps):
            obs = obs_list[0]
            image = obs.image[None] if policy.config.image_shape is not None else None
            vector = normalizer.normalize(obs.vector)[None]
            mean, _ = policy.forward(image, vector)
            action = deterministic_action(mean[0])
            obs_list, rewards, done, info = env.step([ActionCommand.from_array(action)])
            pose = env.state.vehicles[0].pose
            path.append(pose.position[:2].copy())
            rows.append([k, 0,
                         *(f"{x:.9f}" for x in pose.position),
                         *(f"{x:.9f}" for x in pose.attitude),
                         f"{rewards[0]:.9f}", format_event(info.events[0]),
                         f"{info.bucket_distances[0]:.9f}"])
            if info.collected:
                collected = True
            if info.deposits:
                deposited = True
                break
            if done:
                break
        report = path_deviation(np.array(path), polyline, collected and deposited)
        reports.append(report)
        with open(out_dir / f"trajectory_ep{episode:03d}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "agent", "x", "y", "z", "roll", "pitch", "yaw",
                             "reward", "event", "bucket_distance"])
            writer.writerows(rows)
    success_rate = float(np.mean([r.success for r in reports])) if reports else 0.0
    return reports, success_rate
