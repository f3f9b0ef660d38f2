"""The MDP step loop: control, physics, contacts, rewards, observations.

Each control tick applies the inner-loop controllers to every agent's
action command, integrates the plant through the configured physics
substeps with wall clamping, resolves contact events (a coral collected
by one agent in a step is unavailable to the others), advances the reward
machines, and renders observations.

EpisodeState is mutated in place for throughput; an episode is owned by
exactly one stepping context. Determinism: a fixed (seed, action
sequence) pair reproduces the episode trace bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .config import VehicleConfig
from .control import (ActionCommand, ControllerState, altitude_controller,
                      attitude_stabilizer, velocity_tracker)
from .dynamics import Wrench, actuate, rotation_matrix, step_dynamics
from .reward import ContactEvent, EventKind, reward_step
from .sensors import Observation, SensorConfig, make_observation
from .world import (EpisodeState, WorldConfig, detect_events, generate_world,
                    nearest_bucket_distance, query_depth)


class EpisodeDoneError(RuntimeError):
    """step() called on a finished episode."""


@dataclass
class StepInfo:
    """Per-step bookkeeping: what each agent's reward machine consumed."""

    events: list[list[ContactEvent]]      # effective events per agent
    bucket_distances: list[float]
    collected: list[int]                  # coral indices collected this step
    deposits: list[int]                   # agent indices that deposited


def _compose_wrench(vehicle, controller: ControllerState, action: ActionCommand,
                    state: EpisodeState, vcfg: VehicleConfig):
    """Inner loop: velocity tracking + attitude + altitude -> saturated wrench."""
    dt = vcfg.control_dt
    g = vcfg.gains
    fx, fy, mz, (s_u, s_v, s_r) = velocity_tracker(
        action, vehicle.velocity, vcfg.max_speeds,
        (g["surge"], g["sway"], g["yaw"]),
        (controller.surge, controller.sway, controller.yaw), dt)
    mroll, mpitch, s_roll, s_pitch = attitude_stabilizer(
        vehicle.pose, vehicle.velocity, g["roll"], g["pitch"],
        controller.roll, controller.pitch, dt)

    pos = vehicle.pose.position
    altitude = pos[2] + query_depth(state.bathymetry, pos[0], pos[1])
    climb_rate = float((rotation_matrix(vehicle.pose.attitude) @ vehicle.velocity.linear)[2])
    fz, s_alt = altitude_controller(
        max(0.0, altitude), vcfg.altitude_target, g["altitude"],
        controller.altitude, dt, climb_rate=climb_rate)

    wrench = actuate(Wrench(np.array([fx, fy, fz]), np.array([mroll, mpitch, mz])),
                     vcfg.wrench_limits)
    new_controller = ControllerState(roll=s_roll, pitch=s_pitch, altitude=s_alt,
                                     surge=s_u, sway=s_v, yaw=s_r)
    return wrench, new_controller


def _clamp_to_tank(vehicle, state: EpisodeState, extent):
    """Inelastic walls: clamp position to the tank, zeroing velocity into them."""
    pos = vehicle.pose.position.copy()
    hit_axes = []
    for axis, hi in ((0, extent[0]), (1, extent[1])):
        if pos[axis] < 0.0:
            pos[axis] = 0.0
            hit_axes.append(axis)
        elif pos[axis] > hi:
            pos[axis] = hi
            hit_axes.append(axis)
    fz = -query_depth(state.bathymetry, pos[0], pos[1])
    if pos[2] < fz:
        pos[2] = fz
        hit_axes.append(2)
    elif pos[2] > 0.0:
        pos[2] = 0.0
        hit_axes.append(2)
    if not hit_axes:
        if pos is not vehicle.pose.position:
            vehicle = replace(vehicle, pose=replace(vehicle.pose, position=pos))
        return vehicle
    rot = rotation_matrix(vehicle.pose.attitude)
    v_world = rot @ vehicle.velocity.linear
    for axis in hit_axes:
        v_world[axis] = 0.0
    velocity = replace(vehicle.velocity, linear=rot.T @ v_world)
    return replace(vehicle, pose=replace(vehicle.pose, position=pos), velocity=velocity)


def env_step(
    state: EpisodeState,
    actions: list[ActionCommand],
    world_config: WorldConfig,
    vehicle_config: VehicleConfig,
    sensor_config: SensorConfig,
    compute_observations: bool = True,
):
    """One control tick for all agents.

    Returns (state, observations, rewards, done, info). state is the same
    object, mutated. observations is None when compute_observations is
    False (the physics and rewards are unaffected; only the sensor
    synthesis is skipped).
    """
    if state.done:
        raise EpisodeDoneError("episode is done; reset before stepping")
    if len(actions) != state.num_agents:
        raise ValueError(f"expected {state.num_agents} actions, got {len(actions)}")

    for i in range(state.num_agents):
        wrench, state.controllers[i] = _compose_wrench(
            state.vehicles[i], state.controllers[i], actions[i], state, vehicle_config)
        vehicle = state.vehicles[i]
        for _ in range(vehicle_config.substeps_per_tick):
            vehicle = step_dynamics(vehicle, wrench, vehicle_config.params,
                                    state.current, vehicle_config.dt)
            vehicle = _clamp_to_tank(vehicle, state, world_config.extent)
        state.vehicles[i] = vehicle

    # Contact resolution. Nearest agent claims a contested coral (ties to
    # the lower agent index); claimed corals vanish from later agents'
    # event lists within the same step.
    raw_events = [detect_events(state, i) for i in range(state.num_agents)]
    order = sorted(range(state.num_agents),
                   key=lambda i: (raw_events[i][0].distance if raw_events[i] else np.inf, i))
    collected_now: set[int] = set()
    rewards = [0.0] * state.num_agents
    info = StepInfo(events=[[] for _ in range(state.num_agents)],
                    bucket_distances=[0.0] * state.num_agents,
                    collected=[], deposits=[])
    for i in order:
        effective = [e for e in raw_events[i]
                     if e.kind is EventKind.BUCKET or e.object_index not in collected_now]
        d_bucket = nearest_bucket_distance(state, i)
        step = reward_step(state.reward_machines[i], effective, d_bucket,
                           world_config.shaping_coeff)
        state.reward_machines[i] = step.machine
        rewards[i] = step.reward
        info.events[i] = effective
        info.bucket_distances[i] = d_bucket
        if step.collect_coral is not None:
            collected_now.add(step.collect_coral)
            coral = state.corals[step.collect_coral]
            state.corals[step.collect_coral] = replace(coral, collected=True)
            info.collected.append(step.collect_coral)
        if step.deposit:
            info.deposits.append(i)

    observations = None
    if compute_observations:
        observations = [make_observation(state, i, sensor_config)
                        for i in range(state.num_agents)]

    state.step_count += 1
    state.done = state.step_count >= world_config.max_episode_steps
    return state, observations, rewards, state.done, info


class CoralEnv:
    """Convenience wrapper owning one episode at a time."""

    def __init__(self, world_config: WorldConfig, vehicle_config: VehicleConfig,
                 sensor_config: SensorConfig):
        self.world_config = world_config
        self.vehicle_config = vehicle_config
        self.sensor_config = sensor_config
        self.state: EpisodeState | None = None

    def reset(self, seed: int | None = None,
              compute_observations: bool = True) -> list[Observation] | None:
        """Fresh episode; seed overrides the world config seed.

        With compute_observations=False no sensor noise is drawn, leaving
        the per-agent rng streams untouched (the HIL twin relies on this
        to stay draw-aligned with an in-process rollout).
        """
        config = self.world_config
        if seed is not None and config.randomize_layout:
            config = replace(config, seed=seed)
        self.state = generate_world(config, sensor_seed=self.sensor_config.noise_seed)
        if not compute_observations:
            return None
        return [make_observation(self.state, i, self.sensor_config)
                for i in range(self.state.num_agents)]

    def step(self, actions: list[ActionCommand], compute_observations: bool = True):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        _, obs, rewards, done, info = env_step(
            self.state, actions, self.world_config, self.vehicle_config,
            self.sensor_config, compute_observations)
        return obs, rewards, done, info

    def observation(self, agent_index: int = 0) -> Observation:
        return make_observation(self.state, agent_index, self.sensor_config)

    @property
    def num_agents(self) -> int:
        return self.world_config.num_agents


TRACE_HEADER = ["step", "agent", "x", "y", "z", "roll", "pitch", "yaw",
                "reward", "event", "bucket_distance"]


def format_event(events: list[ContactEvent]) -> str:
    return ";".join(f"{e.kind.value}:{e.object_index}" for e in events)


def write_trace_csv(path, rows) -> None:
    """Episode trace export: one row per (step, agent)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        writer.writerows(rows)


def trace_rows(step: int, state: EpisodeState, rewards, info: StepInfo):
    rows = []
    for i in range(state.num_agents):
        pose = state.vehicles[i].pose
        rows.append([
            step, i,
            f"{pose.position[0]:.9f}", f"{pose.position[1]:.9f}", f"{pose.position[2]:.9f}",
            f"{pose.attitude[0]:.9f}", f"{pose.attitude[1]:.9f}", f"{pose.attitude[2]:.9f}",
            f"{rewards[i]:.9f}", format_event(info.events[i]),
            f"{info.bucket_distances[i]:.9f}",
        ])
    return rows
