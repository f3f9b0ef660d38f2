import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import coralsim as cs
from coralsim.control import (ActionCommand, ControllerState, PidGains, PidState,
                              altitude_controller, attitude_stabilizer, pid_step,
                              velocity_tracker)
from coralsim.dynamics import BodyVelocity, Pose, VehicleState, step_dynamics
from coralsim.env import _compose_wrench
from coralsim.world import generate_world, query_depth


def run_closed_loop(vehicle, world_cfg, action, seconds, initial_attitude=None,
                    start_xy=None):
    """Step the inner loop + plant; returns per-tick state history."""
    state = generate_world(world_cfg)
    v = state.vehicles[0]
    pose = v.pose
    if start_xy is not None:
        pose = dataclasses.replace(pose, position=np.array(
            [start_xy[0], start_xy[1], pose.position[2]]))
    if initial_attitude is not None:
        pose = dataclasses.replace(pose, attitude=np.array(initial_attitude))
    state.vehicles[0] = VehicleState(pose, BodyVelocity(np.zeros(3), np.zeros(3)))
    ctrl = ControllerState()
    hist = []
    for k in range(int(seconds / vehicle.control_dt)):
        wrench, ctrl = _compose_wrench(state.vehicles[0], ctrl, action, state, vehicle)
        veh = state.vehicles[0]
        for _ in range(vehicle.substeps_per_tick):
            veh = step_dynamics(veh, wrench, vehicle.params, state.current, vehicle.dt)
            pos = veh.pose.position.copy()
            pos[0] = np.clip(pos[0], 0, world_cfg.extent[0])
            pos[1] = np.clip(pos[1], 0, world_cfg.extent[1])
            veh = dataclasses.replace(
                veh, pose=dataclasses.replace(veh.pose, position=pos))
        state.vehicles[0] = veh
        pos = veh.pose.position
        alt = pos[2] + query_depth(state.bathymetry, pos[0], pos[1])
        hist.append((k * vehicle.control_dt, veh, alt))
    return hist


class TestPidStep:
    def test_zero_error_zero_state(self):
        gains = PidGains(kp=1.0, ki=1.0, kd=1.0)
        out, state = pid_step(gains, PidState(), 0.0, 0.1)
        assert out == 0.0
        assert state.integral == 0.0

    def test_proportional_evaluation(self):
        gains = PidGains(kp=2.0, ki=0.0, kd=0.0, output_limit=10.0)
        out, _ = pid_step(gains, PidState(), 0.5, 0.1)
        assert out == pytest.approx(1.0 + 2.0 * 0.5 * 0.0)  # ki = 0
        assert out == pytest.approx(1.0)

    def test_integral_saturates_at_limit(self):
        gains = PidGains(kp=0.0, ki=1.0, kd=0.0, integral_limit=0.3)
        state = PidState()
        for _ in range(100):
            _, state = pid_step(gains, state, 1.0, 0.1)
            assert abs(state.integral) <= 0.3
        assert state.integral == pytest.approx(0.3)

    def test_explicit_error_rate_used(self):
        gains = PidGains(kp=0.0, ki=0.0, kd=2.0)
        out, _ = pid_step(gains, PidState(), 1.0, 0.1, error_rate=-0.5)
        assert out == pytest.approx(-1.0)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=50),
           st.floats(0.5, 5.0), st.floats(0.5, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_output_and_integral_always_clamped(self, errors, out_lim, int_lim):
        gains = PidGains(kp=3.0, ki=2.0, kd=1.0,
                         integral_limit=int_lim, output_limit=out_lim)
        state = PidState()
        for e in errors:
            out, state = pid_step(gains, state, e, 0.05)
            assert abs(out) <= out_lim
            assert abs(state.integral) <= int_lim

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            pid_step(PidGains(1, 0, 0), PidState(), 1.0, 0.0)


class TestAttitudeStabilizer:
    def test_level_attitude_zero_moments(self, vehicle):
        g = vehicle.gains
        rm, pm, _, _ = attitude_stabilizer(
            Pose(np.zeros(3), np.zeros(3)), BodyVelocity(np.zeros(3), np.zeros(3)),
            g["roll"], g["pitch"], PidState(), PidState(), 0.1)
        assert rm == 0.0 and pm == 0.0

    def test_positive_roll_gives_negative_moment(self, vehicle):
        g = vehicle.gains
        rm, _, _, _ = attitude_stabilizer(
            Pose(np.zeros(3), np.array([0.2, 0.0, 0.0])),
            BodyVelocity(np.zeros(3), np.zeros(3)),
            g["roll"], g["pitch"], PidState(), PidState(), 0.1)
        assert rm < 0.0

    def test_roll_recovery_within_ten_seconds(self, vehicle):
        wc = cs.WorldConfig(seed=11, max_episode_steps=10_000)
        hist = run_closed_loop(vehicle, wc, ActionCommand(), 12.0,
                               initial_attitude=(np.deg2rad(20), 0.0, 0.0))
        for t, veh, _ in hist:
            if t >= 10.0:
                assert abs(np.rad2deg(veh.pose.attitude[0])) < 1.0


class TestAltitudeController:
    def test_at_target_zero_proportional(self, vehicle):
        gains = PidGains(kp=5.0, ki=0.0, kd=0.0)
        out, _ = altitude_controller(0.6, 0.6, gains, PidState(), 0.1, climb_rate=0.0)
        assert out == 0.0

    def test_below_target_pushes_up(self, vehicle):
        out, _ = altitude_controller(0.3, 0.6, vehicle.gains["altitude"],
                                     PidState(), 0.1, climb_rate=0.0)
        assert out > 0.0

    def test_rejects_negative_altitude(self, vehicle):
        with pytest.raises(ValueError):
            altitude_controller(-0.1, 0.6, vehicle.gains["altitude"], PidState(), 0.1)

    def test_altitude_held_over_sloped_terrain(self, vehicle):
        wc = cs.WorldConfig(seed=5, terrain_amplitude=0.25, max_episode_steps=10_000)
        hist = run_closed_loop(vehicle, wc, ActionCommand(0.6, 0.0, 0.25), 45.0,
                               start_xy=(1.0, 1.5))
        settled = [alt for t, _, alt in hist if t > 8.0]
        target = vehicle.altitude_target
        assert max(abs(a - target) for a in settled) <= 0.15


class TestVelocityTracker:
    def test_rest_zero_command_zero_output(self, vehicle):
        g = vehicle.gains
        fx, fy, mz, _ = velocity_tracker(
            ActionCommand(), BodyVelocity(np.zeros(3), np.zeros(3)),
            vehicle.max_speeds, (g["surge"], g["sway"], g["yaw"]),
            (PidState(), PidState(), PidState()), 0.1)
        assert fx == 0.0 and fy == 0.0 and mz == 0.0

    def test_full_surge_reaches_max_speed(self, vehicle):
        wc = cs.WorldConfig(seed=3, max_episode_steps=10_000)
        hist = run_closed_loop(vehicle, wc, ActionCommand(1.0, 0.0, 0.0), 9.0,
                               start_xy=(0.3, 1.5))
        settled = [veh.velocity.linear[0] for t, veh, _ in hist if 5.0 < t < 9.0]
        assert np.mean(settled) == pytest.approx(vehicle.max_speeds[0], rel=0.10)

    def test_full_reverse_yaw_rate(self, vehicle):
        wc = cs.WorldConfig(seed=3, max_episode_steps=10_000)
        hist = run_closed_loop(vehicle, wc, ActionCommand(0.0, 0.0, -1.0), 15.0)
        settled = [veh.velocity.angular[2] for t, veh, _ in hist if t > 10.0]
        mean_rate = np.mean(settled)
        assert mean_rate < 0.0
        assert mean_rate == pytest.approx(-vehicle.max_speeds[2], rel=0.10)


@pytest.mark.slow
def test_inner_loop_stack_stability_from_random_attitudes(vehicle):
    """From any tilt up to 30 degrees, roll and pitch settle within 1 degree
    and stay there for the rest of a 60 s run."""
    rng = np.random.default_rng(42)
    wc = cs.WorldConfig(seed=12, max_episode_steps=100_000)
    for trial in range(50):
        roll = rng.uniform(-np.deg2rad(30), np.deg2rad(30))
        pitch = rng.uniform(-np.deg2rad(30), np.deg2rad(30))
        hist = run_closed_loop(vehicle, wc, ActionCommand(), 60.0,
                               initial_attitude=(roll, pitch, rng.uniform(-np.pi, np.pi)))
        late_errors = [max(abs(veh.pose.attitude[0]), abs(veh.pose.attitude[1]))
                       for t, veh, _ in hist if t >= 10.0]
        assert late_errors and max(late_errors) < np.deg2rad(1.0), \
            f"trial {trial}: max late error {np.rad2deg(max(late_errors)):.2f} deg"
