"""Inner-loop PID controllers.

The RL agent commands only surge/sway/yaw velocity fractions; these
controllers absorb the remaining degrees of freedom (roll, pitch, and
altitude above the sea floor) and turn velocity commands into body forces.

Controllers are value-type state machines: each step function takes the
current PidState and returns the output together with a new state, so any
number of instances can run in parallel without shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import BodyVelocity, Pose


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float
    integral_limit: float = 1.0
    output_limit: float = 100.0

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("gains must be non-negative")
        if self.integral_limit <= 0 or self.output_limit <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    previous_error: float = 0.0


@dataclass(frozen=True)
class ActionCommand:
    """Analog surge/sway/yaw command, each clamped to [-1, 1]."""

    u: float = 0.0
    v: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", float(np.clip(self.u, -1.0, 1.0)))
        object.__setattr__(self, "v", float(np.clip(self.v, -1.0, 1.0)))
        object.__setattr__(self, "r", float(np.clip(self.r, -1.0, 1.0)))

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.r])

    @staticmethod
    def from_array(arr) -> "ActionCommand":
        arr = np.asarray(arr, dtype=float)
        return ActionCommand(arr[0], arr[1], arr[2])


def pid_step(
    gains: PidGains,
    state: PidState,
    error: float,
    dt: float,
    error_rate: float | None = None,
) -> tuple[float, PidState]:
    """One PID update; returns (output, new state).

    The integral accumulator is clamped to +/- integral_limit (anti-windup)
    and the output to +/- output_limit. When the caller can measure the
    error rate directly (e.g. a gyro), pass it as error_rate; the
    finite-difference fallback uses previous_error and suffers setpoint
    kick.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    integral = float(np.clip(state.integral + error * dt, -gains.integral_limit, gains.integral_limit))
    rate = error_rate if error_rate is not None else (error - state.previous_error) / dt
    raw = gains.kp * error + gains.ki * integral + gains.kd * rate
    output = float(np.clip(raw, -gains.output_limit, gains.output_limit))
    return output, PidState(integral=integral, previous_error=error)


def attitude_stabilizer(
    pose: Pose,
    velocity: BodyVelocity,
    roll_gains: PidGains,
    pitch_gains: PidGains,
    roll_state: PidState,
    pitch_state: PidState,
    dt: float,
) -> tuple[float, float, PidState, PidState]:
    """Roll/pitch moments driving both angles toward zero.

    The derivative term uses the measured body rates (derivative on
    measurement), so a step change in attitude error does not kick.
    """
    roll, pitch = pose.attitude[0], pose.attitude[1]
    p, q = velocity.angular[0], velocity.angular[1]
    roll_moment, roll_state = pid_step(roll_gains, roll_state, -roll, dt, error_rate=-p)
    pitch_moment, pitch_state = pid_step(pitch_gains, pitch_state, -pitch, dt, error_rate=-q)
    return roll_moment, pitch_moment, roll_state, pitch_state


def altitude_controller(
    altitude_measured: float,
    altitude_target: float,
    gains: PidGains,
    state: PidState,
    dt: float,
    climb_rate: float | None = None,
) -> tuple[float, PidState]:
    """Heave force keeping the sonar altitude at the target (terrain
    following). climb_rate, when supplied, is the measured d(altitude)/dt.
    """
    if altitude_measured < 0:
        raise ValueError("altitude must be non-negative")
    error = altitude_target - altitude_measured
    rate = None if climb_rate is None else -climb_rate
    return pid_step(gains, state, error, dt, error_rate=rate)


def velocity_tracker(
    command: ActionCommand,
    velocity: BodyVelocity,
    max_speeds: tuple[float, float, float],
    gains: tuple[PidGains, PidGains, PidGains],
    states: tuple[PidState, PidState, PidState],
    dt: float,
) -> tuple[float, float, float, tuple[PidState, PidState, PidState]]:
    """PI tracking of surge/sway/yaw velocity setpoints.

    Setpoints are the command fractions scaled by the configured maximum
    speeds; outputs are a surge force, sway force and yaw moment.
    """
    setpoints = command.as_array() * np.asarray(max_speeds, dtype=float)
    measured = np.array([velocity.linear[0], velocity.linear[1], velocity.angular[2]])
    outputs = []
    new_states = []
    for i in range(3):
        out, st = pid_step(gains[i], states[i], setpoints[i] - measured[i], dt)
        outputs.append(out)
        new_states.append(st)
    return outputs[0], outputs[1], outputs[2], (new_states[0], new_states[1], new_states[2])


@dataclass(frozen=True)
class ControllerState:
    """All inner-loop PID states for one vehicle."""

    roll: PidState = PidState()
    pitch: PidState = PidState()
    altitude: PidState = PidState()
    surge: PidState = PidState()
    sway: PidState = PidState()
    yaw: PidState = PidState()
