"""Rigid-body dynamics of a small underwater vehicle.

Frames and conventions:
  * World frame: x along the tank, y across, z up; origin at the water
    surface, so a submerged vehicle has z < 0.
  * Body frame: x surge (forward), y sway (port), z heave (up);
    right-handed, origin at the center of gravity.
  * Attitude is ZYX Euler (roll phi, pitch theta, yaw psi), wrapped to
    (-pi, pi].

The plant model is the standard marine-craft form

    eta_dot = J(eta) * nu
    M * nu_dot + C(nu) * nu + D(nu) * nu = tau + restoring + current drag

with M the rigid-body-plus-added-mass matrix, C(nu) the Coriolis and
centripetal matrix, D(nu) a diagonal linear+quadratic damping model, and
the gravito-buoyant (restoring) wrench computed from weight, buoyancy and
the center-of-buoyancy offset. A uniform world-frame current enters as
damping of the velocity relative to the flow.

Everything in this module is a pure function over value types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Euler-rate transform blows up at pitch = +/- pi/2; refuse earlier.
PITCH_SINGULARITY_MARGIN = 1e-3


class SingularAttitudeError(ValueError):
    """Pitch too close to +/- pi/2 for the Euler-rate transform."""


class NonFiniteStateError(ArithmeticError):
    """A dynamics step produced NaN or Inf."""


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    return angle - TWO_PI * np.ceil((angle - np.pi) / TWO_PI)


@dataclass(frozen=True)
class Pose:
    """World-frame position [m] and ZYX Euler attitude [rad]."""

    position: np.ndarray
    attitude: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "attitude", np.asarray(self.attitude, dtype=float))


@dataclass(frozen=True)
class BodyVelocity:
    """Body-frame linear [m/s] and angular [rad/s] velocity."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        object.__setattr__(self, "angular", np.asarray(self.angular, dtype=float))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True)
class Wrench:
    """Body-frame force [N] and moment [N*m]."""

    force: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float))
        object.__setattr__(self, "moment", np.asarray(self.moment, dtype=float))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_vector(vec) -> "Wrench":
        vec = np.asarray(vec, dtype=float)
        return Wrench(vec[:3], vec[3:])


@dataclass(frozen=True)
class CurrentField:
    """Uniform world-frame current velocity [m/s], constant per episode."""

    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))

    @staticmethod
    def none() -> "CurrentField":
        return CurrentField(np.zeros(3))


@dataclass(frozen=True)
class RigidBodyParams:
    """Mass, hydrodynamic and restoring parameters of the vehicle.

    inertia is the 3x3 rigid-body inertia about the CG [kg*m^2];
    added_mass is the full 6x6 hydrodynamic added-mass matrix (symmetric,
    positive semi-definite); linear_damping / quadratic_damping are the 6
    diagonal coefficients of D(nu) = diag(d_lin + d_quad * |nu|); weight
    and buoyancy are forces [N]; cob_offset is the center of buoyancy
    relative to the CG in the body frame [m].
    """

    mass: float
    inertia: np.ndarray
    added_mass: np.ndarray
    linear_damping: np.ndarray
    quadratic_damping: np.ndarray
    weight: float
    buoyancy: float
    cob_offset: np.ndarray
    # Hard caps applied after each integration step; keeps the state sane
    # even under absurd commanded wrenches.
    max_linear_speed: float = 5.0
    max_angular_speed: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(self, "added_mass", np.asarray(self.added_mass, dtype=float))
        object.__setattr__(self, "linear_damping", np.asarray(self.linear_damping, dtype=float))
        object.__setattr__(self, "quadratic_damping", np.asarray(self.quadratic_damping, dtype=float))
        object.__setattr__(self, "cob_offset", np.asarray(self.cob_offset, dtype=float))
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if np.any(self.linear_damping < 0) or np.any(self.quadratic_damping < 0):
            raise ValueError("damping coefficients must be non-negative")
        m = self.mass_matrix()
        if not np.allclose(m, m.T):
            raise ValueError("mass matrix must be symmetric")
        if np.any(np.linalg.eigvalsh(m) <= 0):
            raise ValueError("mass matrix must be positive-definite")

    def mass_matrix(self) -> np.ndarray:
        """Total 6x6 inertia: rigid body (CG at origin) plus added mass."""
        m_rb = np.zeros((6, 6))
        m_rb[:3, :3] = self.mass * np.eye(3)
        m_rb[3:, 3:] = self.inertia
        return m_rb + self.added_mass


@dataclass(frozen=True)
class VehicleState:
    """Pose plus body velocity; the integrated plant state."""

    pose: Pose
    velocity: BodyVelocity


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotation_matrix(attitude: np.ndarray) -> np.ndarray:
    """Body-to-world rotation for ZYX Euler angles (roll, pitch, yaw)."""
    phi, theta, psi = attitude
    cph, sph = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cps, sps = np.cos(psi), np.sin(psi)
    return np.array([
        [cps * cth, cps * sth * sph - sps * cph, cps * sth * cph + sps * sph],
        [sps * cth, sps * sth * sph + cps * cph, sps * sth * cph - cps * sph],
        [-sth, cth * sph, cth * cph],
    ])


def transform_matrix(pose: Pose) -> np.ndarray:
    """6x6 body-to-world velocity transform J(eta).

    Top-left block rotates linear velocity; bottom-right maps body rates
    to Euler-angle rates. Raises SingularAttitudeError within
    PITCH_SINGULARITY_MARGIN of the pitch singularity.
    """
    phi, theta, _ = pose.attitude
    if abs(theta) >= np.pi / 2 - PITCH_SINGULARITY_MARGIN:
        raise SingularAttitudeError(
            f"pitch {theta:.4f} rad is within {PITCH_SINGULARITY_MARGIN} of +/- pi/2"
        )
    cph, sph = np.cos(phi), np.sin(phi)
    cth, tth = np.cos(theta), np.tan(theta)
    j = np.zeros((6, 6))
    j[:3, :3] = rotation_matrix(pose.attitude)
    j[3:, 3:] = np.array([
        [1.0, sph * tth, cph * tth],
        [0.0, cph, -sph],
        [0.0, sph / cth, cph / cth],
    ])
    return j


def coriolis_matrix(params: RigidBodyParams, nu: BodyVelocity) -> np.ndarray:
    """Skew-symmetric Coriolis/centripetal matrix C(nu) for the total M.

    Uses the standard parameterization built from M @ nu cross-product
    blocks, which is skew-symmetric for any symmetric M.
    """
    m = params.mass_matrix()
    v, w = nu.linear, nu.angular
    p1 = m[:3, :3] @ v + m[:3, 3:] @ w
    p2 = m[3:, :3] @ v + m[3:, 3:] @ w
    c = np.zeros((6, 6))
    s1 = skew(p1)
    c[:3, 3:] = -s1
    c[3:, :3] = -s1
    c[3:, 3:] = -skew(p2)
    return c


def damping_wrench(params: RigidBodyParams, nu: BodyVelocity) -> Wrench:
    """Diagonal hydrodynamic damping: -(d_lin + d_quad * |nu|) * nu."""
    vec = nu.as_vector()
    force = -(params.linear_damping + params.quadratic_damping * np.abs(vec)) * vec
    return Wrench.from_vector(force)


def restoring_wrench(params: RigidBodyParams, pose: Pose) -> Wrench:
    """Net gravito-buoyant wrench acting on the body.

    The world-frame net vertical force (buoyancy - weight, z up) is
    rotated into the body frame; the moment is cob_offset x the body-frame
    buoyancy force (gravity acts at the CG, i.e. the body origin).
    """
    r_wb = rotation_matrix(pose.attitude).T  # world -> body
    net = r_wb @ np.array([0.0, 0.0, params.buoyancy - params.weight])
    buoy_body = r_wb @ np.array([0.0, 0.0, params.buoyancy])
    moment = np.cross(params.cob_offset, buoy_body)
    return Wrench(net, moment)


def actuate(setpoint: Wrench, limits: Wrench) -> Wrench:
    """Clamp a commanded wrench componentwise into +/- limits.

    Stands in for thruster allocation: the commanded body wrench is
    saturated rather than mapped to individual motors.
    """
    if np.any(limits.force <= 0) or np.any(limits.moment <= 0):
        raise ValueError("wrench limits must be positive")
    return Wrench(
        np.clip(setpoint.force, -limits.force, limits.force),
        np.clip(setpoint.moment, -limits.moment, limits.moment),
    )


def step_dynamics(
    state: VehicleState,
    tau: Wrench,
    params: RigidBodyParams,
    current: CurrentField,
    dt: float,
) -> VehicleState:
    """Advance the plant one semi-implicit Euler step of length dt.

    Velocity is updated first from the force balance, then the pose is
    integrated with the new velocity through J(eta). Damping acts on the
    velocity relative to the current field; Coriolis and restoring terms
    use the raw body velocity and attitude.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must be in (0, 0.1], got {dt}")

    m = params.mass_matrix()
    nu = state.velocity.as_vector()

    r_wb = rotation_matrix(state.pose.attitude).T
    nu_rel = nu.copy()
    nu_rel[:3] -= r_wb @ current.velocity

    damping = -(params.linear_damping + params.quadratic_damping * np.abs(nu_rel)) * nu_rel
    coriolis = coriolis_matrix(params, state.velocity) @ nu
    restoring = restoring_wrench(params, state.pose).as_vector()

    forces = tau.as_vector() + restoring + damping - coriolis
    nu_new = nu + dt * np.linalg.solve(m, forces)

    lin_speed = np.linalg.norm(nu_new[:3])
    if lin_speed > params.max_linear_speed:
        nu_new[:3] *= params.max_linear_speed / lin_speed
    ang_speed = np.linalg.norm(nu_new[3:])
    if ang_speed > params.max_angular_speed:
        nu_new[3:] *= params.max_angular_speed / ang_speed

    velocity_new = BodyVelocity(nu_new[:3], nu_new[3:])
    eta_dot = transform_matrix(state.pose) @ nu_new
    position_new = state.pose.position + dt * eta_dot[:3]
    attitude_new = wrap_angle(state.pose.attitude + dt * eta_dot[3:])

    out = np.concatenate([position_new, attitude_new, nu_new])
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError("dynamics step produced a non-finite state")

    return VehicleState(Pose(position_new, attitude_new), velocity_new)


def kinetic_energy(params: RigidBodyParams, nu: BodyVelocity) -> float:
    """0.5 * nu^T M nu with the total (rigid + added) mass matrix."""
    vec = nu.as_vector()
    return 0.5 * float(vec @ params.mass_matrix() @ vec)
