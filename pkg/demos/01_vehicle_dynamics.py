"""Plant-model basics: step responses of the 6-DOF vehicle.

Walks through the rigid-body model with the stock vehicle file: a surge
step to terminal velocity, free decay of a tumbling start, and the
restoring moment that rights the vehicle.
"""

import numpy as np

import coralsim as cs
from coralsim.dynamics import (BodyVelocity, CurrentField, Pose, VehicleState,
                               Wrench, kinetic_energy, step_dynamics)

vehicle = cs.default_vehicle_config()
params = vehicle.params
dt = vehicle.dt

print("== terminal velocity under constant surge force")
state = VehicleState(Pose(np.zeros(3), np.zeros(3)),
                     BodyVelocity(np.zeros(3), np.zeros(3)))
# Gentle force: at higher speeds the bare hull is pitch-unstable
# (Munk moment) and needs the PID stack from demo 02.
tau = Wrench(np.array([10.0, 0, 0]), np.zeros(3))
for k in range(int(20 / dt)):
    state = step_dynamics(state, tau, params, CurrentField.none(), dt)
    if k % int(5 / dt) == 0:
        print(f"  t={k*dt:5.1f}s  u={state.velocity.linear[0]:.3f} m/s")
d_lin, d_quad = params.linear_damping[0], params.quadratic_damping[0]
# terminal speed solves quad*u^2 + lin*u = F
u_term = (-d_lin + np.sqrt(d_lin**2 + 4 * d_quad * 10.0)) / (2 * d_quad)
print(f"  closed-form terminal speed: {u_term:.3f} m/s")

print("== free decay of a tumbling start (energy is monotone)")
state = VehicleState(Pose(np.zeros(3), np.zeros(3)),
                     BodyVelocity(np.array([0.5, -0.3, 0.2]),
                                  np.array([0.5, -0.4, 0.6])))
import dataclasses
neutral = dataclasses.replace(params, buoyancy=params.weight,
                              cob_offset=np.zeros(3))
for k in range(int(8 / dt)):
    state = step_dynamics(state, Wrench.zero(), neutral, CurrentField.none(), dt)
    if k % int(2 / dt) == 0:
        print(f"  t={k*dt:4.1f}s  kinetic energy={kinetic_energy(neutral, state.velocity):8.5f} J")

print("== buoyancy rights a rolled vehicle (no control at all)")
state = VehicleState(Pose(np.zeros(3), np.array([np.deg2rad(25), 0, 0])),
                     BodyVelocity(np.zeros(3), np.zeros(3)))
for k in range(int(12 / dt)):
    state = step_dynamics(state, Wrench.zero(), params, CurrentField.none(), dt)
    if k % int(3 / dt) == 0:
        print(f"  t={k*dt:4.1f}s  roll={np.rad2deg(state.pose.attitude[0]):+6.2f} deg")
