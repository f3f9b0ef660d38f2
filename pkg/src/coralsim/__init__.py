"""coralsim: a desk-scale underwater coral-collection RL stack.

Library layout:
  dynamics   rigid-body vehicle plant (pure functions)
  control    inner-loop PID stack (roll/pitch/altitude/velocity)
  world      terrain, object placement, contact detection
  env        the MDP step loop and CoralEnv wrapper
  sensors    INS / range / altimeter models and the raycast camera
  reward     the contact-event reward state machine
  nn         numpy layers with hand-rolled backprop and Adam
  rl         PPO / SAC / IPPO training on top of nn
  hil        datagram protocol, mock plant, inference client
  harness    experiment orchestration, trend fits, trajectory evaluation
"""

from .config import VehicleConfig, default_vehicle_config, load_vehicle_config
from .control import ActionCommand, PidGains, PidState
from .dynamics import (BodyVelocity, CurrentField, Pose, RigidBodyParams,
                       VehicleState, Wrench)
from .env import CoralEnv, env_step
from .reward import ContactEvent, EventKind, Mode, RewardMachine, reward_step
from .sensors import CameraConfig, Observation, SensorConfig
from .world import (Bathymetry, BucketInstance, CoralInstance, EpisodeState,
                    WorldConfig, generate_world, query_depth)

__version__ = "0.1.0"

__all__ = [
    "ActionCommand", "Bathymetry", "BodyVelocity", "BucketInstance",
    "CameraConfig", "ContactEvent", "CoralEnv", "CoralInstance",
    "CurrentField", "EpisodeState", "EventKind", "Mode", "Observation",
    "PidGains", "PidState", "Pose", "RewardMachine", "RigidBodyParams",
    "SensorConfig", "VehicleConfig", "VehicleState", "WorldConfig", "Wrench",
    "default_vehicle_config", "env_step", "generate_world",
    "load_vehicle_config", "query_depth", "reward_step",
]
