import dataclasses

import numpy as np
import pytest

import coralsim as cs
from coralsim.rl import NetworkConfig


@pytest.fixture(scope="session")
def vehicle():
    return cs.default_vehicle_config()


@pytest.fixture(scope="session")
def params(vehicle):
    return vehicle.params


@pytest.fixture()
def world_config():
    return cs.WorldConfig(seed=7, max_episode_steps=200)


@pytest.fixture()
def sensor_config():
    return cs.SensorConfig(camera=cs.CameraConfig(width=16, height=16))


@pytest.fixture()
def quiet_sensors():
    """Zero-noise sensors with a small camera."""
    return cs.SensorConfig(
        ins_velocity_noise_std=0.0, ins_yawrate_noise_std=0.0,
        range_noise_std=0.0, altimeter_noise_std=0.0, depth_noise_std=0.0,
        camera=cs.CameraConfig(width=16, height=16))


@pytest.fixture()
def env(world_config, vehicle, sensor_config):
    return cs.CoralEnv(world_config, vehicle, sensor_config)


TINY_NET = NetworkConfig(image_shape=(8, 8, 3), vector_dim=4,
                         conv_layers=((2, 3, 2),), dense_layers=(8,))
VEC_NET = NetworkConfig(image_shape=None, vector_dim=4, conv_layers=(),
                        dense_layers=(16, 16))


@pytest.fixture()
def tiny_net_config():
    return TINY_NET


@pytest.fixture()
def vec_net_config():
    return VEC_NET


def random_params(rng) -> cs.RigidBodyParams:
    """Physically sane random rigid-body parameters."""
    inertia_diag = rng.uniform(0.05, 0.5, 3)
    added = np.diag(rng.uniform(0.05, 15.0, 6))
    return cs.RigidBodyParams(
        mass=rng.uniform(5.0, 20.0),
        inertia=np.diag(inertia_diag),
        added_mass=added,
        linear_damping=rng.uniform(0.05, 8.0, 6),
        quadratic_damping=rng.uniform(0.5, 40.0, 6),
        weight=110.0,
        buoyancy=110.0,
        cob_offset=np.zeros(3),
    )
