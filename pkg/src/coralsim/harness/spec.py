"""Experiment specification: one YAML file describing a whole trial.

Sections: world, sensors, train, network, eval, plus a vehicle reference
(either a filesystem path or "packaged:<name>" for a config shipped with
the library). Canonical trial files live in the packaged configs/
directory: desk_* for the scaled-down profiles, full_* for the
8-million-step budget.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from ..config import (ConfigError, VehicleConfig, load_vehicle_config,
                      packaged_config_path, vehicle_config_to_dict)
from ..rl.networks import NetworkConfig
from ..rl.train_config import TrainConfig
from ..sensors import CameraConfig, SensorConfig
from ..world import WorldConfig


def world_config_to_dict(cfg: WorldConfig) -> dict:
    d = asdict(cfg)
    d["extent"] = list(cfg.extent)
    d["current"] = list(cfg.current)
    return d


def world_config_from_dict(d: dict) -> WorldConfig:
    d = dict(d)
    if "extent" in d:
        d["extent"] = tuple(d["extent"])
    if "current" in d:
        d["current"] = tuple(d["current"])
    return WorldConfig(**d)


def sensor_config_to_dict(cfg: SensorConfig) -> dict:
    d = asdict(cfg)
    d["camera"] = asdict(cfg.camera)
    return d


def sensor_config_from_dict(d: dict) -> SensorConfig:
    d = dict(d)
    if "camera" in d:
        d["camera"] = CameraConfig(**d["camera"])
    return SensorConfig(**d)


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def train_config_from_dict(d: dict) -> TrainConfig:
    return TrainConfig(**d)


def network_config_to_dict(cfg: NetworkConfig) -> dict:
    return {
        "image_shape": list(cfg.image_shape) if cfg.image_shape else None,
        "vector_dim": cfg.vector_dim,
        "conv_layers": [list(l) for l in cfg.conv_layers],
        "dense_layers": list(cfg.dense_layers),
    }


def network_config_from_dict(d: dict) -> NetworkConfig:
    return NetworkConfig(
        image_shape=tuple(d["image_shape"]) if d.get("image_shape") else None,
        vector_dim=int(d.get("vector_dim", 4)),
        conv_layers=tuple(tuple(l) for l in d.get("conv_layers", ((16, 3, 2), (32, 3, 2)))),
        dense_layers=tuple(d.get("dense_layers", (128, 128))),
    )


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    world: WorldConfig
    sensors: SensorConfig
    vehicle: VehicleConfig
    train: TrainConfig
    network: NetworkConfig
    output_dir: str
    vehicle_ref: str = "packaged:vehicle"
    eval_episodes: int = 10
    eval_seed: int = 100_000
    checkpoint_every: int = 50_000

    def with_output_dir(self, output_dir) -> "ExperimentSpec":
        return replace(self, output_dir=str(output_dir))


def _resolve_vehicle(ref: str, base_dir: Path) -> VehicleConfig:
    if ref.startswith("packaged:"):
        return load_vehicle_config(packaged_config_path(ref.split(":", 1)[1]))
    path = Path(ref)
    if not path.is_absolute():
        path = base_dir / path
    return load_vehicle_config(path)


def experiment_spec_from_dict(doc: dict, base_dir: Path = Path(".")) -> ExperimentSpec:
    try:
        vehicle_ref = doc.get("vehicle", "packaged:vehicle")
        network = doc.get("network", {})
        # The camera defines the image shape unless the network overrides it
        # (or disables the image branch with image_shape: null).
        sensors = sensor_config_from_dict(doc.get("sensors", {}))
        if "image_shape" not in network:
            network = dict(network)
            network["image_shape"] = [sensors.camera.height, sensors.camera.width, 3]
        return ExperimentSpec(
            name=str(doc["name"]),
            world=world_config_from_dict(doc.get("world", {})),
            sensors=sensors,
            vehicle=_resolve_vehicle(vehicle_ref, base_dir),
            train=train_config_from_dict(doc.get("train", {})),
            network=network_config_from_dict(network),
            output_dir=str(doc.get("output_dir", "runs/" + str(doc["name"]))),
            vehicle_ref=vehicle_ref,
            eval_episodes=int(doc.get("eval", {}).get("episodes", 10)),
            eval_seed=int(doc.get("eval", {}).get("seed", 100_000)),
            checkpoint_every=int(doc.get("checkpoint_every", 50_000)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment spec: {exc}") from exc


def experiment_spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "name": spec.name,
        "world": world_config_to_dict(spec.world),
        "sensors": sensor_config_to_dict(spec.sensors),
        "vehicle": spec.vehicle_ref,
        "train": train_config_to_dict(spec.train),
        "network": network_config_to_dict(spec.network),
        "output_dir": spec.output_dir,
        "eval": {"episodes": spec.eval_episodes, "seed": spec.eval_seed},
        "checkpoint_every": spec.checkpoint_every,
    }


def load_experiment_spec(path) -> ExperimentSpec:
    path = Path(path)
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} is not a mapping")
    return experiment_spec_from_dict(doc, base_dir=path.parent)


def save_experiment_spec(spec: ExperimentSpec, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(experiment_spec_to_dict(spec), f, sort_keys=False)


def checkpoint_extras(spec: ExperimentSpec) -> dict:
    """Everything the HIL twin and evaluator need to rebuild the env."""
    return {
        "world_config": world_config_to_dict(spec.world),
        "sensor_config": sensor_config_to_dict(spec.sensors),
        "vehicle_config": vehicle_config_to_dict(spec.vehicle),
        "trial": spec.name,
    }
