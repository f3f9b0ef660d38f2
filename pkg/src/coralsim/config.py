"""Configuration loading: vehicle parameter files and packaged defaults.

The vehicle file is a human-readable YAML document holding the rigid-body
parameters, actuation limits, physics timestep, inner-loop gains and speed
scaling. Canonical defaults live in the packaged configs/ directory;
nothing numeric is hard-coded in the dynamics or control code.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .control import PidGains
from .dynamics import RigidBodyParams, Wrench


class ConfigError(ValueError):
    """Malformed or incomplete configuration file."""


@dataclass(frozen=True)
class VehicleConfig:
    """Plant parameters plus everything the inner control loop needs."""

    params: RigidBodyParams
    wrench_limits: Wrench
    dt: float                       # physics step [s]
    substeps_per_tick: int          # physics steps per control tick
    max_speeds: tuple[float, float, float]  # surge, sway, yaw caps
    altitude_target: float
    gains: dict[str, PidGains]      # roll, pitch, altitude, surge, sway, yaw

    def __post_init__(self):
        if not 0 < self.dt <= 0.1:
            raise ConfigError("dt must be in (0, 0.1]")
        if self.substeps_per_tick < 1:
            raise ConfigError("substeps_per_tick must be >= 1")
        missing = {"roll", "pitch", "altitude", "surge", "sway", "yaw"} - set(self.gains)
        if missing:
            raise ConfigError(f"missing gain sections: {sorted(missing)}")

    @property
    def control_dt(self) -> float:
        return self.dt * self.substeps_per_tick


def _gains_from_dict(d: dict) -> PidGains:
    return PidGains(
        kp=float(d["kp"]), ki=float(d["ki"]), kd=float(d["kd"]),
        integral_limit=float(d["integral_limit"]),
        output_limit=float(d["output_limit"]),
    )


def vehicle_config_from_dict(doc: dict) -> VehicleConfig:
    try:
        rb = doc["rigid_body"]
        params = RigidBodyParams(
            mass=float(rb["mass"]),
            inertia=np.diag(np.asarray(rb["inertia_diagonal"], dtype=float)),
            added_mass=np.diag(np.asarray(rb["added_mass_diagonal"], dtype=float)),
            linear_damping=np.asarray(rb["linear_damping"], dtype=float),
            quadratic_damping=np.asarray(rb["quadratic_damping"], dtype=float),
            weight=float(rb["weight"]),
            buoyancy=float(rb["buoyancy"]),
            cob_offset=np.asarray(rb["cob_offset"], dtype=float),
            max_linear_speed=float(rb.get("max_linear_speed", 5.0)),
            max_angular_speed=float(rb.get("max_angular_speed", 5.0)),
        )
        limits = Wrench(
            np.asarray(doc["limits"]["force"], dtype=float),
            np.asarray(doc["limits"]["moment"], dtype=float),
        )
        gains = {name: _gains_from_dict(g) for name, g in doc["gains"].items()}
        return VehicleConfig(
            params=params,
            wrench_limits=limits,
            dt=float(doc["dt"]),
            substeps_per_tick=int(doc["substeps_per_tick"]),
            max_speeds=tuple(float(x) for x in doc["max_speeds"]),
            altitude_target=float(doc["altitude_target"]),
            gains=gains,
        )
    except KeyError as exc:
        raise ConfigError(f"missing vehicle config key: {exc}") from exc


def vehicle_config_to_dict(cfg: VehicleConfig) -> dict:
    p = cfg.params
    return {
        "rigid_body": {
            "mass": p.mass,
            "inertia_diagonal": np.diag(p.inertia).tolist(),
            "added_mass_diagonal": np.diag(p.added_mass).tolist(),
            "linear_damping": p.linear_damping.tolist(),
            "quadratic_damping": p.quadratic_damping.tolist(),
            "weight": p.weight,
            "buoyancy": p.buoyancy,
            "cob_offset": p.cob_offset.tolist(),
            "max_linear_speed": p.max_linear_speed,
            "max_angular_speed": p.max_angular_speed,
        },
        "limits": {
            "force": cfg.wrench_limits.force.tolist(),
            "moment": cfg.wrench_limits.moment.tolist(),
        },
        "dt": cfg.dt,
        "substeps_per_tick": cfg.substeps_per_tick,
        "max_speeds": list(cfg.max_speeds),
        "altitude_target": cfg.altitude_target,
        "gains": {
            name: {"kp": g.kp, "ki": g.ki, "kd": g.kd,
                   "integral_limit": g.integral_limit, "output_limit": g.output_limit}
            for name, g in cfg.gains.items()
        },
    }


def load_vehicle_config(path) -> VehicleConfig:
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} is not a mapping")
    return vehicle_config_from_dict(doc)


def save_vehicle_config(cfg: VehicleConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(vehicle_config_to_dict(cfg), f, sort_keys=False)


def packaged_config_path(name: str) -> Path:
    """Path of a config file shipped inside the package (e.g. 'vehicle')."""
    candidate = resources.files("coralsim") / "configs" / f"{name}.yaml"
    path = Path(str(candidate))
    if not path.exists():
        raise ConfigError(f"no packaged config named {name!r}")
    return path


def default_vehicle_config() -> VehicleConfig:
    """The checked-in vehicle parameter file shipped with the package."""
    return load_vehicle_config(packaged_config_path("vehicle"))
