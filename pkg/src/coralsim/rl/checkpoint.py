"""Model checkpoints: a versioned npz container of weights and metadata.

Layout: a JSON metadata entry (format version, algorithm, network config,
normalizer state, step counters, optimizer/rng state for resume) plus one
flat float64 array per network. Loading rebuilds policies that produce
bit-identical actions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import nn
from .buffers import RunningMeanStd
from .networks import NetworkConfig, PolicyNetwork

FORMAT_VERSION = 1
ACTION_DIM = 3


class CheckpointError(ValueError):
    """Unreadable or incompatible checkpoint."""


def _net_config_dict(cfg: NetworkConfig) -> dict:
    return {
        "image_shape": list(cfg.image_shape) if cfg.image_shape else None,
        "vector_dim": cfg.vector_dim,
        "conv_layers": [list(layer) for layer in cfg.conv_layers],
        "dense_layers": list(cfg.dense_layers),
    }


def _net_config_from_dict(d: dict) -> NetworkConfig:
    return NetworkConfig(
        image_shape=tuple(d["image_shape"]) if d["image_shape"] else None,
        vector_dim=int(d["vector_dim"]),
        conv_layers=tuple(tuple(layer) for layer in d["conv_layers"]),
        dense_layers=tuple(d["dense_layers"]),
    )


def save_checkpoint(path, algorithm: str, net_config: NetworkConfig,
                    nets: dict[str, list[nn.Param]],
                    normalizer: RunningMeanStd,
                    env_step: int, episode: int,
                    extras: dict | None = None,
                    arrays: dict[str, np.ndarray] | None = None) -> None:
    """Write all named parameter lists plus metadata to an npz file."""
    meta = {
        "format_version": FORMAT_VERSION,
        "algorithm": algorithm,
        "network": _net_config_dict(net_config),
        "env_step": int(env_step),
        "episode": int(episode),
        "extras": extras or {},
    }
    payload = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for name, params in nets.items():
        payload[f"net_{name}"] = nn.get_flat(params)
    payload["norm_mean"] = normalizer.mean
    payload["norm_var"] = normalizer.var
    payload["norm_count"] = np.array([normalizer.count])
    for name, arr in (arrays or {}).items():
        payload[f"arr_{name}"] = np.asarray(arr)
    with open(path, "wb") as f:
        np.savez(f, **payload)


@dataclass
class Checkpoint:
    algorithm: str
    net_config: NetworkConfig
    env_step: int
    episode: int
    extras: dict
    nets: dict[str, np.ndarray]
    normalizer: RunningMeanStd
    arrays: dict[str, np.ndarray]

    def build_policy(self) -> PolicyNetwork:
        """Reconstruct the (first) policy with stored weights."""
        name = "policy" if "policy" in self.nets else "policy_0"
        if name not in self.nets:
            raise CheckpointError("checkpoint holds no policy parameters")
        return self.build_named_policy(name)

    def build_named_policy(self, name: str) -> PolicyNetwork:
        policy = PolicyNetwork(self.net_config, ACTION_DIM, np.random.default_rng(0))
        flat = self.nets[name]
        params = policy.params()
        expected = sum(p.value.size for p in params)
        if flat.size != expected:
            raise CheckpointError(
                f"stored {name!r} has {flat.size} weights, network wants {expected}")
        nn.set_flat(params, flat)
        return policy


def load_checkpoint(path) -> Checkpoint:
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format_version") != FORMAT_VERSION:
                raise CheckpointError(
                    f"unsupported checkpoint version {meta.get('format_version')}")
            nets = {k[4:]: data[k] for k in data.files if k.startswith("net_")}
            arrays = {k[4:]: data[k] for k in data.files if k.startswith("arr_")}
            normalizer = RunningMeanStd(len(data["norm_mean"]))
            normalizer.load_state({"mean": data["norm_mean"],
                                   "var": data["norm_var"],
                                   "count": float(data["norm_count"][0])})
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return Checkpoint(
        algorithm=meta["algorithm"],
        net_config=_net_config_from_dict(meta["network"]),
        env_step=meta["env_step"],
        episode=meta["episode"],
        extras=meta["extras"],
        nets=nets,
        normalizer=normalizer,
        arrays=arrays,
    )
