"""Actor and critic networks over the multi-modal observation.

A small CNN encodes the camera image; its flattened features are
concatenated with the observation vector at the base of an MLP, so image
and vector channels are weighed independently. Actor and critic use the
same architecture but separate parameters (no shared encoder). Q networks
additionally take the action, appended to the vector input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn


@dataclass(frozen=True)
class NetworkConfig:
    image_shape: tuple[int, int, int] | None  # (H, W, C); None = vector-only
    vector_dim: int = 4
    conv_layers: tuple[tuple[int, int, int], ...] = ((16, 3, 2), (32, 3, 2))  # (out_ch, k, stride)
    dense_layers: tuple[int, ...] = (128, 128)

    def conv_output_dim(self) -> int:
        if self.image_shape is None:
            return 0
        h, w, _ = self.image_shape
        ch = self.image_shape[2]
        for out_ch, k, s in self.conv_layers:
            h = (h - k) // s + 1
            w = (w - k) // s + 1
            if h < 1 or w < 1:
                raise nn.ShapeMismatchError("conv stack shrinks the image below 1x1")
            ch = out_ch
        return h * w * ch


class MultiModalEncoder:
    """conv+relu stack -> flatten -> concat vector -> dense+relu stack."""

    def __init__(self, config: NetworkConfig, rng: np.random.Generator,
                 extra_vector_dim: int = 0):
        self.config = config
        self.extra_vector_dim = extra_vector_dim
        self.conv: list = []
        in_ch = config.image_shape[2] if config.image_shape else 0
        if config.image_shape is not None:
            for li, (out_ch, k, s) in enumerate(config.conv_layers):
                self.conv.append(nn.Conv2d(in_ch, out_ch, k, s, rng,
                                           compute_input_grad=li > 0))
                self.conv.append(nn.Relu())
                in_ch = out_ch
        feat = config.conv_output_dim() + config.vector_dim + extra_vector_dim
        self.dense: list = []
        for width in config.dense_layers:
            self.dense.append(nn.Dense(feat, width, rng, gain=np.sqrt(2)))
            self.dense.append(nn.Relu())
            feat = width
        self.out_dim = feat
        self._split = config.conv_output_dim()
        self._img_batch_shape = None

    def params(self) -> list[nn.Param]:
        return nn.collect_params(self.conv) + nn.collect_params(self.dense)

    def forward(self, images: np.ndarray | None, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2:
            raise nn.ShapeMismatchError(f"vectors must be (B, V), got {vectors.shape}")
        if self.config.image_shape is not None:
            if images is None:
                raise nn.ShapeMismatchError("network expects images")
            x = np.asarray(images, dtype=float)
            if x.shape[1:] != self.config.image_shape:
                raise nn.ShapeMismatchError(
                    f"images must be (B, {self.config.image_shape}), got {x.shape}")
            self._img_batch_shape = x.shape
            for layer in self.conv:
                x = layer.forward(x)
            flat = x.reshape(x.shape[0], -1)
            h = np.concatenate([flat, vectors], axis=1)
        else:
            h = vectors
        for layer in self.dense:
            h = layer.forward(h)
        return h

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Back-propagate; returns the gradient w.r.t. the vector input."""
        for layer in reversed(self.dense):
            grad = layer.backward(grad)
        if self.config.image_shape is None:
            return grad
        g_flat = grad[:, :self._split]
        b = self._img_batch_shape[0]
        h, w, _ = self.config.image_shape
        ch = self.config.image_shape[2]
        for out_ch, k, s in self.config.conv_layers:
            h = (h - k) // s + 1
            w = (w - k) // s + 1
            ch = out_ch
        g = g_flat.reshape(b, h, w, ch)
        for layer in reversed(self.conv):
            g = layer.backward(g)
        return grad[:, self._split:]


class PolicyNetwork:
    """Gaussian policy: per-action mean head plus a learned log-std vector."""

    LOG_STD_MIN = -4.0
    LOG_STD_MAX = 1.5

    def __init__(self, config: NetworkConfig, action_dim: int, rng: np.random.Generator,
                 log_std_init: float = -0.5):
        self.config = config
        self.action_dim = action_dim
        self.encoder = MultiModalEncoder(config, rng)
        self.mean_head = nn.Dense(self.encoder.out_dim, action_dim, rng, gain=0.01)
        self.log_std = nn.Param(np.full(action_dim, log_std_init))

    def params(self) -> list[nn.Param]:
        return self.encoder.params() + self.mean_head.params() + [self.log_std]

    def forward(self, images, vectors) -> tuple[np.ndarray, np.ndarray]:
        """Returns (mean (B, A), log_std (A,))."""
        feat = self.encoder.forward(images, vectors)
        return self.mean_head.forward(feat), self.log_std.value.copy()

    def backward(self, d_mean: np.ndarray, d_log_std: np.ndarray | None = None) -> None:
        if d_log_std is not None:
            self.log_std.grad += d_log_std
        self.encoder.backward(self.mean_head.backward(d_mean))

    def clamp_log_std(self) -> None:
        np.clip(self.log_std.value, self.LOG_STD_MIN, self.LOG_STD_MAX,
                out=self.log_std.value)


class ValueNetwork:
    """State-value critic; scalar output per observation."""

    def __init__(self, config: NetworkConfig, rng: np.random.Generator):
        self.config = config
        self.encoder = MultiModalEncoder(config, rng)
        self.head = nn.Dense(self.encoder.out_dim, 1, rng, gain=1.0)

    def params(self) -> list[nn.Param]:
        return self.encoder.params() + self.head.params()

    def forward(self, images, vectors) -> np.ndarray:
        return self.head.forward(self.encoder.forward(images, vectors))[:, 0]

    def backward(self, d_value: np.ndarray) -> None:
        self.encoder.backward(self.head.backward(d_value[:, None]))


class QNetwork:
    """Action-value critic: the action rides along with the vector input."""

    def __init__(self, config: NetworkConfig, action_dim: int, rng: np.random.Generator):
        self.config = config
        self.action_dim = action_dim
        self.encoder = MultiModalEncoder(config, rng, extra_vector_dim=action_dim)
        self.head = nn.Dense(self.encoder.out_dim, 1, rng, gain=1.0)

    def params(self) -> list[nn.Param]:
        return self.encoder.params() + self.head.params()

    def forward(self, images, vectors, actions) -> np.ndarray:
        joint = np.concatenate([vectors, np.asarray(actions, dtype=float)], axis=1)
        return self.head.forward(self.encoder.forward(images, joint))[:, 0]

    def backward(self, d_q: np.ndarray) -> np.ndarray:
        """Returns the gradient w.r.t. the action input (B, A)."""
        g_vec = self.encoder.backward(self.head.backward(d_q[:, None]))
        return g_vec[:, -self.action_dim:]


def copy_params(src, dst) -> None:
    for a, b in zip(src.params(), dst.params()):
        b.value[...] = a.value


def polyak_update(online, target, tau: float) -> None:
    for a, b in zip(online.params(), target.params()):
        b.value[...] = (1 - tau) * b.value + tau * a.value
