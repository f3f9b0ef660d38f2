"""Minimal neural-network layers with hand-rolled backpropagation.

The layer vocabulary is deliberately small: conv2d (NHWC, valid padding),
dense, relu and tanh, plus an Adam optimizer and flat-parameter helpers.
Keeping backprop in-repo makes the finite-difference gradient checks in
the test suite meaningful end to end. Everything runs in float64.

Layers cache what their backward pass needs; forward then backward must be
called in matching pairs. Parameter gradients accumulate until zeroed.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


class ShapeMismatchError(ValueError):
    """Input shape incompatible with the layer or network."""


class Param:
    """A learnable array and its gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.zeros_like(self.value)


def orthogonal_init(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal matrix scaled by gain (rows x cols)."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix sign ambiguity
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, gain: float = np.sqrt(2)):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = Param(orthogonal_init((in_dim, out_dim), gain, rng))
        self.b = Param(np.zeros(out_dim))
        self._x = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(f"dense expected (B, {self.in_dim}), got {x.shape}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.w.grad += self._x.T @ grad
        self.b.grad += grad.sum(axis=0)
        return grad @ self.w.value.T


class Conv2d:
    """Valid-padding strided convolution on NHWC arrays.

    compute_input_grad=False skips the (expensive) scatter back to the
    input image; only legal for the first layer of a stack.
    """

    def __init__(self, in_ch: int, out_ch: int, ksize: int, stride: int,
                 rng: np.random.Generator, compute_input_grad: bool = True):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.ksize = ksize
        self.stride = stride
        self.compute_input_grad = compute_input_grad
        fan_in = ksize * ksize * in_ch
        bound = 1.0 / np.sqrt(fan_in)
        self.w = Param(rng.uniform(-bound, bound, size=(ksize, ksize, in_ch, out_ch)))
        self.b = Param(np.zeros(out_ch))
        self._cols = None
        self._xshape = None

    def params(self):
        return [self.w, self.b]

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        k, s = self.ksize, self.stride
        if h < k or w < k:
            raise ShapeMismatchError(f"conv kernel {k} larger than input {h}x{w}")
        return (h - k) // s + 1, (w - k) // s + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.in_ch:
            raise ShapeMismatchError(f"conv expected (B, H, W, {self.in_ch}), got {x.shape}")
        b, h, w, c = x.shape
        oh, ow = self.out_hw(h, w)
        k, s = self.ksize, self.stride
        sb, sh, sw, sc = x.strides
        windows = as_strided(x, (b, oh, ow, k, k, c), (sb, sh * s, sw * s, sh, sw, sc))
        cols = windows.reshape(b * oh * ow, k * k * c)
        self._cols = cols
        self._xshape = x.shape
        out = cols @ self.w.value.reshape(k * k * c, self.out_ch) + self.b.value
        return out.reshape(b, oh, ow, self.out_ch)

    def backward(self, grad: np.ndarray) -> np.ndarray | None:
        b, h, w, c = self._xshape
        oh, ow = self.out_hw(h, w)
        k, s = self.ksize, self.stride
        gcols = grad.reshape(b * oh * ow, self.out_ch)
        self.w.grad += (self._cols.T @ gcols).reshape(self.w.value.shape)
        self.b.grad += gcols.sum(axis=0)
        if not self.compute_input_grad:
            return None
        dcols = (gcols @ self.w.value.reshape(k * k * c, self.out_ch).T)
        dcols = dcols.reshape(b, oh, ow, k, k, c)
        dx = np.zeros(self._xshape)
        for i in range(k):
            for j in range(k):
                dx[:, i:i + oh * s:s, j:j + ow * s:s, :] += dcols[:, :, :, i, j, :]
        return dx


class Relu:
    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad, 0.0)


class Tanh:
    def __init__(self):
        self._y = None

    def params(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = np.tanh(x)
        return self._y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * (1.0 - self._y * self._y)


def collect_params(layers) -> list[Param]:
    out = []
    for layer in layers:
        out.extend(layer.params())
    return out


def zero_grads(params: list[Param]) -> None:
    for p in params:
        p.grad[...] = 0.0


def get_flat(params: list[Param]) -> np.ndarray:
    return np.concatenate([p.value.ravel() for p in params])


def set_flat(params: list[Param], flat: np.ndarray) -> None:
    expected = sum(p.value.size for p in params)
    if flat.size != expected:
        raise ShapeMismatchError(f"flat vector size {flat.size}, expected {expected}")
    offset = 0
    for p in params:
        n = p.value.size
        p.value[...] = flat[offset:offset + n].reshape(p.value.shape)
        offset += n


def get_flat_grad(params: list[Param]) -> np.ndarray:
    return np.concatenate([p.grad.ravel() for p in params])


def clip_grad_norm(params: list[Param], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for p in params:
            p.grad *= scale
    return total


class Adam:
    def __init__(self, params: list[Param], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m[...] = self.beta1 * m + (1 - self.beta1) * p.grad
            v[...] = self.beta2 * v + (1 - self.beta2) * p.grad * p.grad
            p.value -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state(self) -> dict:
        return {"t": self.t,
                "m": [m.copy() for m in self.m],
                "v": [v.copy() for v in self.v]}

    def load_state(self, state: dict) -> None:
        self.t = int(state["t"])
        for m, src in zip(self.m, state["m"]):
            m[...] = src
        for v, src in zip(self.v, state["v"]):
            v[...] = src
