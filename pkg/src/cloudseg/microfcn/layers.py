"""Layers with hand-written forward and backward passes on ``(B, C, H, W)`` arrays.

Each layer caches what its backward pass needs during ``forward``; calling
``backward`` before ``forward`` raises ``RuntimeError``. Parameter gradients
are written to ``layer.grads`` under the same keys as ``layer.params``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..raster.tiling import interp_matrix


class Layer:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{type(self).__name__}.backward called without a cached forward pass")
        return self._cache

    def clear(self):
        self._cache = None


def xavier_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    cout, cin, kh, kw = shape
    limit = np.sqrt(6.0 / ((cin + cout) * kh * kw))
    return rng.uniform(-limit, limit, size=shape)


class Conv2D(Layer):
    """Stride-1 convolution with zero 'same' padding; kernel size 1 or odd."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator | None = None):
        super().__init__()
        if kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        self.kernel = kernel
        shape = (out_channels, in_channels, kernel, kernel)
        self.params["W"] = xavier_uniform(rng, shape) if rng is not None else np.zeros(shape)
        self.params["b"] = np.zeros(out_channels)

    def forward(self, x):
        W, b = self.params["W"], self.params["b"]
        if self.kernel == 1:
            out = np.einsum("oc,bchw->bohw", W[:, :, 0, 0], x, optimize=True)
            self._cache = x
            return out + b[None, :, None, None]
        cols = self._windows(x)
        self._cache = cols
        return np.einsum("bchwij,ocij->bohw", cols, W, optimize=True) + b[None, :, None, None]

    def backward(self, dout):
        W = self.params["W"]
        cached = self._cached()
        self.grads["b"] = dout.sum(axis=(0, 2, 3))
        if self.kernel == 1:
            self.grads["W"] = np.einsum("bohw,bchw->oc", dout, cached, optimize=True)[:, :, None, None]
            return np.einsum("oc,bohw->bchw", W[:, :, 0, 0], dout, optimize=True)
        self.grads["W"] = np.einsum("bohw,bchwij->ocij", dout, cached, optimize=True)
        # input gradient is the same-padded convolution of dout with the flipped kernel
        return np.einsum("bohwij,ocij->bchw", self._windows(dout), W[:, :, ::-1, ::-1], optimize=True)

    def _windows(self, x):
        p = self.kernel // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        return sliding_window_view(xp, (self.kernel, self.kernel), axis=(2, 3))


class ReLU(Layer):
    def forward(self, x):
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, dout):
        return np.where(self._cached(), dout, 0.0)


class MaxPool2(Layer):
    """2x2 max pooling with stride 2; gradient goes to the first maximum."""

    def forward(self, x):
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"max-pool needs even spatial dims, got {h}x{w}")
        blocks = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
        idx = np.argmax(blocks, axis=-1)
        self._cache = (idx, x.shape)
        return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        idx, (b, c, h, w) = self._cached()
        blocks = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(blocks, idx[..., None], dout[..., None], axis=-1)
        return blocks.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)


class Upsample(Layer):
    """Corner-aligned bilinear resize to the size given at call time."""

    def forward(self, x, out_h: int, out_w: int):
        h, w = x.shape[2:]
        rows = interp_matrix(h, out_h)
        cols = interp_matrix(w, out_w)
        self._cache = (rows, cols)
        return np.einsum("ih,bchw,jw->bcij", rows, x, cols, optimize=True)

    def backward(self, dout):
        rows, cols = self._cached()
        return np.einsum("ih,bcij,jw->bchw", rows, dout, cols, optimize=True)


class Sigmoid(Layer):
    def forward(self, x):
        out = 0.5 * (1.0 + np.tanh(0.5 * x))
        self._cache = out
        return out

    def backward(self, dout):
        y = self._cached()
        return dout * y * (1.0 - y)


class Softmax(Layer):
    """Softmax over the channel axis."""

    def forward(self, x):
        e = np.exp(x - x.max(axis=1, keepdims=True))
        out = e / e.sum(axis=1, keepdims=True)
        self._cache = out
        return out

    def backward(self, dout):
        y = self._cached()
        return y * (dout - np.sum(dout * y, axis=1, keepdims=True))
