"""
Layers of the from-scratch CNN engine.

All layers work on batches: images are ``(B, C, H, W)`` arrays, feature vectors are
``(B, N)`` arrays. A layer's `forward` caches what its `backward` needs; `backward`
receives the gradient with respect to the layer's output, stores the gradients of the
layer's parameters in ``grads`` and returns the gradient with respect to its input.

The gates of the piecewise-linear layers (the ReLU masks and the pooling argmaxes) can
be *frozen*: a forward pass with ``frozen=True`` reuses the gates of the last regular
pass instead of recomputing them and leaves all caches untouched. This is what the
gradient check uses to difference the same linear piece of the network that
back-propagation differentiates. Frozen passes count the gates that *would* have
flipped in ``kink_crossings``.
"""
from __future__ import annotations

from typing import Dict, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import BoundsError, ModelStateError


def glorot_uniform(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    fan_in: int,
    fan_out: int,
    dtype: np.dtype,
) -> np.ndarray:
    """Draw weights uniformly from ``[-a, a]`` with ``a = sqrt(6 / (fan_in + fan_out))``."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class of all layers. Parameter-free layers keep ``params`` empty."""
    kind: str = "layer"

    def __init__(self, name: str):
        self.name = name
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.kink_crossings = 0
        self._cache = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"

    def _cached(self):
        if self._cache is None:
            raise ModelStateError(f"Layer {self.name} has no forward pass to go back on")
        return self._cache

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Shape of one output sample for one input sample of ``input_shape``."""
        return input_shape

    def forward(self, x: np.ndarray, frozen: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())


class Conv3x3(Layer):
    """3x3 convolution, stride 1, zero padding 1 ("same"), no bias.

    The weight has shape ``(out_channels, in_channels, 3, 3)``.
    """
    kind = "conv3x3"

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ):
        super().__init__(name)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.params["weight"] = glorot_uniform(
            rng,
            (out_channels, in_channels, 3, 3),
            fan_in=in_channels * 9,
            fan_out=out_channels * 9,
            dtype=dtype,
        )

    def output_shape(self, input_shape):
        _, height, width = input_shape
        return (self.out_channels, height, width)

    @staticmethod
    def _windows(x: np.ndarray) -> np.ndarray:
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        return sliding_window_view(padded, (3, 3), axis=(2, 3))

    def forward(self, x, frozen=False):
        windows = self._windows(x)
        if not frozen:
            self._cache = windows
        return np.einsum("bchwij,ocij->bohw", windows, self.params["weight"], optimize=True)

    def backward(self, grad):
        windows = self._cached()
        weight = self.params["weight"]
        self.grads["weight"] = np.einsum("bchwij,bohw->ocij", windows, grad, optimize=True)
        grad_windows = self._windows(grad)
        return np.einsum(
            "bohwij,ocij->bchw", grad_windows, weight[:, :, ::-1, ::-1], optimize=True,
        )


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, frozen=False):
        if frozen:
            mask = self._cached()
            self.kink_crossings += int(np.count_nonzero(((x > 0) != mask) & (x != 0)))
            return np.where(mask, x, 0)
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, 0)

    def backward(self, grad):
        return np.where(self._cached(), grad, 0)


class MaxPool2x2(Layer):
    """2x2 max pooling with stride 2 in ceil mode.

    An odd extent gets a partial window at its end that takes the maximum of its
    available elements, so the output extent is ``ceil(n / 2)``. The gradient is
    routed to the window's maximum, the first one in row-major order on ties.
    """
    kind = "maxpool2x2_ceil"

    def output_shape(self, input_shape):
        channels, height, width = input_shape
        return (channels, -(-height // 2), -(-width // 2))

    @staticmethod
    def _windows(x: np.ndarray) -> np.ndarray:
        batch, channels, height, width = x.shape
        out_h, out_w = -(-height // 2), -(-width // 2)
        padded = np.pad(
            x,
            ((0, 0), (0, 0), (0, 2 * out_h - height), (0, 2 * out_w - width)),
            constant_values=-np.inf,
        )
        blocks = padded.reshape(batch, channels, out_h, 2, out_w, 2)
        return blocks.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, out_h, out_w, 4)

    def forward(self, x, frozen=False):
        windows = self._windows(x)
        if frozen:
            argmax, _ = self._cached()
            picked = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
            self.kink_crossings += int(np.count_nonzero(picked < windows.max(axis=-1)))
            return picked
        argmax = np.argmax(windows, axis=-1)
        self._cache = (argmax, x.shape)
        return np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        argmax, (batch, channels, height, width) = self._cached()
        out_h, out_w = argmax.shape[2:]
        routed = np.zeros((*argmax.shape, 4), dtype=grad.dtype)
        np.put_along_axis(routed, argmax[..., None], grad[..., None], axis=-1)
        blocks = routed.reshape(batch, channels, out_h, out_w, 2, 2).transpose(
            0, 1, 2, 4, 3, 5
        )
        full = blocks.reshape(batch, channels, 2 * out_h, 2 * out_w)
        return full[:, :, :height, :width]


class Flatten(Layer):
    """Flatten ``(B, C, H, W)`` to ``(B, C * H * W)`` in channel-major order."""
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, frozen=False):
        if not frozen:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cached())


class Dense(Layer):
    """Fully connected layer without bias, weight of shape ``(out_features, in_features)``."""
    kind = "dense"

    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float64,
    ):
        super().__init__(name)
        self.in_features, self.out_features = in_features, out_features
        self.params["weight"] = glorot_uniform(
            rng,
            (out_features, in_features),
            fan_in=in_features,
            fan_out=out_features,
            dtype=dtype,
        )

    def output_shape(self, input_shape):
        return (self.out_features,)

    def forward(self, x, frozen=False):
        if not frozen:
            self._cache = x
        return x @ self.params["weight"].T

    def backward(self, grad):
        x = self._cached()
        self.grads["weight"] = grad.T @ x
        return grad @ self.params["weight"]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def loss_softmax_ce(
    logits: np.ndarray,
    labels: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """Softmax cross-entropy averaged over the batch, and its gradient w.r.t. ``logits``.

    The loss uses the log-sum-exp of the max-shifted logits, so large logits do not
    overflow. The gradient is ``(softmax(logits) - one_hot(labels)) / B``.

    Raises:
        BoundsError: if a label is not a valid class index.
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels))
    batch, n_classes = logits.shape
    if labels.shape != (batch,):
        raise BoundsError(f"Expected {batch} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer) or np.any((labels < 0) | (labels >= n_classes)):
        raise BoundsError(f"Labels must be class indices in [0, {n_classes}), got {labels}")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = float(np.mean(log_norm - shifted[rows, labels]))

    grad = softmax(logits)
    grad[rows, labels] -= 1.0
    return loss, grad / batch

