"""
The two CNN classifiers and the functions to run them.

Both architectures take one correlation matrix as a single-channel image. All layers
are bias-free, and every convolution and the first dense layer are followed by a ReLU:

- ``net4``: conv(1→4) → pool → conv(4→8) → pool → conv(8→16) → pool → flatten →
  dense(2304→32) → head(32→2). On 90x90 inputs the spatial extent shrinks 90 → 45 →
  23 → 12 under ceil-mode pooling. The core holds 36 + 288 + 1,152 + 73,728 = 75,204
  parameters.
- ``net2``: conv(1→4) → pool → flatten → dense(8100→8) → head(8→2), with a core of
  36 + 64,800 = 64,836 parameters.

The core is the published layer stack; the ``head`` maps its output to the two class
logits and adds 64 (``net4``) or 16 (``net2``) parameters that are not counted in the
core.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError, DataError, ModelStateError
from ..loggers import LoggerMixin
from .layers import Conv3x3, Dense, Flatten, Layer, MaxPool2x2, ReLU

ARCHITECTURES = ("net2", "net4")
PRECISIONS = {"double": np.float64, "single": np.float32}
HEAD_NAME = "head"

Precision = Literal["double", "single"]


@dataclass
class AdamState:
    """First and second moment estimates per parameter and the number of steps taken."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


class Model(LoggerMixin):
    """Ordered stack of layers with its gradients and optimizer state.

    Parameters are addressed by qualified names like ``conv1.weight``. A model is
    single-writer: `forward` caches per-layer inputs that `backward` and the gradient
    check rely on.
    """

    def __init__(
        self,
        arch: str,
        layers: List[Layer],
        input_size: int,
        seed: int,
        precision: Precision = "double",
    ):
        self.arch = arch
        self.layers = layers
        self.input_size = input_size
        self.seed = seed
        self.precision = precision
        self.adam = AdamState()
        self.layer_inputs: List[np.ndarray] = []
        """Input of every layer during the last regular forward pass."""

    def __repr__(self) -> str:
        return (
            f"Model(arch={self.arch!r}, input_size={self.input_size}, "
            f"seed={self.seed}, precision={self.precision!r})"
        )

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(PRECISIONS[self.precision])

    @property
    def params(self) -> Dict[str, np.ndarray]:
        """All parameter arrays by qualified name, in layer order. Arrays are live."""
        return {
            f"{layer.name}.{key}": value
            for layer in self.layers
            for key, value in layer.params.items()
        }

    @property
    def grads(self) -> Dict[str, np.ndarray]:
        """Gradients of the last `backward`, by qualified name."""
        return {
            f"{layer.name}.{key}": value
            for layer in self.layers
            for key, value in layer.grads.items()
        }

    def layer_of(self, param_name: str) -> Tuple[int, Layer, str]:
        """Index, layer and local key of the parameter ``param_name``."""
        layer_name, _, key = param_name.partition(".")
        for index, layer in enumerate(self.layers):
            if layer.name == layer_name and key in layer.params:
                return index, layer, key
        raise ConfigurationError(f"Model {self.arch} has no parameter {param_name!r}")

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.grads.clear()

    def shape_trace(self) -> List[Tuple[int, ...]]:
        """Per-sample shape of the input and of every layer's output."""
        shapes = [(1, self.input_size, self.input_size)]
        for layer in self.layers:
            shapes.append(layer.output_shape(shapes[-1]))
        return shapes


def _layers_net4(input_size: int, rng: np.random.Generator, dtype) -> List[Layer]:
    final = input_size
    for _ in range(3):
        final = -(-final // 2)
    return [
        Conv3x3("conv1", 1, 4, rng, dtype), ReLU("relu1"), MaxPool2x2("pool1"),
        Conv3x3("conv2", 4, 8, rng, dtype), ReLU("relu2"), MaxPool2x2("pool2"),
        Conv3x3("conv3", 8, 16, rng, dtype), ReLU("relu3"), MaxPool2x2("pool3"),
        Flatten("flatten"),
        Dense("dense1", 16 * final * final, 32, rng, dtype), ReLU("relu4"),
        Dense(HEAD_NAME, 32, 2, rng, dtype),
    ]


def _layers_net2(input_size: int, rng: np.random.Generator, dtype) -> List[Layer]:
    final = -(-input_size // 2)
    return [
        Conv3x3("conv1", 1, 4, rng, dtype), ReLU("relu1"), MaxPool2x2("pool1"),
        Flatten("flatten"),
        Dense("dense1", 4 * final * final, 8, rng, dtype), ReLU("relu2"),
        Dense(HEAD_NAME, 8, 2, rng, dtype),
    ]


def build_model(
    arch: str,
    seed: int = 0,
    precision: Precision = "double",
    input_size: int = 90,
) -> Model:
    """Build and initialize the architecture ``arch`` (``"net2"`` or ``"net4"``).

    Weights are drawn layer by layer from ``numpy.random.default_rng(seed)``, so the
    same seed always yields the same model.
    """
    if arch not in ARCHITECTURES:
        raise ConfigurationError(f"Unknown architecture {arch!r}, expected one of {ARCHITECTURES}")
    if precision not in PRECISIONS:
        raise ConfigurationError(f"Unknown precision {precision!r}, expected one of {tuple(PRECISIONS)}")
    if input_size < 2:
        raise ConfigurationError(f"Input size must be at least 2, got {input_size}")

    rng = np.random.default_rng(seed)
    make_layers = _layers_net4 if arch == "net4" else _layers_net2
    layers = make_layers(input_size, rng, PRECISIONS[precision])
    model = Model(arch, layers, input_size=input_size, seed=seed, precision=precision)
    model.logger.debug(
        f"Built {arch} with {param_count(model)} core parameters (seed {seed})"
    )
    return model


def build_net4(seed: int = 0, precision: Precision = "double", input_size: int = 90) -> Model:
    """Build the four-layer classifier."""
    return build_model("net4", seed=seed, precision=precision, input_size=input_size)


def build_net2(seed: int = 0, precision: Precision = "double", input_size: int = 90) -> Model:
    """Build the two-layer classifier."""
    return build_model("net2", seed=seed, precision=precision, input_size=input_size)


def as_batch(model: Model, inputs: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Bring ``inputs`` into the ``(B, 1, H, W)`` layout of the model's dtype.

    A 2D array is one matrix, a 3D array a batch of matrices and a 4D array a batch of
    single-channel images. Returns the batch and whether the input was a single matrix.
    """
    inputs = np.asarray(inputs, dtype=model.dtype)
    single = inputs.ndim == 2
    if single:
        inputs = inputs[None, None]
    elif inputs.ndim == 3:
        inputs = inputs[:, None]
    expected = (1, model.input_size, model.input_size)
    if inputs.ndim != 4 or inputs.shape[1:] != expected:
        raise DataError(
            f"Model {model.arch} expects inputs of shape {expected[1:]}, "
            f"got {np.shape(inputs)}"
        )
    if not np.all(np.isfinite(inputs)):
        raise DataError("Model inputs contain non-finite values")
    return inputs, single


def forward_from(model: Model, start: int, x: np.ndarray, frozen: bool = False) -> np.ndarray:
    """Run the layers from index ``start`` on, starting with the layer input ``x``.

    A regular pass records every layer's input in ``model.layer_inputs``; a frozen
    pass reuses the gates of the last regular pass and records nothing.
    """
    if not frozen:
        del model.layer_inputs[start:]
    for layer in model.layers[start:]:
        if not frozen:
            model.layer_inputs.append(x)
        x = layer.forward(x, frozen=frozen)
    return x


def forward(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Compute the logits of one matrix (shape ``(2,)``) or of a batch (``(B, 2)``).

    Raises:
        DataError: if the inputs do not have the model's input shape or are not finite.
    """
    batch, single = as_batch(model, inputs)
    model.layer_inputs = []
    logits = forward_from(model, 0, batch)
    return logits[0] if single else logits


def backward(model: Model, logits_grad: np.ndarray) -> Dict[str, np.ndarray]:
    """Back-propagate the gradient of the loss w.r.t. the logits of the last `forward`.

    Returns the parameter gradients by qualified name, which are also kept on the model
    for `optim.adam_step`.

    Raises:
        ModelStateError: if no forward pass precedes the call.
    """
    if not model.layer_inputs:
        raise ModelStateError(f"Backward on model {model.arch} before any forward pass")
    grad = np.asarray(logits_grad, dtype=model.dtype)
    if grad.ndim == 1:
        grad = grad[None]

    model.zero_grads()
    for layer in reversed(model.layers):
        grad = layer.backward(grad)
    return model.grads


def predict(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Class indices for a batch of matrices: the argmax of the logits, ties to class 0."""
    logits = np.atleast_2d(forward(model, inputs))
    return np.argmax(logits, axis=1)


def param_count(model: Model, core_only: bool = True) -> int:
    """Number of trainable parameters, without the head unless ``core_only`` is false."""
    return sum(
        layer.param_count()
        for layer in model.layers
        if not (core_only and layer.name == HEAD_NAME)
    )


def layer_param_counts(model: Model, core_only: bool = True) -> Dict[str, int]:
    """Parameter count of every layer that has parameters, in layer order."""
    return {
        layer.name: layer.param_count()
        for layer in model.layers
        if layer.params and not (core_only and layer.name == HEAD_NAME)
    }


def model_size_kib(model: Model, precision: Optional[Precision] = None) -> float:
    """Storage size of the core parameters in KiB at ``precision`` (the model's own by
    default). The ``net4`` core takes 293.77 KiB in single precision."""
    precision = precision or model.precision
    if precision not in PRECISIONS:
        raise ConfigurationError(f"Unknown precision {precision!r}")
    return param_count(model) * np.dtype(PRECISIONS[precision]).itemsize / 1024


@dataclass(frozen=True)
class GradientCheckReport:
    """Outcome of comparing back-propagated gradients with central differences."""
    arch: str
    eps: float
    tol: float
    max_rel_error: float
    worst_parameter: str
    """Qualified name of the parameter tensor holding the worst entry."""
    worst_index: Tuple[int, ...]
    per_parameter: Dict[str, float]
    """Maximum relative error per parameter tensor."""
    kink_crossings: int
    """Number of gates a perturbation would have flipped, had they not been frozen."""
    n_checked: int

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.tol)
