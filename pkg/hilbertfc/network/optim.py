"""
Adam optimizer working on the gradients a `models.backward` call leaves on the model.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import ConfigurationError, ModelStateError
from .models import Model

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def adam_step(model: Model, lr: float) -> Model:
    """Update every parameter with one bias-corrected Adam step, in place.

    The moment estimates live in ``model.adam`` and are created lazily, so a fresh
    model starts from zero moments. On fresh moments a zero gradient leaves its parameter
    unchanged.

    Raises:
        ModelStateError: if the model holds no gradients.
        ConfigurationError: if ``lr`` is not positive.
    """
    if not lr > 0:
        raise ConfigurationError(f"Learning rate must be positive, got {lr}")
    grads = model.grads
    if not grads:
        raise ModelStateError(f"Adam step on model {model.arch} without gradients")

    state = model.adam
    state.step += 1
    correction1 = 1.0 - BETA1**state.step
    correction2 = 1.0 - BETA2**state.step

    for name, param in model.params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= BETA1
        m += (1.0 - BETA1) * grad
        v *= BETA2
        v += (1.0 - BETA2) * grad**2
        param -= lr * (m / correction1) / (np.sqrt(v / correction2) + EPSILON)

    return model
