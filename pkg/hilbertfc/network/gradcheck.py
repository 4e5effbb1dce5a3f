"""
Finite-difference verification of the back-propagated gradients.

Every parameter entry is perturbed by ``±eps`` and the softmax cross-entropy is
recomputed from the perturbed layer onward. The ReLU masks and pooling argmaxes are
held at the unperturbed point while doing so, which makes the differenced function
smooth; gates that a perturbation would have flipped are counted and reported instead.
The relative error of an entry is ``|a - n| / max(|a| + |n|, 1e-6)`` for the analytic
gradient ``a`` and the central difference ``n``.
"""
from __future__ import annotations

import logging
import time
from typing import Optional

import numpy as np

from ..exceptions import ConfigurationError
from .layers import loss_softmax_ce
from .models import GradientCheckReport, Model, as_batch, backward, forward_from

logger = logging.getLogger(__name__)

REL_ERROR_FLOOR = 1e-6


def _perturbed_loss(
    model: Model,
    layer_index: int,
    layer_input: np.ndarray,
    param: np.ndarray,
    flat_index: int,
    delta: float,
    labels: np.ndarray,
) -> float:
    original = param.flat[flat_index]
    param.flat[flat_index] = original + delta
    logits = forward_from(model, layer_index, layer_input, frozen=True)
    param.flat[flat_index] = original
    loss, _ = loss_softmax_ce(logits, labels)
    return loss


def gradient_check(
    model: Model,
    inputs: np.ndarray,
    labels: Optional[np.ndarray] = None,
    eps: float = 1e-5,
    tol: float = 1e-4,
    corrupt: Optional[str] = None,
) -> GradientCheckReport:
    """Compare `backward` with central differences for every parameter of ``model``.

    ``labels`` default to alternating classes over the batch. With ``corrupt`` set to a
    parameter name, the largest entry of that parameter's analytic gradient is zeroed
    before the comparison, which the check must detect.

    Raises:
        ConfigurationError: if the model is not in double precision or ``eps`` is not
            positive.
    """
    if model.precision != "double":
        raise ConfigurationError("Gradient checks need a double-precision model")
    if not eps > 0:
        raise ConfigurationError(f"Finite-difference step must be positive, got {eps}")

    start_time = time.perf_counter()
    batch, _ = as_batch(model, inputs)
    labels = np.arange(len(batch)) % 2 if labels is None else np.asarray(labels)

    model.layer_inputs = []
    logits = forward_from(model, 0, batch)
    _, logits_grad = loss_softmax_ce(logits, labels)
    analytic = {name: grad.copy() for name, grad in backward(model, logits_grad).items()}

    if corrupt is not None:
        model.layer_of(corrupt)
        target = analytic[corrupt]
        target.flat[np.argmax(np.abs(target))] = 0.0
        logger.info("Corrupted the largest gradient entry of %s", corrupt)

    for layer in model.layers:
        layer.kink_crossings = 0

    per_parameter, worst = {}, (-1.0, "", ())
    n_checked = 0
    for name, param in model.params.items():
        index, _, _ = model.layer_of(name)
        layer_input = model.layer_inputs[index]

        errors = np.empty(param.size)
        for flat_index in range(param.size):
            plus, minus = (
                _perturbed_loss(model, index, layer_input, param, flat_index, delta, labels)
                for delta in (eps, -eps)
            )
            numeric = (plus - minus) / (2.0 * eps)
            exact = analytic[name].flat[flat_index]
            errors[flat_index] = abs(exact - numeric) / max(
                abs(exact) + abs(numeric), REL_ERROR_FLOOR
            )

        n_checked += param.size
        per_parameter[name] = float(errors.max())
        if per_parameter[name] > worst[0]:
            position = np.unravel_index(int(np.argmax(errors)), param.shape)
            worst = (per_parameter[name], name, tuple(int(i) for i in position))

    report = GradientCheckReport(
        arch=model.arch,
        eps=eps,
        tol=tol,
        max_rel_error=worst[0],
        worst_parameter=worst[1],
        worst_index=worst[2],
        per_parameter=per_parameter,
        kink_crossings=sum(layer.kink_crossings for layer in model.layers),
        n_checked=n_checked,
    )
    logger.info(
        "Gradient check of %(count)d entries took %(time).3f s",
        {"count": n_checked, "time": time.perf_counter() - start_time},
    )
    return report
