"""
Training and evaluation of one classifier.

Every epoch shuffles the training set with a seeded generator and passes over all of it
in batches (the last batch may be smaller), taking one Adam step per batch on the mean
softmax cross-entropy of the batch. The loss of the full training set is sampled before
the first epoch and after every `settings.LOSS_SAMPLE_INTERVAL` epochs; the mean batch
loss of every epoch is kept as well. Training runs for a fixed number of epochs.
"""
from __future__ import annotations

import logging
import time
from typing import Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from sklearn.metrics import confusion_matrix

from ..exceptions import DataError
from ..features.models import CorrelationMatrix
from ..network.layers import loss_softmax_ce
from ..network.models import Model, backward, forward, predict
from ..network.optim import adam_step
from .models import ConfusionCounts, LossTrace

logger = logging.getLogger(__name__)

EVAL_CHUNK = 32


def encode(
    matrices: Sequence[CorrelationMatrix],
    class_pair: Tuple[str, str],
) -> Tuple[np.ndarray, np.ndarray]:
    """Stack the matrices into a ``(N, R, R)`` array and encode their labels as class
    indices of ``class_pair`` (negative 0, positive 1).

    Raises:
        DataError: if a matrix carries a label outside the class pair.
    """
    index = {label: i for i, label in enumerate(class_pair)}
    unknown = sorted({m.label for m in matrices} - set(index))
    if unknown:
        raise DataError(f"Labels {unknown} are not in the class pair {class_pair}")
    inputs = np.stack([m.values for m in matrices])
    labels = np.array([index[m.label] for m in matrices], dtype=np.int64)
    return inputs, labels


def dataset_loss(model: Model, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy over a whole dataset, evaluated in chunks."""
    total = 0.0
    for start in range(0, len(inputs), EVAL_CHUNK):
        stop = start + EVAL_CHUNK
        loss, _ = loss_softmax_ce(
            np.atleast_2d(forward(model, inputs[start:stop])), labels[start:stop]
        )
        total += loss * len(labels[start:stop])
    return total / len(inputs)


def train(
    model: Model,
    inputs: np.ndarray,
    labels: np.ndarray,
    epochs: int = 200,
    batch_size: int = 4,
    lr: float = 1e-4,
    seed: int = 0,
    sample_interval: Optional[int] = None,
) -> Tuple[Model, LossTrace]:
    """Train ``model`` in place on ``inputs`` (``(N, R, R)``) with class indices ``labels``.

    Raises:
        DataError: for an empty training set or mismatched labels.
    """
    if len(inputs) == 0:
        raise DataError("Cannot train on an empty training set")
    if len(inputs) != len(labels):
        raise DataError(f"{len(inputs)} training inputs but {len(labels)} labels")
    sample_interval = sample_interval or settings.LOSS_SAMPLE_INTERVAL

    rng = np.random.default_rng(seed)
    sampled_epochs, sampled_losses = [0], [dataset_loss(model, inputs, labels)]
    epoch_losses = np.empty(epochs)
    start_time = time.perf_counter()

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(inputs))
        batch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            logits = np.atleast_2d(forward(model, inputs[batch]))
            loss, logits_grad = loss_softmax_ce(logits, labels[batch])
            backward(model, logits_grad)
            adam_step(model, lr)
            batch_losses.append(loss)
        epoch_losses[epoch - 1] = np.mean(batch_losses)

        if epoch % sample_interval == 0:
            sampled_epochs.append(epoch)
            sampled_losses.append(dataset_loss(model, inputs, labels))
            logger.debug("Epoch %d: training loss %.6f", epoch, sampled_losses[-1])

    logger.info(
        "Training %(epochs)d epochs on %(count)d matrices took %(time).3f s",
        {"epochs": epochs, "count": len(inputs), "time": time.perf_counter() - start_time},
    )
    trace = LossTrace(
        sampled_epochs=np.array(sampled_epochs),
        sampled_losses=np.array(sampled_losses),
        epoch_losses=epoch_losses,
    )
    return model, trace


def evaluate(model: Model, inputs: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    """Confusion counts of ``model`` on a test set with class indices ``labels``.

    Class 1 is the positive class. Predictions are the argmax of the two logits, with
    ties going to class 0.
    """
    if len(inputs) == 0:
        raise DataError("Cannot evaluate on an empty test set")
    predicted = np.concatenate([
        predict(model, inputs[start:start + EVAL_CHUNK])
        for start in range(0, len(inputs), EVAL_CHUNK)
    ])
    tn, fp, fn, tp = confusion_matrix(labels, predicted, labels=[0, 1]).ravel()
    return ConfusionCounts(tp=int(tp), tn=int(tn), fp=int(fp), fn=int(fn))
