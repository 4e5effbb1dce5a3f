"""
Model checkpoints in HDF5.

A checkpoint file carries its header in the root attributes (``format``, ``version``,
``arch``, ``seed``, ``precision``, ``input_size``), one dataset per parameter under
``params/<qualified name>`` and, if the model has taken optimizer steps, the Adam
moments under ``adam/m/<name>`` and ``adam/v/<name>`` with the step count in the
``adam`` group's ``step`` attribute.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import h5py
import numpy as np

from ..exceptions import DataError
from .models import Model, build_model

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hilbertfc-model"
CHECKPOINT_VERSION = 1


class CheckpointError(DataError):
    """Raised when a checkpoint file is not readable or does not match its header."""


def save_checkpoint(model: Model, path: Union[str, Path]) -> None:
    """Store the model's parameters and optimizer state in the HDF5 file ``path``."""
    with h5py.File(path, "w") as h5_file:
        h5_file.attrs["format"] = CHECKPOINT_FORMAT
        h5_file.attrs["version"] = CHECKPOINT_VERSION
        h5_file.attrs["arch"] = model.arch
        h5_file.attrs["seed"] = model.seed
        h5_file.attrs["precision"] = model.precision
        h5_file.attrs["input_size"] = model.input_size

        for name, value in model.params.items():
            h5_file.create_dataset(f"params/{name}", data=value)

        if model.adam.step > 0:
            adam = h5_file.create_group("adam")
            adam.attrs["step"] = model.adam.step
            for name in model.adam.m:
                adam.create_dataset(f"m/{name}", data=model.adam.m[name])
                adam.create_dataset(f"v/{name}", data=model.adam.v[name])

    logger.info(f"Stored {model.arch} checkpoint in {path}")


def load_checkpoint(path: Union[str, Path]) -> Model:
    """Rebuild a model from the checkpoint ``path``.

    Raises:
        CheckpointError: for a foreign or newer file, or parameters whose names or
            shapes differ from the architecture named in the header.
    """
    try:
        h5_file = h5py.File(path, "r")
    except OSError as os_err:
        raise CheckpointError(f"Cannot open checkpoint {path}: {os_err}") from os_err

    with h5_file:
        attrs = h5_file.attrs
        if attrs.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} is not a model checkpoint")
        if int(attrs["version"]) > CHECKPOINT_VERSION:
            raise CheckpointError(
                f"Checkpoint version {attrs['version']} of {path} is newer than "
                f"{CHECKPOINT_VERSION}"
            )

        model = build_model(
            str(attrs["arch"]),
            seed=int(attrs["seed"]),
            precision=str(attrs["precision"]),
            input_size=int(attrs["input_size"]),
        )
        stored = h5_file["params"]
        for name, param in model.params.items():
            if name not in stored or stored[name].shape != param.shape:
                raise CheckpointError(f"Parameter {name} is missing or misshapen in {path}")
            param[...] = stored[name][...]

        if "adam" in h5_file:
            adam = h5_file["adam"]
            model.adam.step = int(adam.attrs["step"])
            for name in adam["m"]:
                model.adam.m[name] = np.asarray(adam["m"][name][...], dtype=model.dtype)
                model.adam.v[name] = np.asarray(adam["v"][name][...], dtype=model.dtype)

    logger.info(f"Loaded {model.arch} checkpoint from {path}")
    return model
