"""
Check the back-propagated gradients of an architecture against central finite
differences on random correlation-like inputs and print the worst parameter.
"""
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management.base import CommandError

from ....commands import DATA_ERROR, PipelineCommand
from ...gradcheck import gradient_check
from ...ioports import load_checkpoint
from ...models import build_model


def random_inputs(size: int, count: int, seed: int) -> np.ndarray:
    """``count`` random symmetric matrices with unit diagonal and entries in [-1, 1]."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(-1.0, 1.0, size=(count, size, size))
    values = (values + values.transpose(0, 2, 1)) / 2.0
    values[:, np.arange(size), np.arange(size)] = 1.0
    return values


class Command(PipelineCommand):
    """Gradient check of a freshly initialized or a saved model."""
    help = __doc__
    config_keys = ("out", "arch", "seed")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--eps", type=float, default=1e-5, help="Finite difference step.")
        parser.add_argument("--tol", type=float, default=1e-4, help="Relative error tolerance.")
        parser.add_argument(
            "--input-size", type=int, default=90, help="Number of regions of the inputs.",
        )
        parser.add_argument("--count", type=int, default=2, help="Inputs in the batch.")
        parser.add_argument(
            "--corrupt", default=None,
            help="Zero the largest gradient entry of this parameter, e.g. conv1.weight.",
        )
        parser.add_argument(
            "--checkpoint", type=Path, default=None,
            help="Check a saved model instead of a new one.",
        )

    def run(self, config, options):
        if options.get("checkpoint"):
            model = load_checkpoint(options["checkpoint"])
        else:
            model = build_model(config.arch, seed=config.seed, input_size=options["input_size"])
        inputs = random_inputs(model.input_size, options["count"], config.seed)

        report = gradient_check(
            model, inputs, eps=options["eps"], tol=options["tol"], corrupt=options["corrupt"],
        )
        if config.out is not None:
            config.out.mkdir(parents=True, exist_ok=True)
            pd.DataFrame({
                "parameter": list(report.per_parameter),
                "max_rel_error": list(report.per_parameter.values()),
            }).to_csv(config.out / "gradcheck.csv", index=False, float_format="%.6e")
            self.write_echo(config, info={"checked_entries": report.n_checked})

        summary = (
            f"{report.arch}: worst relative error {report.max_rel_error:.3e} in "
            f"{report.worst_parameter}{list(report.worst_index)} over {report.n_checked} "
            f"entries, {report.kink_crossings} kink crossings"
        )
        if not report.passed:
            raise CommandError(
                f"Gradient check failed (tolerance {report.tol:g}). {summary}",
                returncode=DATA_ERROR,
            )
        self.success(summary)
