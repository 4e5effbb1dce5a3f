"""
Base class of the pipeline's management commands.

A `PipelineCommand` declares which configuration keys it exposes as flags and which
paths it needs. It assembles and validates the `forms.RunConfig` before any work starts
and translates the pipeline's exceptions into exit codes:

- 0: success,
- 1: usage or configuration error (the usage text is part of the message),
- 2: data, parsing or file system error,
- 3: infeasible request (seed packing or split rejection gave up).
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from django.core.management.base import BaseCommand, CommandError, CommandParser

from .exceptions import ConfigurationError, DataError, InfeasibleError
from .forms import RunConfig, assemble_run_config, write_config_echo
from .loggers import CommandLoggerMixin

USAGE_ERROR = 1
DATA_ERROR = 2
INFEASIBLE = 3

CONFIG_FILE_NAME = "config.txt"

FLAG_HELP = {
    "input": "Directory with a manifest.csv of volumes or matrices.",
    "out": "Output directory, created if missing.",
    "atlas": "Seed atlas file. Defaults to atlas.txt in the input directory.",
    "order": "Order of the Hilbert curve (6 for a cube of side 64).",
    "half_length": "Half length of the ROI segments, 50 or 100.",
    "arch": "CNN architecture, net2 or net4.",
    "epochs": "Training epochs per repetition.",
    "lr": "Learning rate of Adam.",
    "batch": "Mini-batch size.",
    "reps": "Number of repetitions.",
    "seed": "Master seed.",
    "offset_x": "Position of the volume grid inside the curve cube along x.",
    "offset_y": "Position of the volume grid inside the curve cube along y.",
    "offset_z": "Position of the volume grid inside the curve cube along z.",
    "mode": "Generate 'volumes' or 'matrices'.",
    "per_class": "Subjects per class.",
    "separation": "Class separation of the synthetic cohort in [0, 1].",
    "class_pair": "Negative and positive class, e.g. CN,AD.",
    "protocol": "Published experiment preset, e.g. cn-ad-429.",
    "fwhm": "FWHM of the Gaussian smoothing kernel in mm, 0 to skip smoothing.",
    "slice_axis": "Axis along which slices were acquired (0, 1 or 2).",
    "nt": "Number of frames of synthetic volumes.",
    "reho": "Also compute the regional homogeneity table.",
    "bin_width": "Bin width of the intensity histogram.",
    "precision": "Floating point precision of the network, double or single.",
    "regions": "Number of regions of the synthetic atlas.",
    "volume_format": "File format of synthetic volumes, internal or nifti.",
}


class PipelineParser(CommandParser):
    """Command parser that reports usage errors with exit code 1."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")
        raise CommandError(f"Error: {message}", returncode=USAGE_ERROR)


class PipelineCommand(CommandLoggerMixin, BaseCommand):
    """Shared flag handling, validation and error translation of all commands.

    Subclasses set `config_keys` and `needs` and implement `run`.
    """
    config_keys: Sequence[str] = ()
    """Configuration keys exposed as command line flags."""
    needs: Sequence[str] = ()
    """Paths the command requires, see `forms.RunConfigForm`."""

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]

    def create_parser(self, prog_name, subcommand, **kwargs):
        """Django's parser with all its flags, wrapped in a `PipelineParser`."""
        base = super().create_parser(prog_name, subcommand, add_help=False, **kwargs)
        return PipelineParser(
            prog=base.prog,
            description=base.description,
            formatter_class=base.formatter_class,
            missing_args_message=base.missing_args_message,
            called_from_command_line=base.called_from_command_line,
            parents=[base],
        )

    def add_arguments(self, parser):
        parser.add_argument(
            "--config", type=Path, default=None,
            help="Flat key=value file with configuration values.",
        )
        for key in self.config_keys:
            flag = f"--{key.replace('_', '-')}"
            if key == "reho":
                parser.add_argument(flag, action="store_const", const=True, default=None,
                                    help=FLAG_HELP[key])
            else:
                parser.add_argument(flag, dest=key, default=None, help=FLAG_HELP[key])

    def usage(self) -> str:
        return self.create_parser("hilbertfc", self.command_name).format_usage().strip()

    def handle(self, *args, **options):
        """Validate the configuration, run the command and map errors to exit codes."""
        try:
            config = assemble_run_config(
                self.command_name, options, options.get("config"), needs=self.needs,
            )
            self.run(config, options)
        except ConfigurationError as config_err:
            raise CommandError(f"{config_err}\n{self.usage()}", returncode=USAGE_ERROR) from config_err
        except InfeasibleError as infeasible_err:
            raise CommandError(str(infeasible_err), returncode=INFEASIBLE) from infeasible_err
        except (DataError, OSError) as data_err:
            raise CommandError(str(data_err), returncode=DATA_ERROR) from data_err

    def run(self, config: RunConfig, options: Dict[str, Any]) -> None:
        raise NotImplementedError

    def write_echo(self, config: RunConfig, info: Optional[Dict[str, Any]] = None) -> Path:
        """Write the config echo of ``config`` into its output directory."""
        echo = {key: value for key, value in config.echo().items() if key in self.config_keys}
        return write_config_echo(echo, config.out / CONFIG_FILE_NAME, info=info)

    def success(self, message: str) -> None:
        self.stdout.write(self.style.SUCCESS(message))
