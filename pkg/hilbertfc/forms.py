"""
Validation of the run configuration.

Every command assembles its configuration from three layers, the later ones overriding
the earlier ones:

1. `settings.PIPELINE_DEFAULTS`,
2. a flat ``key=value`` file passed via ``--config`` (``#`` starts a comment line),
3. the command line flags (``--half-length`` for the key ``half_length``, etc.).

The merged values are cleaned by the `RunConfigForm`, whose cleaned data becomes an
immutable `RunConfig`. A run writes its configuration back as ``config.txt`` with
`write_config_echo`; passing that file to ``--config`` repeats the run.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from django import forms
from django.conf import settings
from django.core.validators import MaxValueValidator, MinValueValidator
from django.forms import ValidationError

from .exceptions import ConfigurationError
from .experiments.protocol import PROTOCOLS
from .loggers import FormLoggerMixin

logger = logging.getLogger(__name__)

PATH_KEYS = ("input", "out", "atlas")
CONFIG_KEYS = tuple(settings.PIPELINE_DEFAULTS) + PATH_KEYS
"""All keys a config file may set."""

ATLAS_FILE_NAME = "atlas.txt"


@dataclass(frozen=True)
class RunConfig:
    """Cleaned configuration of one command run."""
    subcommand: str
    input: Optional[Path]
    """Directory with a ``manifest.csv`` of volumes or matrices."""
    out: Optional[Path]
    atlas: Optional[Path]
    """Seed atlas; defaults to the input directory's ``atlas.txt``."""
    order: int
    half_length: int
    arch: str
    epochs: int
    lr: float
    batch: int
    reps: int
    seed: int
    offsets: Optional[Tuple[int, int, int]]
    """Grid position inside the curve cube, ``None`` to center the grid."""
    mode: str
    per_class: int
    separation: float
    class_pair: Tuple[str, str]
    protocol: str
    fwhm: float
    slice_axis: int
    nt: int
    reho: bool
    bin_width: float
    precision: str
    regions: int
    volume_format: str

    def echo(self) -> Dict[str, Any]:
        """Flat key/value form of the config, as written to ``config.txt``."""
        echo = {}
        for f in fields(self):
            if f.name in ("subcommand", "offsets"):
                continue
            echo[f.name] = getattr(self, f.name)
        for axis, offset in zip("xyz", self.offsets or (None, None, None)):
            echo[f"offset_{axis}"] = offset
        echo["class_pair"] = ",".join(self.class_pair)
        return echo


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)


def write_config_echo(
    echo: Mapping[str, Any],
    path: Union[str, Path],
    info: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write ``echo`` as sorted ``key=value`` lines.

    ``info`` holds values that describe the run without configuring it (e.g. parameter
    counts). They are written as comment lines, so reading the file back ignores them.
    """
    path = Path(path)
    lines = [f"# {key}={_format_value(value)}" for key, value in sorted((info or {}).items())]
    lines += [f"{key}={_format_value(value)}" for key, value in sorted(echo.items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Read a flat ``key=value`` config file.

    Raises:
        ConfigurationError: if the file cannot be read, a line has no ``=``, or a key
            is unknown. The message names the line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as os_err:
        raise ConfigurationError(f"Cannot read config file {path}: {os_err}") from os_err

    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigurationError(f"{path}, line {lineno}: expected key=value, got '{line}'")
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{path}, line {lineno}: unknown key '{key}'")
        values[key] = value.strip()
    logger.debug(f"Read {len(values)} keys from {path}")
    return values


def merge_config(
    cli_options: Mapping[str, Any],
    config_path: Optional[Union[str, Path]] = None,
) -> Dict[str, Any]:
    """Merge defaults, config file and command line options (``None`` means not given)."""
    merged: Dict[str, Any] = {**settings.PIPELINE_DEFAULTS, "input": "", "out": "", "atlas": ""}
    if config_path:
        merged.update(read_config_file(config_path))
    merged.update({
        key: value for key, value in cli_options.items()
        if key in CONFIG_KEYS and value is not None
    })
    return merged


def _optional_offset(label: str) -> forms.IntegerField:
    return forms.IntegerField(required=False, min_value=0, label=label)


class RunConfigForm(FormLoggerMixin, forms.Form):
    """Form that validates the merged configuration of a command.

    ``needs`` names the paths the command requires: ``"input"`` must be an existing
    directory, ``"atlas"`` an existing file (falling back to the input directory's
    ``atlas.txt``) and ``"out"`` must be given.
    """
    input = forms.CharField(required=False)
    out = forms.CharField(required=False)
    atlas = forms.CharField(required=False)

    order = forms.IntegerField(min_value=1, max_value=10)
    half_length = forms.TypedChoiceField(
        choices=[(50, "50 (segments of 101 voxels)"), (100, "100 (segments of 201 voxels)")],
        coerce=int,
    )
    arch = forms.ChoiceField(choices=[("net2", "2-layer CNN"), ("net4", "4-layer CNN")])
    epochs = forms.IntegerField(min_value=1)
    lr = forms.FloatField(validators=[MinValueValidator(1e-12)])
    batch = forms.IntegerField(min_value=1)
    reps = forms.IntegerField(min_value=1)
    seed = forms.IntegerField(min_value=0)
    offset_x = _optional_offset("offset along x")
    offset_y = _optional_offset("offset along y")
    offset_z = _optional_offset("offset along z")

    mode = forms.ChoiceField(choices=[("volumes", "volumes"), ("matrices", "matrices")])
    per_class = forms.IntegerField(min_value=1)
    separation = forms.FloatField(validators=[MinValueValidator(0.0), MaxValueValidator(1.0)])
    class_pair = forms.CharField()
    protocol = forms.ChoiceField(
        required=False,
        choices=[("", "none")] + [(name, name) for name in PROTOCOLS],
    )
    fwhm = forms.FloatField(validators=[MinValueValidator(0.0)])
    slice_axis = forms.TypedChoiceField(choices=[(0, "x"), (1, "y"), (2, "z")], coerce=int)
    nt = forms.IntegerField(min_value=1)
    reho = forms.BooleanField(required=False)
    bin_width = forms.FloatField(validators=[MinValueValidator(1e-9)])
    precision = forms.ChoiceField(choices=[("double", "float64"), ("single", "float32")])
    regions = forms.IntegerField(min_value=2)
    volume_format = forms.ChoiceField(choices=[("internal", "internal"), ("nifti", "NIfTI-1")])

    def __init__(self, *args, subcommand: str = "", needs: Sequence[str] = (), **kwargs):
        self.subcommand = subcommand
        self.needs = tuple(needs)
        super().__init__(*args, **kwargs)

    def clean_class_pair(self) -> Tuple[str, str]:
        """Split ``"NEG,POS"`` into the negative and positive class tag."""
        tags = tuple(t.strip() for t in self.cleaned_data["class_pair"].split(","))
        if len(tags) != 2 or not all(tags) or tags[0] == tags[1]:
            raise ValidationError("Expects two distinct class tags, e.g. 'CN,AD'")
        return tags

    def clean(self) -> Dict[str, Any]:
        """Resolve and check the paths the command needs."""
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data

        for key in PATH_KEYS:
            cleaned_data[key] = Path(cleaned_data[key]) if cleaned_data.get(key) else None

        if "input" in self.needs:
            input_dir = cleaned_data["input"]
            if input_dir is None:
                self.add_error("input", ValidationError("An input directory is required"))
            elif not input_dir.is_dir():
                self.add_error("input", ValidationError(f"Not a directory: {input_dir}"))

        if "atlas" in self.needs:
            atlas = cleaned_data["atlas"]
            if atlas is None and cleaned_data["input"] is not None:
                atlas = cleaned_data["input"] / ATLAS_FILE_NAME
            if atlas is None or not atlas.is_file():
                self.add_error("atlas", ValidationError(f"Atlas file not found: {atlas}"))
            cleaned_data["atlas"] = atlas

        if "out" in self.needs and cleaned_data["out"] is None:
            self.add_error("out", ValidationError("An output directory is required"))

        offsets = [cleaned_data[f"offset_{axis}"] for axis in "xyz"]
        if any(o is not None for o in offsets) and any(o is None for o in offsets):
            self.add_error("offset_x", ValidationError("Give all three offsets or none"))

        protocol = cleaned_data.get("protocol")
        if protocol and PROTOCOLS[protocol].class_pair != cleaned_data["class_pair"]:
            self.add_error("protocol", ValidationError(
                f"Protocol {protocol} compares {','.join(PROTOCOLS[protocol].class_pair)}"
            ))
        return cleaned_data

    def run_config(self) -> RunConfig:
        """The `RunConfig` of the cleaned data. Only call after `is_valid`."""
        data = self.cleaned_data
        offsets = tuple(data[f"offset_{axis}"] for axis in "xyz")
        return RunConfig(
            subcommand=self.subcommand,
            offsets=None if offsets[0] is None else offsets,
            **{
                key: data[key] for key in (f.name for f in fields(RunConfig))
                if key not in ("subcommand", "offsets")
            },
        )

    def error_text(self) -> str:
        return "; ".join(
            f"{field}: {' '.join(str(e) for e in errors)}"
            for field, errors in self.errors.items()
        )


def assemble_run_config(
    subcommand: str,
    cli_options: Mapping[str, Any],
    config_path: Optional[Union[str, Path]] = None,
    needs: Sequence[str] = (),
) -> RunConfig:
    """Merge the configuration layers and validate them.

    Raises:
        ConfigurationError: if the config file or any value is invalid.
    """
    form = RunConfigForm(
        merge_config(cli_options, config_path), subcommand=subcommand, needs=needs,
    )
    if not form.is_valid():
        raise ConfigurationError(form.error_text())
    return form.run_config()
