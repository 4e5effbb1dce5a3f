"""
Module for reading and writing the text formats of the feature extraction.

- **Seed atlas**: one region per line, ``region_id, name, x, y, z``, separated by tabs
  or commas. An optional header line is recognized by its non-numeric first field;
  blank lines and lines starting with ``#`` are skipped.
- **Matrix files**: ``<subject_id>.csv`` holds ``R`` rows of ``R`` values with 17
  significant digits (so that doubles round-trip exactly), and the sidecar
  ``<subject_id>.json`` carries the subject id, label, half length and the degenerate
  rows.
- **Manifest**: ``manifest.csv`` with the columns ``subject_id, label, path`` lists the
  subjects of a directory of volumes or matrices. Paths are relative to the manifest.
- **ReHo table**: ``reho.csv`` with one row per subject plus the per-region summary
  rows.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import BoundsError, DataError
from ..volumes.ioports import ParsingError
from .models import CorrelationMatrix, Region, RehoTable, SeedAtlas

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ATLAS_COLUMNS = ["region_id", "name", "x", "y", "z"]
MANIFEST_COLUMNS = ["subject_id", "label", "path"]
FLOAT_FORMAT = "%.17g"


def _split_atlas_line(line: str) -> List[str]:
    separator = "\t" if "\t" in line else ","
    return [part.strip() for part in line.split(separator)]


def load_seed_atlas(path: PathLike, side: int = 64) -> SeedAtlas:
    """Load and validate a seed atlas file for a curve cube of ``side`` voxels.

    Regions are returned ordered by id.

    Raises:
        ParsingError: for a malformed line or a duplicate id, naming the line number.
        BoundsError: for a seed outside the cube.
    """
    regions, first_line = {}, {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    seen_data = False

    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = _split_atlas_line(line)

        if not seen_data and not fields[0].lstrip("+-").isdigit():
            seen_data = True
            logger.debug(f"Skipping atlas header {fields}")
            continue
        seen_data = True

        if len(fields) != len(ATLAS_COLUMNS):
            raise ParsingError(
                f"Expected {len(ATLAS_COLUMNS)} fields {ATLAS_COLUMNS}, got {len(fields)}",
                line=number,
            )
        try:
            region_id = int(fields[0])
            seed = tuple(int(c) for c in fields[2:])
        except ValueError as val_err:
            raise ParsingError(f"Non-integer id or coordinate in {fields}", line=number) \
                from val_err

        if region_id in regions:
            raise ParsingError(
                f"Duplicate region id {region_id} (first on line {first_line[region_id]})",
                line=number,
            )
        if any(not 0 <= c < side for c in seed):
            raise BoundsError(
                f"Seed {seed} of region {region_id} on line {number} is outside the "
                f"cube of side {side}"
            )
        regions[region_id] = Region(region_id=region_id, name=fields[1], seed=seed)
        first_line[region_id] = number

    atlas = SeedAtlas(regions=tuple(regions[i] for i in sorted(regions)))
    logger.info(f"Loaded atlas with {len(atlas)} regions from {path}")
    return atlas


def write_seed_atlas(atlas: SeedAtlas, path: PathLike) -> None:
    """Write ``atlas`` as tab-separated text with a header line."""
    table = pd.DataFrame(
        [(r.region_id, r.name, *r.seed) for r in atlas.regions],
        columns=ATLAS_COLUMNS,
    )
    table.to_csv(path, sep="\t", index=False)


def write_matrix(matrix: CorrelationMatrix, out_dir: PathLike) -> Path:
    """Write the matrix CSV and its JSON sidecar into ``out_dir``.

    Returns the path of the CSV file.
    """
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{matrix.subject_id}.csv"
    pd.DataFrame(matrix.values).to_csv(
        csv_path, header=False, index=False, float_format=FLOAT_FORMAT,
    )
    sidecar = {
        "subject_id": matrix.subject_id,
        "label": matrix.label,
        "half_length": matrix.half_length,
        "degenerate": list(matrix.degenerate),
    }
    with open(csv_path.with_suffix(".json"), "w", encoding="utf-8") as json_file:
        json.dump(sidecar, json_file, indent=2, sort_keys=True)
    return csv_path


def read_matrix(path: PathLike) -> CorrelationMatrix:
    """Read a matrix CSV and, if present, its JSON sidecar.

    Without a sidecar, the subject id is the file stem and the label is empty.

    Raises:
        ParsingError: if the file is not a square table of numbers.
        DataError: if the values violate the correlation matrix invariants.
    """
    path = Path(path)
    try:
        values = pd.read_csv(
            path, header=None, dtype=np.float64, float_precision="round_trip",
        ).to_numpy()
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as read_err:
        raise ParsingError(f"Cannot read matrix file {path}: {read_err}") from read_err
    if values.shape[0] != values.shape[1]:
        raise ParsingError(f"Matrix in {path} is not square: {values.shape}")

    sidecar = {"subject_id": path.stem, "label": "", "half_length": None, "degenerate": []}
    sidecar_path = path.with_suffix(".json")
    if sidecar_path.exists():
        with open(sidecar_path, "r", encoding="utf-8") as json_file:
            sidecar.update(json.load(json_file))

    return CorrelationMatrix(
        values=values,
        subject_id=str(sidecar["subject_id"]),
        label=str(sidecar["label"]),
        degenerate=tuple(sidecar["degenerate"]),
        half_length=sidecar["half_length"],
    )


def write_manifest(entries: Sequence[Tuple[str, str, str]], out_dir: PathLike) -> Path:
    """Write the ``manifest.csv`` of ``(subject_id, label, path)`` entries."""
    path = Path(out_dir) / "manifest.csv"
    pd.DataFrame(list(entries), columns=MANIFEST_COLUMNS).to_csv(path, index=False)
    return path


def read_manifest(directory: PathLike) -> pd.DataFrame:
    """Read ``manifest.csv`` of ``directory`` and resolve its paths.

    Raises:
        ParsingError: if the manifest lacks a column.
        DataError: if the manifest is missing, empty or lists a missing file.
    """
    directory = Path(directory)
    path = directory / "manifest.csv"
    if not path.exists():
        raise DataError(f"No manifest.csv in {directory}")

    manifest = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in MANIFEST_COLUMNS if c not in manifest.columns]
    if missing:
        raise ParsingError(f"Manifest {path} lacks the columns {missing}", line=1)
    if manifest.empty:
        raise DataError(f"Manifest {path} lists no subjects")

    manifest["path"] = [directory / p for p in manifest["path"]]
    absent = [str(p) for p in manifest["path"] if not p.exists()]
    if absent:
        raise DataError(f"Files listed in {path} do not exist: {absent[:3]}")
    return manifest


def read_matrix_directory(directory: PathLike) -> List[CorrelationMatrix]:
    """Read all matrices listed in the manifest of ``directory``, in manifest order.

    The labels of the manifest take precedence over those of the sidecars.
    """
    manifest = read_manifest(directory)
    matrices = []
    for row in manifest.itertuples(index=False):
        matrix = read_matrix(row.path)
        matrices.append(CorrelationMatrix(
            values=matrix.values,
            subject_id=row.subject_id,
            label=row.label or matrix.label,
            degenerate=matrix.degenerate,
            half_length=matrix.half_length,
        ))
    logger.info(f"Read {len(matrices)} matrices from {directory}")
    return matrices


def write_reho_table(table: RehoTable, out_dir: PathLike, name: str = "reho.csv") -> Path:
    """Write the ReHo table with its summaries.

    Each subject row ends with the subject's mean and both standard deviations over
    the regions. Three closing rows ``mean``, ``std_literal`` and ``std_sample`` hold
    the per-region statistics over the subjects.
    """
    summary = table.summary
    columns = [f"region_{i}" for i in table.region_ids]
    frame = pd.DataFrame(table.values, columns=columns)
    frame.insert(0, "subject_id", table.subject_ids)
    frame["mean"] = summary.subject_mean
    frame["std_literal"] = summary.subject_std_literal
    frame["std_sample"] = summary.subject_std_sample

    footer = pd.DataFrame(
        [summary.region_mean, summary.region_std_literal, summary.region_std_sample],
        columns=columns,
    )
    footer.insert(0, "subject_id", ["mean", "std_literal", "std_sample"])

    path = Path(out_dir) / name
    pd.concat([frame, footer], ignore_index=True).to_csv(
        path, index=False, float_format=FLOAT_FORMAT,
    )
    logger.info(f"Wrote ReHo table of {len(table.subject_ids)} subjects to {path}")
    return path
