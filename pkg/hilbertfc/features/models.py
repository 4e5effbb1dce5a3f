"""
Domain types of the feature extraction.

A `SeedAtlas` lists the regions with one seed voxel each, a `RoiSegment` is the piece
of the Hilbert curve centered on a seed, and a `CorrelationMatrix` holds the spatial
correlations between all pairs of segments for one subject. `RehoTable` collects the
regional homogeneity values of a cohort.

Seeds and segment voxels are coordinates in the curve cube. The volume grid sits at an
integer offset inside the cube, described by a `CubeToGrid` mapping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import BoundsError, DataError

CLASS_TAGS = ("CN", "MCI", "AD")
"""Subject classes: cognitively normal, mild cognitive impairment, Alzheimer's disease."""


@dataclass(frozen=True)
class Region:
    """One atlas region and its seed voxel."""
    region_id: int
    name: str
    seed: Tuple[int, int, int]
    """Seed voxel in curve cube coordinates."""


@dataclass(frozen=True)
class SeedAtlas:
    """Ordered list of regions with unique ids."""
    regions: Tuple[Region, ...]

    def __post_init__(self):
        if len(self.regions) < 2:
            raise DataError(f"An atlas needs at least 2 regions, got {len(self.regions)}")
        ids = [r.region_id for r in self.regions]
        if len(set(ids)) != len(ids):
            raise DataError("Atlas region ids are not unique")
        if ids != sorted(ids):
            raise DataError("Atlas regions are not ordered by id")

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def region_ids(self) -> Tuple[int, ...]:
        return tuple(r.region_id for r in self.regions)

    @property
    def seeds(self) -> np.ndarray:
        """Seed coordinates as an ``(R, 3)`` integer array."""
        return np.array([r.seed for r in self.regions], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class RoiSegment:
    """Curve segment of ``2 * half_length + 1`` voxels centered on a region's seed."""
    region_id: int
    seed_index: int
    """Curve index of the seed voxel."""
    half_length: int
    voxel_list: np.ndarray
    """Cube coordinates of the segment in curve order, shape ``(length, 3)``."""

    @property
    def start(self) -> int:
        """First curve index of the segment."""
        return self.seed_index - self.half_length

    @property
    def stop(self) -> int:
        """Last curve index of the segment (inclusive)."""
        return self.seed_index + self.half_length

    def __len__(self) -> int:
        return 2 * self.half_length + 1


@dataclass(frozen=True)
class Overlap:
    """Two segments sharing ``shared`` curve indices."""
    region_a: int
    region_b: int
    shared: int


@dataclass(frozen=True)
class CubeToGrid:
    """Placement of the volume grid inside the curve cube.

    The grid voxel ``(i, j, k)`` is the cube voxel ``(i, j, k) + offset``.
    """
    offset: Tuple[int, int, int]

    def to_grid(
        self,
        coords: np.ndarray,
        grid_dims: Tuple[int, ...],
        region_id: Optional[int] = None,
    ) -> np.ndarray:
        """Map cube coordinates into the grid of shape ``grid_dims``.

        Raises:
            BoundsError: if a mapped voxel lies outside the grid. The message lists
                the region the voxel belongs to, if given.
        """
        grid = np.asarray(coords, dtype=np.int64) - np.asarray(self.offset, dtype=np.int64)
        dims = np.asarray(grid_dims[:3])
        outside = np.any((grid < 0) | (grid >= dims), axis=-1)
        if np.any(outside):
            cube_voxel = tuple(int(c) for c in np.asarray(coords).reshape(-1, 3)[
                np.flatnonzero(outside.ravel())[0]
            ])
            where = f" of region {region_id}" if region_id is not None else ""
            raise BoundsError(
                f"Voxel {cube_voxel}{where} maps outside the grid {tuple(dims)} "
                f"at offset {self.offset}"
            )
        return grid


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric spatial correlation matrix of one subject, the input of the CNNs.

    The invariants (exact symmetry, exact unit diagonal, entries in ``[-1, 1]``, all
    finite) are checked on construction.
    """
    values: np.ndarray
    subject_id: str
    label: str
    """Class tag, one of `CLASS_TAGS` (other tags are accepted for custom cohorts)."""
    degenerate: Tuple[int, ...] = ()
    """Rows (0-based) whose ROI array had zero variance."""
    half_length: Optional[int] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "degenerate", tuple(int(d) for d in self.degenerate))
        problems = matrix_problems(values)
        if problems:
            raise DataError(
                f"Invalid correlation matrix of subject {self.subject_id}: "
                + "; ".join(problems)
            )

    @property
    def r(self) -> int:
        """Number of regions."""
        return int(self.values.shape[0])


def matrix_problems(values: np.ndarray) -> List[str]:
    """List the violated correlation matrix invariants of ``values`` (empty if valid)."""
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        return [f"not square, shape {values.shape}"]

    problems = []
    if not np.all(np.isfinite(values)):
        problems.append("non-finite entries")
    if not np.array_equal(values, values.T):
        problems.append("not symmetric")
    if not np.all(np.diag(values) == 1.0):
        problems.append("diagonal not exactly 1")
    if np.any(np.abs(values) > 1.0):
        problems.append("entries outside [-1, 1]")
    return problems


@dataclass(frozen=True, eq=False)
class RehoSummary:
    """Means and standard deviations of a ReHo table.

    The ``*_literal`` deviations put the ``1/n`` prefactor outside the square root,
    ``(1/n) sqrt(sum (x - mean)^2)``. The ``*_sample`` deviations are the conventional
    ``sqrt(sum (x - mean)^2 / (n - 1))``, defined as 0 for ``n = 1``.
    """
    subject_mean: np.ndarray
    """Mean over regions per subject."""
    region_mean: np.ndarray
    """Mean over subjects per region."""
    subject_std_literal: np.ndarray
    subject_std_sample: np.ndarray
    region_std_literal: np.ndarray
    region_std_sample: np.ndarray


@dataclass(frozen=True, eq=False)
class RehoTable:
    """Regional homogeneity of every (subject, region) pair."""
    values: np.ndarray
    """ReHo values of shape ``(subjects, regions)``, all in ``[-1, 1]``."""
    subject_ids: Tuple[str, ...]
    region_ids: Tuple[int, ...]
    summary: RehoSummary
    degenerate: Dict[str, List[int]] = field(default_factory=dict)
    """Per subject, the regions containing at least one constant voxel series."""
