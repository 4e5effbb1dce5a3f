"""
Data model for scalar volumes.

A `Volume4D` is the BOLD time series of one subject, a `Volume3D` a single image such
as the time average of a series. Both are plain immutable values holding a numpy array
in ``(x, y, z[, t])`` index order, so ``data[x, y, z, t]`` is the intensity of voxel
``(x, y, z)`` in frame ``t``. They may be shared between threads freely; every
operation of the pipeline returns a new volume instead of modifying one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..exceptions import DataError


def _check_spacing(voxel_mm) -> Tuple[float, float, float]:
    spacing = tuple(float(v) for v in voxel_mm)
    if len(spacing) != 3 or not all(np.isfinite(v) and v > 0 for v in spacing):
        raise DataError(f"Voxel spacing must be three positive numbers, got {spacing}")
    return spacing


def _check_data(data, ndim: int) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != ndim:
        raise DataError(f"Expected a {ndim}D array, got shape {data.shape}")
    if any(n < 1 for n in data.shape):
        raise DataError(f"Volume dimensions must be positive, got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise DataError("Volume contains non-finite values")
    return data


@dataclass(frozen=True, eq=False)
class Volume3D:
    """A single 3D grid of double precision intensities."""
    data: np.ndarray
    """Intensities of shape ``(nx, ny, nz)``."""
    voxel_mm: Tuple[float, float, float]
    """Voxel spacing along x, y and z in millimeters."""

    def __post_init__(self):
        object.__setattr__(self, "data", _check_data(self.data, 3))
        object.__setattr__(self, "voxel_mm", _check_spacing(self.voxel_mm))

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)


@dataclass(frozen=True, eq=False)
class Volume4D:
    """A time series of 3D grids, e.g. a resting-state BOLD acquisition."""
    data: np.ndarray
    """Intensities of shape ``(nx, ny, nz, nt)``."""
    voxel_mm: Tuple[float, float, float]
    """Voxel spacing along x, y and z in millimeters."""
    tr_seconds: float
    """Repetition time, i.e. the time between two frames."""

    def __post_init__(self):
        object.__setattr__(self, "data", _check_data(self.data, 4))
        object.__setattr__(self, "voxel_mm", _check_spacing(self.voxel_mm))
        tr_seconds = float(self.tr_seconds)
        if not (np.isfinite(tr_seconds) and tr_seconds > 0):
            raise DataError(f"Repetition time must be positive, got {self.tr_seconds}")
        object.__setattr__(self, "tr_seconds", tr_seconds)

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def nt(self) -> int:
        """Number of frames."""
        return int(self.data.shape[3])

    def frame(self, t: int) -> Volume3D:
        """Return frame ``t`` as a `Volume3D`."""
        return Volume3D(data=self.data[..., t], voxel_mm=self.voxel_mm)


@dataclass(frozen=True, eq=False)
class CohortStats:
    """Intensity statistics of the time-averaged ROI voxels of a cohort.

    ``vi_sa`` averages every (region, position) sample over the subjects, ``si_sa``
    does the same for the seed voxel of each region. The global moments are taken over
    all (subject, region, position) samples and all (subject, region) seeds
    respectively, using the population standard deviation.
    """
    n_subjects: int
    region_ids: Tuple[int, ...]
    vi_sa: np.ndarray
    """Subject average per region and segment position, shape ``(regions, length)``."""
    si_sa: np.ndarray
    """Subject average of the seed voxel per region, shape ``(regions,)``."""
    global_mean: float
    global_std: float
    seed_mean: float
    seed_std: float
    bin_edges: np.ndarray
    counts: np.ndarray
    """Histogram counts of all ROI samples. Samples outside the histogram range are
    counted in the first or last bin, so the counts always sum to `n_samples`."""
    in_range_fraction: float
    """Fraction of ROI samples inside `in_range_window`."""
    in_range_window: Tuple[float, float]

    @property
    def n_samples(self) -> int:
        """Number of (subject, region, position) samples."""
        return int(self.n_subjects * self.vi_sa.size)
