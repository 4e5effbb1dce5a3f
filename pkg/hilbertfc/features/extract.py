"""
Module for turning time-averaged volumes into spatial correlation matrices.

Every atlas region is represented by the segment of the Hilbert curve that extends
``half_length`` voxels in both directions from the region's seed. Reading the
time-averaged intensities along a segment gives the region's ROI array, and the
correlation matrix of a subject holds the Pearson correlations of all pairs of ROI
arrays. Segments may reach outside the brain; their values are used as they are.

The correlation uses the sample standard deviation (divisor ``N - 1``) together with
the ``1 / (N - 1)`` prefactor, so an array correlates with itself to exactly one. An
array with zero variance correlates to 0 with everything and is flagged as degenerate
instead of producing NaNs.
"""
from __future__ import annotations

import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import BoundsError, ConfigurationError, LengthMismatchError
from ..volumes.models import Volume3D
from .hilbert import HilbertCurve
from .models import CorrelationMatrix, CubeToGrid, Overlap, RoiSegment, SeedAtlas

logger = logging.getLogger(__name__)


class SpatialCorrelation(NamedTuple):
    """Result of `pearson_spatial`."""
    rho: float
    degenerate: bool


def default_offsets(grid_dims: Sequence[int], side: int) -> Tuple[int, int, int]:
    """Offsets that center a grid of ``grid_dims`` inside a cube of ``side`` voxels.

    For the 53x63x52 grid in the 64 cube this is ``(5, 0, 6)``.
    """
    offsets = tuple((side - int(n)) // 2 for n in grid_dims[:3])
    if any(o < 0 for o in offsets):
        raise ConfigurationError(f"Grid {tuple(grid_dims)} does not fit a cube of {side}")
    return offsets


def extract_segment(
    curve: HilbertCurve,
    seed: Sequence[int],
    half_length: int,
    region_id: int = 0,
) -> RoiSegment:
    """Cut the curve segment of ``2 * half_length + 1`` voxels centered on ``seed``.

    Raises:
        BoundsError: if the seed is outside the cube or the segment would leave the
            curve's index range. Segments are never clamped.
    """
    if half_length < 0:
        raise ConfigurationError(f"Half length must be non-negative, got {half_length}")

    seed_index = curve.coord_to_index(*seed)
    start, stop = seed_index - half_length, seed_index + half_length
    if start < 0 or stop >= curve.total_cells:
        raise BoundsError(
            f"Segment [{start}, {stop}] of region {region_id} leaves the curve's "
            f"index range [0, {curve.total_cells})"
        )
    voxel_list = curve.indices_to_coords(np.arange(start, stop + 1))
    return RoiSegment(
        region_id=region_id,
        seed_index=seed_index,
        half_length=half_length,
        voxel_list=voxel_list,
    )


def segments_for_atlas(
    curve: HilbertCurve,
    atlas: SeedAtlas,
    half_length: int,
) -> List[RoiSegment]:
    """Extract the segments of all atlas regions, in atlas order."""
    return [
        extract_segment(curve, region.seed, half_length, region_id=region.region_id)
        for region in atlas.regions
    ]


def check_overlaps(segments: Sequence[RoiSegment]) -> List[Overlap]:
    """Report every pair of segments whose curve index ranges intersect.

    The report is empty if and only if all segments are pairwise disjoint.
    """
    report = []
    for i, first in enumerate(segments):
        for second in segments[i + 1:]:
            shared = min(first.stop, second.stop) - max(first.start, second.start) + 1
            if shared > 0:
                report.append(Overlap(first.region_id, second.region_id, shared))

    if report:
        logger.warning("%d pairs of ROI segments overlap", len(report))
    return report


def roi_signal_array(
    avg: Volume3D,
    segment: RoiSegment,
    cube_to_grid: CubeToGrid,
) -> np.ndarray:
    """Read the intensities of ``avg`` along ``segment``, in curve order.

    Raises:
        BoundsError: if a segment voxel maps outside the volume grid.
    """
    grid = cube_to_grid.to_grid(segment.voxel_list, avg.dims, region_id=segment.region_id)
    return avg.data[grid[:, 0], grid[:, 1], grid[:, 2]]


def _check_arrays(arrays: np.ndarray) -> None:
    if arrays.shape[-1] < 2:
        raise LengthMismatchError(
            f"Correlation needs arrays of length 2 or more, got {arrays.shape[-1]}"
        )


def pearson_spatial(V: np.ndarray, W: np.ndarray) -> SpatialCorrelation:
    """Spatial Pearson correlation of two ROI arrays.

    Returns the correlation clamped to ``[-1, 1]``, and whether one of the arrays was
    constant (in which case the correlation is 0).

    Raises:
        LengthMismatchError: if the arrays differ in length or are shorter than 2.
    """
    V = np.asarray(V, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if V.shape != W.shape or V.ndim != 1:
        raise LengthMismatchError(f"Array shapes {V.shape} and {W.shape} differ")
    _check_arrays(V)

    n = len(V)
    sigma_v, sigma_w = V.std(ddof=1), W.std(ddof=1)
    if sigma_v == 0.0 or sigma_w == 0.0:
        return SpatialCorrelation(0.0, True)

    rho = np.sum((V - V.mean()) / sigma_v * ((W - W.mean()) / sigma_w)) / (n - 1)
    return SpatialCorrelation(float(np.clip(rho, -1.0, 1.0)), False)


def correlation_matrix(
    arrays: np.ndarray,
    subject_id: str,
    label: str,
    half_length: Optional[int] = None,
) -> CorrelationMatrix:
    """Pairwise spatial correlations of ``R`` ROI arrays of equal length.

    The arrays are standardized once and correlated with a single matrix product. Only
    the upper triangle is kept and mirrored, and the diagonal is set to exactly 1, so
    the result is symmetric by construction. Constant arrays are recorded in the
    matrix's ``degenerate`` rows.
    """
    arrays = np.asarray(arrays, dtype=np.float64)
    if arrays.ndim != 2:
        raise LengthMismatchError(f"Expected R arrays of equal length, got {arrays.shape}")
    _check_arrays(arrays)

    n = arrays.shape[1]
    sigma = arrays.std(axis=1, ddof=1)
    degenerate = sigma == 0.0
    scale = np.where(degenerate, 0.0, 1.0 / np.where(degenerate, 1.0, sigma))
    standardized = (arrays - arrays.mean(axis=1, keepdims=True)) * scale[:, None]

    upper = np.triu(standardized @ standardized.T / (n - 1), k=1)
    values = np.clip(upper + upper.T, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)

    if np.any(degenerate):
        logger.warning(
            "Subject %s has %d constant ROI arrays", subject_id, int(degenerate.sum())
        )
    return CorrelationMatrix(
        values=values,
        subject_id=subject_id,
        label=label,
        degenerate=tuple(np.flatnonzero(degenerate)),
        half_length=half_length,
    )


def extract_features(
    avg: Volume3D,
    segments: Sequence[RoiSegment],
    cube_to_grid: CubeToGrid,
    subject_id: str,
    label: str,
) -> CorrelationMatrix:
    """ROI arrays and correlation matrix of one subject's time-averaged volume."""
    arrays = np.stack([roi_signal_array(avg, s, cube_to_grid) for s in segments])
    half_length = segments[0].half_length if segments else None
    return correlation_matrix(arrays, subject_id, label, half_length=half_length)
