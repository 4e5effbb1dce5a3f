"""
Regional homogeneity (ReHo) of ROI segments.

For every voxel pair of a segment, the time series are correlated with population
sums over all ``M`` frames (means subtracted). A region's ReHo is the mean of that
pairwise matrix over all ordered pairs *including* the diagonal, i.e. the sum divided
by the squared region size. Constant time series correlate to 0 with everything,
themselves included, and are flagged.
"""
from __future__ import annotations

import logging
import time
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from joblib import Parallel, delayed

from ..exceptions import DataError, InsufficientSamplesError
from ..volumes.models import Volume4D
from .models import CubeToGrid, RehoSummary, RehoTable, RoiSegment

logger = logging.getLogger(__name__)


class TimeCorrelation(NamedTuple):
    """Result of `reho_pairwise`."""
    values: np.ndarray
    """Pairwise time correlation matrix of the segment's voxels."""
    degenerate: np.ndarray
    """Boolean mask of voxels with a constant time series."""


def reho_pairwise(
    vol: Volume4D,
    segment: RoiSegment,
    cube_to_grid: CubeToGrid,
) -> TimeCorrelation:
    """Pearson time correlation of all voxel pairs of ``segment``.

    Raises:
        InsufficientSamplesError: if the volume has fewer than two frames.
        BoundsError: if a segment voxel maps outside the volume grid.
    """
    if vol.nt < 2:
        raise InsufficientSamplesError(f"ReHo needs at least 2 frames, got {vol.nt}")

    grid = cube_to_grid.to_grid(segment.voxel_list, vol.dims, region_id=segment.region_id)
    series = vol.data[grid[:, 0], grid[:, 1], grid[:, 2], :]
    deviations = series - series.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(deviations**2, axis=1))

    degenerate = norms == 0.0
    scale = np.where(degenerate, 0.0, 1.0 / np.where(degenerate, 1.0, norms))
    normalized = deviations * scale[:, None]

    upper = np.triu(normalized @ normalized.T, k=1)
    values = np.clip(upper + upper.T, -1.0, 1.0)
    np.fill_diagonal(values, np.where(degenerate, 0.0, 1.0))
    return TimeCorrelation(values, degenerate)


def reho_region(pc: np.ndarray) -> float:
    """ReHo of one region: the mean of ``pc`` over all entries, diagonal included."""
    pc = np.asarray(pc, dtype=np.float64)
    if pc.ndim != 2 or pc.shape[0] != pc.shape[1]:
        raise DataError(f"Pairwise correlation matrix must be square, got {pc.shape}")
    size = pc.shape[0]
    return float(pc.sum() / (size * size))


def _literal_and_sample_std(values: np.ndarray, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    n = values.shape[axis]
    squares = np.sum((values - values.mean(axis=axis, keepdims=True))**2, axis=axis)
    literal = np.sqrt(squares) / n
    sample = np.sqrt(squares / (n - 1)) if n > 1 else np.zeros_like(squares)
    return literal, sample


def reho_summary(table: np.ndarray) -> RehoSummary:
    """Per-subject and per-region means and standard deviations of a ReHo table.

    ``table`` has one row per subject and one column per region.
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.size == 0:
        raise DataError(f"ReHo table must be a nonempty 2D array, got {table.shape}")

    subject_literal, subject_sample = _literal_and_sample_std(table, axis=1)
    region_literal, region_sample = _literal_and_sample_std(table, axis=0)
    return RehoSummary(
        subject_mean=table.mean(axis=1),
        region_mean=table.mean(axis=0),
        subject_std_literal=subject_literal,
        subject_std_sample=subject_sample,
        region_std_literal=region_literal,
        region_std_sample=region_sample,
    )


def subject_reho(
    vol: Volume4D,
    segments: Sequence[RoiSegment],
    cube_to_grid: CubeToGrid,
) -> Tuple[np.ndarray, List[int]]:
    """ReHo of every segment for one subject, and the regions with constant voxels."""
    values, degenerate = [], []
    for segment in segments:
        pairwise = reho_pairwise(vol, segment, cube_to_grid)
        values.append(reho_region(pairwise.values))
        if np.any(pairwise.degenerate):
            degenerate.append(segment.region_id)
    return np.array(values), degenerate


def table_from_rows(
    subject_ids: Sequence[str],
    rows: Sequence[np.ndarray],
    region_ids: Sequence[int],
    degenerate: Optional[Dict[str, List[int]]] = None,
) -> RehoTable:
    """Assemble a `RehoTable` (with its summary) from per-subject ReHo rows."""
    if not rows:
        raise DataError("ReHo table needs at least one subject")
    values = np.stack(rows)
    return RehoTable(
        values=values,
        subject_ids=tuple(subject_ids),
        region_ids=tuple(region_ids),
        summary=reho_summary(values),
        degenerate=dict(degenerate or {}),
    )


def reho_table(
    subjects: Iterable[Tuple[str, Volume4D]],
    segments: Sequence[RoiSegment],
    cube_to_grid: CubeToGrid,
) -> RehoTable:
    """Compute the ReHo table of a cohort of ``(subject_id, volume)`` pairs.

    ``subjects`` may be a lazy iterable, volumes are then loaded one at a time. The
    regions are processed on `settings.THREADS` worker threads; the result does not
    depend on the number of threads.
    """
    start_time = time.perf_counter()
    subject_ids, rows, degenerate = [], [], {}
    with Parallel(n_jobs=settings.THREADS, prefer="threads") as parallel:
        for subject_id, vol in subjects:
            results = parallel(
                delayed(reho_pairwise)(vol, segment, cube_to_grid) for segment in segments
            )
            subject_ids.append(subject_id)
            rows.append(np.array([reho_region(r.values) for r in results]))
            regions = [s.region_id for s, r in zip(segments, results) if r.degenerate.any()]
            if regions:
                degenerate[subject_id] = regions

    logger.info(
        "ReHo of %(count)d subjects took %(time).3f s",
        {"count": len(subject_ids), "time": time.perf_counter() - start_time},
    )
    return table_from_rows(subject_ids, rows, [s.region_id for s in segments], degenerate)
