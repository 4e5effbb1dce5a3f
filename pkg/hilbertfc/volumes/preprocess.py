"""
Preprocessing of resting-state volumes and cohort intensity statistics.

The per-subject chain is `slice_time_correct`, `gaussian_smooth` and `time_average`,
bundled in `preprocess_subject`. All functions are pure: they return new volumes and
never touch their inputs, so subjects may be processed in parallel.

Slice timing realigns every slice to the acquisition time of the middle slice. Slice
``k`` (1-based, ``N`` slices) is shifted by ``(N/2 + 1 - k) * TR / N`` seconds, i.e.
the corrected value at frame ``t`` is the original series sampled at the fractional
frame ``t + shift / TR``, linearly interpolated and clamped to the first and last
observation. For even ``N`` the slice ``k = N/2 + 1`` is not shifted at all and is
copied bitwise; for odd ``N`` no slice has a zero shift.

Smoothing is a separable Gaussian per frame with ``sigma = FWHM / (2 sqrt(2 ln 2))``
in millimeters, truncated at four sigma and normalized to one, with edge voxels
replicated beyond the boundary.
"""
from __future__ import annotations

import logging
import time
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings
from scipy.ndimage import gaussian_filter

from ..exceptions import (
    BoundsError,
    ConfigurationError,
    DataError,
    InsufficientSamplesError,
)
from .models import CohortStats, Volume3D, Volume4D

logger = logging.getLogger(__name__)

FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))
TRUNCATE_SIGMAS = 4.0


class DegenerateHistogramError(DataError):
    """Raised by `nmi` when a volume has zero intensity range, i.e. zero entropy."""


def slice_shifts(n_slices: int, tr_seconds: float) -> np.ndarray:
    """Return the time shift in seconds of every slice ``k = 1..n_slices``.

    With 36 slices and a TR of 2.2 s, the first slice is shifted by 1.1 s and slice 19
    not at all.
    """
    if n_slices < 1:
        raise ConfigurationError(f"Number of slices must be positive, got {n_slices}")
    k = np.arange(1, n_slices + 1)
    return (n_slices / 2 + 1 - k) * tr_seconds / n_slices


def slice_time_correct(vol: Volume4D, slice_axis: int = 2) -> Volume4D:
    """Shift every slice's time series to the acquisition time of the middle slice.

    Raises:
        InsufficientSamplesError: if the volume has fewer than two frames.
        ConfigurationError: if ``slice_axis`` is not 0, 1 or 2.
    """
    if slice_axis not in (0, 1, 2):
        raise ConfigurationError(f"Slice axis must be 0, 1 or 2, got {slice_axis}")
    nt = vol.nt
    if nt < 2:
        raise InsufficientSamplesError(
            f"Slice timing correction needs at least 2 frames, got {nt}"
        )

    n_slices = vol.dims[slice_axis]
    shifts = slice_shifts(n_slices, vol.tr_seconds)
    frames = np.arange(nt)
    corrected = np.empty_like(vol.data)

    for s, shift in enumerate(shifts):
        index = [slice(None)] * 4
        index[slice_axis] = s
        index = tuple(index)
        series = vol.data[index]

        if shift == 0.0:
            corrected[index] = series
            continue

        position = np.clip(frames + shift / vol.tr_seconds, 0, nt - 1)
        lower = np.floor(position).astype(np.int64)
        upper = np.minimum(lower + 1, nt - 1)
        fraction = position - lower
        start, stop = series[..., lower], series[..., upper]
        corrected[index] = start + fraction * (stop - start)

    logger.debug("Slice timing corrected %d slices along axis %d", n_slices, slice_axis)
    return Volume4D(data=corrected, voxel_mm=vol.voxel_mm, tr_seconds=vol.tr_seconds)


def fwhm_to_sigma(fwhm_mm: float, voxel_mm: Sequence[float]) -> np.ndarray:
    """Convert a FWHM in millimeters to the per-axis Gaussian sigma in voxels."""
    return fwhm_mm / FWHM_PER_SIGMA / np.asarray(voxel_mm, dtype=np.float64)


def gaussian_smooth(
    vol: Union[Volume3D, Volume4D],
    fwhm_mm: float,
) -> Union[Volume3D, Volume4D]:
    """Smooth every frame of ``vol`` with a 3D Gaussian of the given FWHM.

    Raises:
        ConfigurationError: if ``fwhm_mm`` is not positive.
    """
    if not (np.isfinite(fwhm_mm) and fwhm_mm > 0):
        raise ConfigurationError(f"FWHM must be positive, got {fwhm_mm}")

    sigma = list(fwhm_to_sigma(fwhm_mm, vol.voxel_mm))
    if isinstance(vol, Volume4D):
        sigma.append(0.0)

    smoothed = gaussian_filter(
        vol.data, sigma=sigma, mode="nearest", truncate=TRUNCATE_SIGMAS,
    )
    if isinstance(vol, Volume4D):
        return Volume4D(data=smoothed, voxel_mm=vol.voxel_mm, tr_seconds=vol.tr_seconds)
    return Volume3D(data=smoothed, voxel_mm=vol.voxel_mm)


def time_average(vol: Volume4D) -> Volume3D:
    """Average every voxel over the frames."""
    return Volume3D(data=vol.data.mean(axis=3), voxel_mm=vol.voxel_mm)


def preprocess_series(
    vol: Volume4D,
    slice_axis: int = 2,
    fwhm_mm: float = 8.0,
) -> Volume4D:
    """Slice timing correction followed by smoothing.

    Single-frame volumes skip the slice timing step, a ``fwhm_mm`` of zero skips the
    smoothing step.
    """
    if vol.nt >= 2:
        vol = slice_time_correct(vol, slice_axis=slice_axis)
    else:
        logger.warning("Single-frame volume, skipping slice timing correction")

    if fwhm_mm != 0:
        vol = gaussian_smooth(vol, fwhm_mm)
    return vol


def preprocess_subject(
    vol: Volume4D,
    slice_axis: int = 2,
    fwhm_mm: float = 8.0,
) -> Volume3D:
    """Full per-subject chain: slice timing, smoothing and time average."""
    start_time = time.perf_counter()
    average = time_average(preprocess_series(vol, slice_axis, fwhm_mm))
    logger.debug(
        "Preprocessing took %(time).3f s", {"time": time.perf_counter() - start_time}
    )
    return average


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def nmi(a: Volume3D, b: Volume3D, bins: int = 64) -> float:
    """Normalized mutual information ``I(X, Y) / sqrt(H(X) H(Y))`` of two volumes.

    Both volumes are binned into ``bins`` equal-width bins spanning their own
    ``[min, max]``. Entropies are in nats.

    Raises:
        DegenerateHistogramError: if a volume has zero intensity range.
    """
    if a.dims != b.dims:
        raise DataError(f"Volumes differ in shape: {a.dims} vs {b.dims}")
    if bins < 2:
        raise ConfigurationError(f"NMI needs at least 2 bins, got {bins}")

    x, y = a.data.ravel(), b.data.ravel()
    ranges = []
    for name, values in (("first", x), ("second", y)):
        low, high = float(values.min()), float(values.max())
        if low == high:
            raise DegenerateHistogramError(
                f"The {name} volume has zero intensity range ({low})"
            )
        ranges.append([low, high])

    joint, _, _ = np.histogram2d(x, y, bins=bins, range=ranges)
    p_xy = joint / joint.sum()
    p_x, p_y = p_xy.sum(axis=1), p_xy.sum(axis=0)

    h_x, h_y = _entropy(p_x), _entropy(p_y)
    if h_x == 0.0 or h_y == 0.0:
        raise DegenerateHistogramError("A volume occupies a single histogram bin")

    occupied = p_xy > 0
    outer = np.outer(p_x, p_y)
    mutual = float(np.sum(p_xy[occupied] * np.log(p_xy[occupied] / outer[occupied])))
    return mutual / np.sqrt(h_x * h_y)


def cohort_stats(
    time_avg_volumes: Sequence[Volume3D],
    segments: Sequence,
    seed_voxels: Optional[np.ndarray] = None,
    offset: Tuple[int, int, int] = (0, 0, 0),
    bin_width: Optional[float] = None,
    value_range: Optional[Tuple[float, float]] = None,
    in_range_window: Optional[Tuple[float, float]] = None,
) -> CohortStats:
    """Intensity statistics of the ROI voxels over a cohort of time-averaged volumes.

    ``segments`` are `features.models.RoiSegment` objects of equal length whose
    voxels are cube coordinates; ``offset`` is the position of the volume grid's origin
    inside the curve cube. ``seed_voxels`` defaults to the center voxel of each segment.
    The histogram covers ``value_range`` in bins of ``bin_width``.

    Raises:
        BoundsError: if a segment voxel falls outside the volume grid.
    """
    if not time_avg_volumes:
        raise DataError("Cohort statistics need at least one subject")
    if not segments:
        raise DataError("Cohort statistics need at least one ROI segment")
    lengths = {len(segment.voxel_list) for segment in segments}
    if len(lengths) != 1:
        raise DataError(f"ROI segments differ in length: {sorted(lengths)}")

    bin_width = settings.PIPELINE_DEFAULTS["bin_width"] if bin_width is None else bin_width
    low, high = settings.HISTOGRAM_RANGE if value_range is None else value_range
    window = settings.IN_RANGE_WINDOW if in_range_window is None else in_range_window
    if not (bin_width > 0 and high > low):
        raise ConfigurationError(
            f"Invalid histogram: bin width {bin_width} over [{low}, {high}]"
        )

    offset = np.asarray(offset, dtype=np.int64)
    dims = np.asarray(time_avg_volumes[0].dims)
    if seed_voxels is None:
        seed_voxels = np.array([s.voxel_list[len(s.voxel_list) // 2] for s in segments])
    seed_voxels = np.asarray(seed_voxels, dtype=np.int64) - offset

    grids = []
    for segment in segments:
        grid = np.asarray(segment.voxel_list) - offset
        if np.any((grid < 0) | (grid >= dims)):
            raise BoundsError(
                f"Segment of region {segment.region_id} leaves the volume grid"
            )
        grids.append(grid)
    voxels = np.concatenate(grids)
    if np.any((seed_voxels < 0) | (seed_voxels >= dims)):
        raise BoundsError("A seed voxel lies outside the volume grid")

    samples, seeds = [], []
    for vol in time_avg_volumes:
        if vol.dims != tuple(dims):
            raise DataError(f"Volume grid {vol.dims} differs from {tuple(dims)}")
        samples.append(vol.data[voxels[:, 0], voxels[:, 1], voxels[:, 2]])
        seeds.append(vol.data[seed_voxels[:, 0], seed_voxels[:, 1], seed_voxels[:, 2]])
    samples = np.stack(samples).reshape(len(time_avg_volumes), len(segments), -1)
    seeds = np.stack(seeds)

    n_bins = int(np.ceil((high - low) / bin_width))
    edges = low + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(np.clip(samples, edges[0], edges[-1]), bins=edges)
    in_range = (samples >= window[0]) & (samples <= window[1])

    return CohortStats(
        n_subjects=len(time_avg_volumes),
        region_ids=tuple(int(s.region_id) for s in segments),
        vi_sa=samples.mean(axis=0),
        si_sa=seeds.mean(axis=0),
        global_mean=float(samples.mean()),
        global_std=float(samples.std()),
        seed_mean=float(seeds.mean()),
        seed_std=float(seeds.std()),
        bin_edges=edges,
        counts=counts,
        in_range_fraction=float(in_range.mean()),
        in_range_window=(float(window[0]), float(window[1])),
    )
