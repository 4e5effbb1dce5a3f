"""
Generation of synthetic cohorts with a controllable class signal.

The spatial profile of region ``j`` along its curve segment mixes ``K`` latent signal
patterns shared by all regions of a subject with a pattern of its own,

    p_j = L_j · g + sqrt(1 - |L_j|²) · e_j,

where ``g`` (``K`` patterns) and ``e_j`` are independent standard normal draws of
segment length. Two profiles then correlate with ``L_j · L_k`` in expectation, so the
loadings ``L`` fix the correlation structure and every realization is a genuine sample
correlation matrix. Classes share the base loadings ``L0`` except on a third of the
regions, whose loadings are rotated within the latent space by a class specific
orthogonal map, blended in with weight ``separation``. At ``separation = 0`` all classes
use the same loadings, i.e. the same distribution.

The volume path writes ``mean + s_j · p_j`` into the segment voxels, with a log-normal
regional scale ``s_j`` whose mean square is the intensity variance, and fills the rest
of the grid with independent normal draws. Every voxel fluctuates over time around that
value with zero temporal mean; ROI voxels share part of their fluctuation with the rest
of their region. The time average of a volume therefore holds exactly the spatial
profiles, and the matrix path (which skips the volumes) produces the same matrices as
extracting them from unsmoothed volumes.

Random streams are derived from the master seed: one for the loadings, one for the
atlas and one per subject, so subjects can be generated in any order or in parallel.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import dataclasses
import logging
import time
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from django.conf import settings
from joblib import Parallel, delayed

from ..exceptions import ConfigurationError, InfeasibleError
from ..features.extract import correlation_matrix, segments_for_atlas
from ..features.hilbert import HilbertCurve, build_curve
from ..features.ioports import write_manifest, write_matrix, write_seed_atlas
from ..features.models import CorrelationMatrix, CubeToGrid, Region, SeedAtlas
from ..volumes.ioports import VOLUME_SUFFIXES, write_volume
from ..volumes.models import Volume4D
from .models import SynthSpec, SynthSubject

logger = logging.getLogger(__name__)

N_FACTORS = 4
BASE_LOADING_NORM = 0.8
MAX_LOADING_NORM = 0.9
LOADING_JITTER = 0.05
"""Standard deviation of the per-subject perturbation of the class loadings."""
SCALE_LOG_SD = 0.6
"""Log-space standard deviation of the regional intensity scales."""
MODES = ("volumes", "matrices")

_LOADINGS_STREAM = (0, 0)
_ATLAS_STREAM = (0, 1)
_SUBJECT_STREAM = 1


def _in_grid(spec: SynthSpec, curve: HilbertCurve) -> np.ndarray:
    """Which curve indices map into the grid."""
    grid = curve.coordinates - np.asarray(spec.offset)
    return np.all((grid >= 0) & (grid < np.asarray(spec.grid_dims)), axis=1)


def gen_seed_atlas(spec: SynthSpec, curve: HilbertCurve) -> SeedAtlas:
    """Place ``spec.r_regions`` seeds whose segments lie in the grid and are disjoint.

    Candidate centers are the curve indices whose whole segment maps into the grid.
    They are visited in a seeded random order and accepted greedily when they are more
    than ``2 * half_length`` indices away from every accepted center. Regions are
    numbered in curve order.

    Raises:
        ConfigurationError: if ``curve`` is not of order ``spec.order``.
        InfeasibleError: if the regions cannot be packed into the grid.
    """
    if curve.order != spec.order:
        raise ConfigurationError(
            f"Curve of order {curve.order} does not match the cohort's order {spec.order}"
        )
    half, length = spec.half_length, spec.segment_length
    inside = _in_grid(spec, curve)
    if spec.r_regions * length > int(inside.sum()):
        raise InfeasibleError(
            f"{spec.r_regions} segments of {length} voxels need more than the "
            f"{int(inside.sum())} in-grid curve cells"
        )

    # segment [h - half, h + half] is valid when all of its cells are in the grid
    running = np.concatenate([[0], np.cumsum(inside)])
    centers = np.arange(half, curve.total_cells - half)
    valid = running[centers + half + 1] - running[centers - half] == length
    candidates = centers[valid]

    rng = np.random.default_rng([spec.seed, *_ATLAS_STREAM])
    blocked = np.zeros(curve.total_cells, dtype=bool)
    chosen = []
    for center in rng.permutation(candidates):
        if blocked[center]:
            continue
        chosen.append(int(center))
        blocked[max(0, center - 2 * half):center + 2 * half + 1] = True
        if len(chosen) == spec.r_regions:
            break
    else:
        raise InfeasibleError(
            f"Could only place {len(chosen)} of {spec.r_regions} disjoint segments of "
            f"{length} voxels in the grid {spec.grid_dims}"
        )

    width = max(2, len(str(spec.r_regions)))
    regions = tuple(
        Region(
            region_id=i,
            name=f"region_{i:0{width}d}",
            seed=curve.index_to_coord(center),
        )
        for i, center in enumerate(sorted(chosen), start=1)
    )
    logger.debug(f"Placed {len(regions)} seeds with half length {half}")
    return SeedAtlas(regions=regions)


def _class_rotation(class_index: int) -> np.ndarray:
    """Orthogonal map of the latent space for a class: a cyclic shift with one sign flip."""
    rotation = np.roll(np.eye(N_FACTORS), class_index, axis=1)
    rotation[:, 0] *= -1.0
    return rotation


def class_loadings(spec: SynthSpec, class_index: int) -> np.ndarray:
    """Latent factor loadings ``(R, K)`` of class number ``class_index`` of the cohort.

    Every row has a norm of at most 0.8. The first class always has the base loadings.
    """
    if not 0 <= class_index < len(spec.classes):
        raise ConfigurationError(
            f"Class index {class_index} out of range for classes {spec.classes}"
        )
    rng = np.random.default_rng([spec.seed, *_LOADINGS_STREAM])
    base = rng.standard_normal((spec.r_regions, N_FACTORS))
    base *= BASE_LOADING_NORM / np.linalg.norm(base, axis=1, keepdims=True)
    affected = np.sort(rng.choice(spec.r_regions, size=spec.r_regions // 3, replace=False))

    loadings = base.copy()
    if class_index > 0:
        rotated = base[affected] @ _class_rotation(class_index)
        loadings[affected] = (1.0 - spec.separation) * base[affected] + spec.separation * rotated
    return loadings


def _subject_ids(spec: SynthSpec) -> List[tuple]:
    """``(index, subject id, class index)`` of every subject, grouped by class."""
    width = max(4, len(str(spec.n_subjects)))
    subjects, i = [], 0
    for class_index, size in enumerate(spec.n_per_class):
        for _ in range(size):
            subjects.append((i, f"sub-{i + 1:0{width}d}", class_index))
            i += 1
    return subjects


def _subject_profiles(
    spec: SynthSpec,
    loadings: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Spatial profiles ``(R, segment length)`` of one subject with unit variance."""
    jittered = loadings + LOADING_JITTER * rng.standard_normal(loadings.shape)
    norms = np.linalg.norm(jittered, axis=1, keepdims=True)
    jittered *= np.minimum(1.0, MAX_LOADING_NORM / np.maximum(norms, 1e-12))

    shared = rng.standard_normal((N_FACTORS, spec.segment_length))
    own = rng.standard_normal((spec.r_regions, spec.segment_length))
    unique_weight = np.sqrt(1.0 - np.sum(jittered**2, axis=1))
    return jittered @ shared + unique_weight[:, None] * own


def _subject_rng(spec: SynthSpec, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, _SUBJECT_STREAM, index])


def _subject_matrix(spec: SynthSpec, subject: tuple, loadings: np.ndarray) -> CorrelationMatrix:
    index, subject_id, class_index = subject
    profiles = _subject_profiles(spec, loadings, _subject_rng(spec, index))
    return correlation_matrix(
        profiles, subject_id, spec.classes[class_index], half_length=spec.half_length,
    )


def gen_cohort_matrices(spec: SynthSpec) -> List[CorrelationMatrix]:
    """Correlation matrices of the whole cohort, without generating volumes.

    The matrices are ordered by subject id and carry their class as label.
    """
    start_time = time.perf_counter()
    loadings = [class_loadings(spec, k) for k in range(len(spec.classes))]
    matrices = Parallel(n_jobs=settings.THREADS, prefer="threads")(
        delayed(_subject_matrix)(spec, subject, loadings[subject[2]])
        for subject in _subject_ids(spec)
    )
    logger.info(
        "Generating %(count)d matrices took %(time).3f s",
        {"count": len(matrices), "time": time.perf_counter() - start_time},
    )
    return list(matrices)


def _segment_voxels(spec: SynthSpec, atlas: SeedAtlas, curve: HilbertCurve) -> List[np.ndarray]:
    """Grid coordinates of every region's segment, in atlas order."""
    to_grid = CubeToGrid(offset=spec.offset)
    return [
        to_grid.to_grid(segment.voxel_list, spec.grid_dims, region_id=segment.region_id)
        for segment in segments_for_atlas(curve, atlas, spec.half_length)
    ]


def _subject_volume(
    spec: SynthSpec,
    subject: tuple,
    loadings: np.ndarray,
    voxels: Sequence[np.ndarray],
) -> SynthSubject:
    index, subject_id, class_index = subject
    rng = _subject_rng(spec, index)
    profiles = _subject_profiles(spec, loadings, rng)

    scales = rng.lognormal(
        mean=np.log(spec.intensity_std) - SCALE_LOG_SD**2,
        sigma=SCALE_LOG_SD,
        size=spec.r_regions,
    )
    mean_image = rng.normal(spec.intensity_mean, spec.intensity_std, size=spec.grid_dims)
    for j, grid in enumerate(voxels):
        mean_image[grid[:, 0], grid[:, 1], grid[:, 2]] = (
            spec.intensity_mean + scales[j] * profiles[j]
        )

    coupling = spec.region_coupling
    region_signals = rng.standard_normal((spec.r_regions, spec.nt))
    data = rng.standard_normal((*spec.grid_dims, spec.nt))
    for j, grid in enumerate(voxels):
        own = data[grid[:, 0], grid[:, 1], grid[:, 2]]
        data[grid[:, 0], grid[:, 1], grid[:, 2]] = (
            coupling * region_signals[j] + np.sqrt(1.0 - coupling**2) * own
        )
    data -= data.mean(axis=3, keepdims=True)
    data *= spec.fluctuation
    data += mean_image[..., None]

    volume = Volume4D(data=data, voxel_mm=spec.voxel_mm, tr_seconds=spec.tr_seconds)
    return SynthSubject(subject_id, spec.classes[class_index], volume)


class CohortVolumes(Sequence[SynthSubject]):
    """The subjects' 4D volumes of a synthetic cohort, ordered by subject id.

    A volume is generated when its subject is accessed and is not kept, so iterating
    holds one subject at a time. Accessing a subject twice gives identical volumes.
    """

    def __init__(self, spec: SynthSpec, atlas: SeedAtlas, curve: HilbertCurve):
        self.spec = spec
        self._loadings = [class_loadings(spec, k) for k in range(len(spec.classes))]
        self._voxels = _segment_voxels(spec, atlas, curve)
        self._subjects = _subject_ids(spec)

    def __len__(self) -> int:
        return len(self._subjects)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        subject = self._subjects[index]
        return _subject_volume(self.spec, subject, self._loadings[subject[2]], self._voxels)


def gen_cohort_volumes(
    spec: SynthSpec,
    atlas: SeedAtlas,
    curve: HilbertCurve,
) -> CohortVolumes:
    """All subjects' 4D volumes with their labels, generated on access."""
    return CohortVolumes(spec, atlas, curve)


def _write_subject_volume(
    cohort: CohortVolumes,
    index: int,
    out_dir: Path,
    file_format: str,
) -> tuple:
    subject = cohort[index]
    path = out_dir / f"{subject.subject_id}{VOLUME_SUFFIXES[file_format]}"
    write_volume(subject.volume, path, file_format=file_format)
    logger.debug(f"Wrote volume of {subject.subject_id} to {path}")
    return subject.subject_id, subject.label, path.name


def label_shuffled(dataset: Sequence[CorrelationMatrix], seed: int) -> List[CorrelationMatrix]:
    """Copy of ``dataset`` with the labels randomly permuted among the subjects.

    Class sizes stay the same but labels no longer relate to the matrices, which makes
    the cohort a null control for the classifiers.
    """
    labels = [m.label for m in dataset]
    permutation = np.random.default_rng(seed).permutation(len(labels))
    return [
        dataclasses.replace(matrix, label=labels[p])
        for matrix, p in zip(dataset, permutation)
    ]


def gen_dataset(
    spec: SynthSpec,
    mode: str,
    out_dir: Union[str, Path],
    file_format: str = "internal",
) -> Path:
    """Write a synthetic cohort into ``out_dir``: the seed atlas (``atlas.txt``), one
    volume or matrix file per subject and a ``manifest.csv``.

    ``mode`` is ``"volumes"`` or ``"matrices"``; ``file_format`` picks the volume
    format. Returns the path of the manifest.

    Raises:
        ConfigurationError: for an unknown mode or volume format.
        InfeasibleError: if the atlas cannot be packed.
    """
    if mode not in MODES:
        raise ConfigurationError(f"Unknown mode '{mode}', choose from {list(MODES)}")
    if file_format not in VOLUME_SUFFIXES:
        raise ConfigurationError(
            f"Unknown volume format '{file_format}', choose from {list(VOLUME_SUFFIXES)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    curve = build_curve(spec.order)
    atlas = gen_seed_atlas(spec, curve)
    write_seed_atlas(atlas, out_dir / "atlas.txt")

    entries = []
    if mode == "matrices":
        for matrix in gen_cohort_matrices(spec):
            path = write_matrix(matrix, out_dir)
            entries.append((matrix.subject_id, matrix.label, path.name))
    else:
        start_time = time.perf_counter()
        cohort = gen_cohort_volumes(spec, atlas, curve)
        entries = Parallel(n_jobs=settings.THREADS, prefer="threads")(
            delayed(_write_subject_volume)(cohort, index, out_dir, file_format)
            for index in range(len(cohort))
        )
        logger.info(
            "Generating and writing %(count)d volumes took %(time).3f s",
            {"count": len(entries), "time": time.perf_counter() - start_time},
        )

    manifest = write_manifest(entries, out_dir)
    logger.info(f"Wrote {len(entries)} {mode} of a synthetic cohort to {out_dir}")
    return manifest
