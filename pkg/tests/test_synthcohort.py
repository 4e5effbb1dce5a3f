import numpy as np
import pytest

from hilbertfc.exceptions import ConfigurationError, InfeasibleError
from hilbertfc.experiments.models import ExperimentConfig
from hilbertfc.experiments.protocol import run_experiment
from hilbertfc.features.extract import check_overlaps, extract_features, segments_for_atlas
from hilbertfc.features.hilbert import build_curve
from hilbertfc.features.ioports import load_seed_atlas, read_manifest, read_matrix_directory
from hilbertfc.features.models import CubeToGrid, matrix_problems
from hilbertfc.synthcohort.generate import (
    class_loadings,
    gen_cohort_matrices,
    gen_cohort_volumes,
    gen_dataset,
    gen_seed_atlas,
    label_shuffled,
)
from hilbertfc.synthcohort.models import SynthSpec
from hilbertfc.volumes.ioports import read_volume
from hilbertfc.volumes.preprocess import cohort_stats, time_average


def test_atlas_segments_are_disjoint_and_in_grid(synth_spec):
    curve = build_curve(synth_spec.order)
    atlas = gen_seed_atlas(synth_spec, curve)
    segments = segments_for_atlas(curve, atlas, synth_spec.half_length)

    assert atlas.region_ids == tuple(range(1, synth_spec.r_regions + 1))
    assert atlas.regions[0].name == "region_01"
    assert check_overlaps(segments) == []
    assert [s.seed_index for s in segments] == sorted(s.seed_index for s in segments)
    for segment in segments:
        CubeToGrid(synth_spec.offset).to_grid(segment.voxel_list, synth_spec.grid_dims)


def test_atlas_is_deterministic(synth_spec_factory):
    curve = build_curve(4)
    first = gen_seed_atlas(synth_spec_factory(seed=3), curve)
    assert first == gen_seed_atlas(synth_spec_factory(seed=3), curve)
    assert first != gen_seed_atlas(synth_spec_factory(seed=4), curve)


@pytest.mark.parametrize("regions, half_length", [(60, 40), (50, 40)])
def test_atlas_packing_can_be_infeasible(synth_spec_factory, regions, half_length):
    spec = synth_spec_factory(r_regions=regions, half_length=half_length)
    with pytest.raises(InfeasibleError):
        gen_seed_atlas(spec, build_curve(4))


def test_atlas_needs_curve_of_the_spec(synth_spec):
    with pytest.raises(ConfigurationError):
        gen_seed_atlas(synth_spec, build_curve(5))


@pytest.mark.parametrize("kwargs", [
    {"separation": 1.5},
    {"n_per_class": (3,)},
    {"classes": ("CN", "CN")},
    {"grid_dims": (17, 16, 16)},
    {"offset": (1, 0, 0)},
    {"half_length": -1},
    {"region_coupling": -0.1},
])
def test_spec_validation(synth_spec_factory, kwargs):
    with pytest.raises(ConfigurationError):
        synth_spec_factory(**kwargs)


def test_default_spec_is_centered():
    spec = SynthSpec(n_per_class=(1, 1))
    assert spec.grid_dims == (53, 63, 52)
    assert spec.offset == (5, 0, 6)
    assert spec.segment_length == 201


def test_separation_zero_means_identical_classes(synth_spec_factory):
    spec = synth_spec_factory(separation=0.0, r_regions=9)
    assert np.array_equal(class_loadings(spec, 0), class_loadings(spec, 1))


def test_separation_rotates_a_third_of_the_regions(synth_spec_factory):
    spec = synth_spec_factory(separation=1.0, r_regions=9)
    base, other = class_loadings(spec, 0), class_loadings(spec, 1)
    changed = np.any(base != other, axis=1)
    assert changed.sum() == 3
    assert np.allclose(np.linalg.norm(other, axis=1), 0.8)

    with pytest.raises(ConfigurationError):
        class_loadings(spec, 2)


def test_cohort_matrices(synth_spec):
    matrices = gen_cohort_matrices(synth_spec)

    assert [m.subject_id for m in matrices] == [f"sub-{i:04d}" for i in range(1, 13)]
    assert [m.label for m in matrices] == ["CN"] * 6 + ["AD"] * 6
    for matrix in matrices:
        assert matrix.r == synth_spec.r_regions
        assert matrix.half_length == synth_spec.half_length
        assert np.array_equal(matrix.values, matrix.values.T)
        assert np.all(np.diag(matrix.values) == 1.0)


def test_cohort_does_not_depend_on_threads(settings, synth_spec):
    settings.THREADS = 1
    serial = gen_cohort_matrices(synth_spec)
    settings.THREADS = 4
    threaded = gen_cohort_matrices(synth_spec)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(serial, threaded))


def test_classes_differ_at_full_separation():
    spec = SynthSpec(n_per_class=(10, 10), half_length=50, separation=1.0, seed=5)
    values = np.stack([m.values for m in gen_cohort_matrices(spec)])
    cn, ad = values[:10], values[10:]

    def within(group):
        return np.mean([
            np.linalg.norm(group[i] - group[j])
            for i in range(len(group)) for j in range(i + 1, len(group))
        ])

    between = np.mean([np.linalg.norm(a - b) for a in cn for b in ad])
    assert between > (within(cn) + within(ad)) / 2


def test_matrix_path_equals_volume_extraction(synth_spec):
    curve = build_curve(synth_spec.order)
    atlas = gen_seed_atlas(synth_spec, curve)
    segments = segments_for_atlas(curve, atlas, synth_spec.half_length)
    matrices = gen_cohort_matrices(synth_spec)

    for subject, matrix in zip(gen_cohort_volumes(synth_spec, atlas, curve), matrices):
        assert subject.subject_id == matrix.subject_id
        assert subject.volume.dims == (16, 16, 16, synth_spec.nt)
        extracted = extract_features(
            time_average(subject.volume),
            segments,
            CubeToGrid(synth_spec.offset),
            subject.subject_id,
            subject.label,
        )
        assert np.allclose(extracted.values, matrix.values, rtol=0, atol=1e-8)


def test_volume_generation_is_lazy_and_reproducible(synth_spec):
    curve = build_curve(synth_spec.order)
    atlas = gen_seed_atlas(synth_spec, curve)
    subjects = gen_cohort_volumes(synth_spec, atlas, curve)
    assert len(subjects) == synth_spec.n_subjects

    first, again = subjects[0], subjects[0]
    assert first.subject_id == "sub-0001"
    assert first.volume is not again.volume
    assert np.array_equal(first.volume.data, again.volume.data)
    assert subjects[-1].subject_id == f"sub-{synth_spec.n_subjects:04d}"
    assert [s.subject_id for s in subjects[1:3]] == ["sub-0002", "sub-0003"]
    assert [s.label for s in subjects] == ["CN"] * 6 + ["AD"] * 6

    other = gen_cohort_volumes(synth_spec, atlas, curve)[0]
    assert np.array_equal(first.volume.data, other.volume.data)


def test_written_volumes_do_not_depend_on_threads(settings, synth_spec_factory, tmp_path):
    spec = synth_spec_factory(n_per_class=(2, 2))
    settings.THREADS = 1
    gen_dataset(spec, "volumes", tmp_path / "serial")
    settings.THREADS = 3
    gen_dataset(spec, "volumes", tmp_path / "threaded")

    for name in ("manifest.csv", "sub-0001.vol", "sub-0004.vol"):
        serial = (tmp_path / "serial" / name).read_bytes()
        assert serial == (tmp_path / "threaded" / name).read_bytes()


def test_label_shuffled(synth_spec):
    matrices = gen_cohort_matrices(synth_spec)
    shuffled = label_shuffled(matrices, seed=1)

    assert sorted(m.label for m in shuffled) == sorted(m.label for m in matrices)
    assert [m.label for m in shuffled] != [m.label for m in matrices]
    assert all(np.array_equal(a.values, b.values) for a, b in zip(shuffled, matrices))
    assert [m.label for m in label_shuffled(matrices, seed=1)] == [m.label for m in shuffled]


def test_gen_dataset_matrices(synth_spec, tmp_path):
    manifest = gen_dataset(synth_spec, "matrices", tmp_path)
    assert manifest == tmp_path / "manifest.csv"

    atlas = load_seed_atlas(tmp_path / "atlas.txt", side=16)
    assert len(atlas) == synth_spec.r_regions

    written = read_matrix_directory(tmp_path)
    generated = gen_cohort_matrices(synth_spec)
    assert [m.label for m in written] == [m.label for m in generated]
    assert all(np.array_equal(a.values, b.values) for a, b in zip(written, generated))


@pytest.mark.parametrize("file_format, suffix", [("internal", ".vol"), ("nifti", ".nii")])
def test_gen_dataset_volumes(synth_spec_factory, tmp_path, file_format, suffix):
    spec = synth_spec_factory(n_per_class=(2, 2))
    gen_dataset(spec, "volumes", tmp_path, file_format=file_format)

    manifest = read_manifest(tmp_path)
    assert list(manifest["label"]) == ["CN", "CN", "AD", "AD"]
    assert all(path.suffix == suffix for path in manifest["path"])
    assert read_volume(manifest["path"][0]).dims == (16, 16, 16, spec.nt)


def test_gen_dataset_rejects_unknown_mode(synth_spec, tmp_path):
    with pytest.raises(ConfigurationError):
        gen_dataset(synth_spec, "images", tmp_path)
    with pytest.raises(ConfigurationError):
        gen_dataset(synth_spec, "volumes", tmp_path, file_format="analyze")


@pytest.mark.parametrize("separation", [0.0, 1.0])
def test_hundreds_of_matrices_keep_the_invariants(separation):
    spec = SynthSpec(n_per_class=(125, 125), half_length=50, separation=separation, seed=9)
    dataset = gen_cohort_matrices(spec)
    assert len(dataset) == 250

    for matrix in dataset:
        values = matrix.values
        assert matrix_problems(values) == []
        assert values.shape == (90, 90)
        assert np.array_equal(values, values.T)
        assert np.all(np.diag(values) == 1.0)
        assert np.all(np.isfinite(values))
        assert np.all(np.abs(values) <= 1.0)


@pytest.mark.slow
def test_default_cohort_matches_intensity_calibration():
    spec = SynthSpec(n_per_class=(5, 5), nt=8, seed=1)
    curve = build_curve(spec.order)
    atlas = gen_seed_atlas(spec, curve)
    segments = segments_for_atlas(curve, atlas, spec.half_length)

    averages = [time_average(s.volume) for s in gen_cohort_volumes(spec, atlas, curve)]
    stats = cohort_stats(averages, segments, offset=spec.offset)
    assert abs(stats.global_mean - 12_692) <= 500
    assert abs(stats.in_range_fraction - 0.71) <= 0.10


@pytest.mark.slow
@pytest.mark.parametrize("separation, shuffle, low, high", [
    (1.0, False, 90.0, 100.0),
    (0.0, False, 40.0, 60.0),
    (1.0, True, 40.0, 60.0),
])
def test_net2_learns_only_a_real_signal(separation, shuffle, low, high):
    spec = SynthSpec(n_per_class=(100, 100), half_length=50, separation=separation, seed=2)
    dataset = gen_cohort_matrices(spec)
    if shuffle:
        dataset = label_shuffled(dataset, seed=3)

    config = ExperimentConfig(arch="net2", half_length=50)
    report = run_experiment(dataset, config)
    accuracy = report.aggregate().set_index("metric").loc["acc", "mean"]
    assert low <= accuracy <= high
