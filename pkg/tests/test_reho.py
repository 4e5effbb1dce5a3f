import numpy as np
import pandas as pd
import pytest

from hilbertfc.exceptions import DataError, InsufficientSamplesError
from hilbertfc.features.extract import extract_segment, segments_for_atlas
from hilbertfc.features.hilbert import build_curve
from hilbertfc.features.ioports import write_reho_table
from hilbertfc.features.models import CubeToGrid
from hilbertfc.features.reho import (
    reho_pairwise,
    reho_region,
    reho_summary,
    reho_table,
    subject_reho,
    table_from_rows,
)
from hilbertfc.volumes.models import Volume4D

ORIGIN = CubeToGrid((0, 0, 0))


def naive_reho(series):
    """Mean over all ordered voxel pairs of the population Pearson correlation."""
    n = len(series)
    total = 0.0
    for a in series:
        for b in series:
            da, db = a - a.mean(), b - b.mean()
            denominator = np.sqrt(np.sum(da**2) * np.sum(db**2))
            total += 0.0 if denominator == 0 else np.sum(da * db) / denominator
    return total / (n * n)


@pytest.fixture
def segment():
    return extract_segment(build_curve(4), (8, 8, 8), 4, region_id=3)


def test_reho_matches_oracle(segment):
    rng = np.random.default_rng(0)
    for _ in range(100):
        nt = int(rng.integers(2, 12))
        data = rng.normal(loc=12_000, scale=300, size=(16, 16, 16, nt))
        vol = Volume4D(data, (3, 3, 3), 2.2)

        pairwise = reho_pairwise(vol, segment, ORIGIN)
        series = [data[x, y, z] for x, y, z in segment.voxel_list]
        assert reho_region(pairwise.values) == pytest.approx(naive_reho(series), abs=1e-10)
        assert not pairwise.degenerate.any()


def test_constant_voxel_is_flagged(segment):
    data = np.random.default_rng(1).normal(size=(16, 16, 16, 5))
    x, y, z = segment.voxel_list[2]
    data[x, y, z] = 7.0
    vol = Volume4D(data, (3, 3, 3), 2.2)

    pairwise = reho_pairwise(vol, segment, ORIGIN)
    assert np.flatnonzero(pairwise.degenerate).tolist() == [2]
    assert np.all(pairwise.values[2] == 0.0)
    assert np.all(pairwise.values[:, 2] == 0.0)
    assert np.array_equal(pairwise.values, pairwise.values.T)

    values, degenerate = subject_reho(vol, [segment], ORIGIN)
    assert degenerate == [3]
    assert -1.0 <= values[0] <= 1.0


def test_reho_needs_two_frames(segment):
    vol = Volume4D(np.ones((16, 16, 16, 1)), (3, 3, 3), 2.2)
    with pytest.raises(InsufficientSamplesError):
        reho_pairwise(vol, segment, ORIGIN)


def test_reho_region_of_identity():
    assert reho_region(np.eye(4)) == pytest.approx(0.25)
    with pytest.raises(DataError):
        reho_region(np.ones((2, 3)))


def test_summary_deviations():
    table = np.array([[0.1, 0.3, 0.5], [0.2, 0.2, 0.8]])
    summary = reho_summary(table)

    assert np.allclose(summary.subject_mean, [0.3, 0.4])
    assert np.allclose(summary.region_mean, [0.15, 0.25, 0.65])
    squares = np.sum((table[0] - 0.3) ** 2)
    assert summary.subject_std_literal[0] == pytest.approx(np.sqrt(squares) / 3)
    assert summary.subject_std_sample[0] == pytest.approx(np.sqrt(squares / 2))
    assert np.allclose(summary.region_std_sample, table.std(axis=0, ddof=1))


def test_summary_of_single_subject_has_zero_sample_std():
    summary = reho_summary(np.array([[0.1, 0.4]]))
    assert np.array_equal(summary.region_std_sample, [0.0, 0.0])
    assert np.array_equal(summary.region_std_literal, [0.0, 0.0])
    assert summary.subject_std_sample[0] > 0.0

    with pytest.raises(DataError):
        reho_summary(np.empty((0, 3)))


def test_reho_table_does_not_depend_on_threads(settings, seed_atlas, volume_factory, tmp_path):
    segments = segments_for_atlas(build_curve(4), seed_atlas, 5)
    volumes = volume_factory.create_batch(3)

    def subjects():
        for i, vol in enumerate(volumes, start=1):
            yield f"sub-{i:04d}", vol

    settings.THREADS = 1
    serial = reho_table(subjects(), segments, ORIGIN)
    settings.THREADS = 3
    threaded = reho_table(subjects(), segments, ORIGIN)

    assert serial.subject_ids == ("sub-0001", "sub-0002", "sub-0003")
    assert serial.region_ids == (1, 2, 3, 4)
    assert np.array_equal(serial.values, threaded.values)
    assert serial.degenerate == {}

    path = write_reho_table(serial, tmp_path)
    written = pd.read_csv(path)
    assert list(written["subject_id"]) == [
        "sub-0001", "sub-0002", "sub-0003", "mean", "std_literal", "std_sample",
    ]
    assert list(written.columns[1:5]) == ["region_1", "region_2", "region_3", "region_4"]


def test_table_from_rows():
    table = table_from_rows(["a", "b"], [np.array([0.1, 0.2]), np.array([0.3, 0.4])], [5, 9])
    assert table.values.shape == (2, 2)
    assert np.allclose(table.summary.region_mean, [0.2, 0.3])
    with pytest.raises(DataError):
        table_from_rows([], [], [5, 9])
