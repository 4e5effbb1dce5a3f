import json

import numpy as np
import pandas as pd
import pytest

from hilbertfc.exceptions import BoundsError, ConfigurationError, DataError, LengthMismatchError
from hilbertfc.features.extract import (
    check_overlaps,
    correlation_matrix,
    default_offsets,
    extract_features,
    extract_segment,
    pearson_spatial,
    roi_signal_array,
    segments_for_atlas,
)
from hilbertfc.features.hilbert import build_curve
from hilbertfc.features.ioports import (
    load_seed_atlas,
    read_manifest,
    read_matrix,
    read_matrix_directory,
    write_manifest,
    write_matrix,
    write_seed_atlas,
)
from hilbertfc.features.models import CorrelationMatrix, CubeToGrid, Overlap
from hilbertfc.volumes.ioports import ParsingError
from hilbertfc.volumes.models import Volume3D


def naive_pearson(v, w):
    dv, dw = v - v.mean(), w - w.mean()
    return np.sum(dv * dw) / np.sqrt(np.sum(dv**2) * np.sum(dw**2))


def test_default_offsets_center_the_grid():
    assert default_offsets((53, 63, 52), 64) == (5, 0, 6)
    assert default_offsets((16, 16, 16), 16) == (0, 0, 0)
    with pytest.raises(ConfigurationError):
        default_offsets((65, 10, 10), 64)


def test_segment_follows_the_curve():
    curve = build_curve(3)
    seed = curve.index_to_coord(100)
    segment = extract_segment(curve, seed, 7, region_id=4)

    assert len(segment) == 15
    assert segment.start == 93 and segment.stop == 107
    assert np.array_equal(segment.voxel_list, curve.coordinates[93:108])
    assert tuple(segment.voxel_list[7]) == seed
    assert segment.region_id == 4


def test_segment_of_half_length_zero_is_the_seed():
    curve = build_curve(2)
    segment = extract_segment(curve, (1, 2, 3), 0)
    assert segment.voxel_list.tolist() == [[1, 2, 3]]


@pytest.mark.parametrize("index, half_length", [(3, 4), (0, 1), (4092, 4), (4095, 1)])
def test_segment_never_clamps(index, half_length):
    curve = build_curve(4)
    with pytest.raises(BoundsError):
        extract_segment(curve, curve.index_to_coord(index), half_length)


def test_segment_errors():
    curve = build_curve(2)
    with pytest.raises(BoundsError):
        extract_segment(curve, (4, 0, 0), 1)
    with pytest.raises(ConfigurationError):
        extract_segment(curve, (1, 1, 1), -1)


def test_check_overlaps_reports_shared_indices():
    curve = build_curve(3)
    segments = [
        extract_segment(curve, curve.index_to_coord(h), 5, region_id=i)
        for i, h in enumerate([10, 20, 40, 49], start=1)
    ]
    assert check_overlaps(segments) == [Overlap(1, 2, 1), Overlap(3, 4, 2)]
    assert check_overlaps(segments[:1] + segments[2:3]) == []


def test_segments_for_atlas_keep_atlas_order(seed_atlas):
    curve = build_curve(4)
    segments = segments_for_atlas(curve, seed_atlas, 10)
    assert [s.region_id for s in segments] == [1, 2, 3, 4]
    for segment, region in zip(segments, seed_atlas.regions):
        assert tuple(segment.voxel_list[10]) == region.seed


def test_roi_signal_array_reads_along_the_segment():
    curve = build_curve(4)
    segment = extract_segment(curve, (8, 8, 8), 6)
    data = np.random.default_rng(0).normal(size=(18, 17, 16))
    avg = Volume3D(data, (3, 3, 3))
    offset = CubeToGrid((-2, -1, 0))

    signal = roi_signal_array(avg, segment, offset)
    expected = [data[x + 2, y + 1, z] for x, y, z in segment.voxel_list]
    assert np.array_equal(signal, expected)

    with pytest.raises(BoundsError, match="region"):
        roi_signal_array(avg, segment, CubeToGrid((0, 0, 9)))


def test_pearson_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        v = rng.normal(loc=rng.uniform(-1e4, 1e4), scale=rng.uniform(1.0, 1e3), size=n)
        w = 0.5 * v + rng.normal(size=n) * rng.uniform(0.1, 1e3)
        rho, degenerate = pearson_spatial(v, w)
        assert not degenerate
        assert -1.0 <= rho <= 1.0
        assert rho == pytest.approx(naive_pearson(v, w), abs=1e-10)


def test_pearson_constant_array():
    v = np.full(11, 12_692.0)
    w = np.arange(11.0)
    assert pearson_spatial(v, w) == (0.0, True)
    assert pearson_spatial(w, v) == (0.0, True)
    assert pearson_spatial(w, w).rho == pytest.approx(1.0)
    assert pearson_spatial(w, -w).rho == pytest.approx(-1.0)


def test_pearson_length_errors():
    with pytest.raises(LengthMismatchError):
        pearson_spatial(np.arange(5.0), np.arange(6.0))
    with pytest.raises(LengthMismatchError):
        pearson_spatial(np.ones(1), np.ones(1))


def test_correlation_matrix_matches_pairwise():
    rng = np.random.default_rng(2)
    for _ in range(20):
        r, n = int(rng.integers(2, 12)), int(rng.integers(2, 40))
        arrays = rng.normal(size=(r, n)) * rng.uniform(1, 100, size=(r, 1))
        matrix = correlation_matrix(arrays, "sub-0001", "CN", half_length=3)

        assert np.array_equal(matrix.values, matrix.values.T)
        assert np.all(np.diag(matrix.values) == 1.0)
        assert np.all(np.abs(matrix.values) <= 1.0)
        for i in range(r):
            for j in range(i + 1, r):
                rho, _ = pearson_spatial(arrays[i], arrays[j])
                assert matrix.values[i, j] == pytest.approx(rho, abs=1e-10)


def test_correlation_matrix_flags_constant_arrays():
    arrays = np.vstack([np.arange(9.0), np.full(9, 3.0), np.arange(9.0) ** 2])
    matrix = correlation_matrix(arrays, "sub-0001", "AD")
    assert matrix.degenerate == (1,)
    assert np.all(matrix.values[1, [0, 2]] == 0.0)
    assert matrix.values[1, 1] == 1.0


def test_correlation_matrix_rejects_invalid_values():
    values = np.eye(3)
    values[0, 1] = 0.5
    with pytest.raises(DataError, match="not symmetric"):
        CorrelationMatrix(values, "sub-0001", "CN")
    with pytest.raises(DataError, match="diagonal"):
        CorrelationMatrix(0.5 * np.eye(3), "sub-0001", "CN")
    with pytest.raises(DataError, match="outside"):
        CorrelationMatrix(np.full((2, 2), 1.5), "sub-0001", "CN")


def test_extract_features(seed_atlas, volume):
    curve = build_curve(4)
    segments = segments_for_atlas(curve, seed_atlas, 10)
    avg = volume.frame(0)

    matrix = extract_features(avg, segments, CubeToGrid((0, 0, 0)), "sub-0007", "AD")
    assert matrix.r == 4
    assert matrix.half_length == 10
    assert matrix.subject_id == "sub-0007" and matrix.label == "AD"

    first = roi_signal_array(avg, segments[0], CubeToGrid((0, 0, 0)))
    second = roi_signal_array(avg, segments[1], CubeToGrid((0, 0, 0)))
    assert matrix.values[0, 1] == pytest.approx(pearson_spatial(first, second).rho, abs=1e-10)


def test_atlas_roundtrip(tmp_path, seed_atlas):
    path = tmp_path / "atlas.txt"
    write_seed_atlas(seed_atlas, path)
    loaded = load_seed_atlas(path, side=16)
    assert loaded == seed_atlas


def test_atlas_accepts_comments_and_commas(tmp_path):
    path = tmp_path / "atlas.txt"
    path.write_text(
        "# regions\n"
        "region_id,name,x,y,z\n"
        "\n"
        "2, Hippocampus_R, 40, 30, 20\n"
        "1, Hippocampus_L, 20, 30, 20\n"
    )
    atlas = load_seed_atlas(path)
    assert atlas.region_ids == (1, 2)
    assert atlas.regions[0].name == "Hippocampus_L"
    assert np.array_equal(atlas.seeds, [[20, 30, 20], [40, 30, 20]])


@pytest.mark.parametrize("content, error, line", [
    ("1\ta\t1\t2\t3\n1\tb\t4\t5\t6\n", ParsingError, 2),
    ("1\ta\t1\t2\t3\n2\tb\t4\t5\n", ParsingError, 2),
    ("1\ta\t1\t2\tz\n2\tb\t4\t5\t6\n", ParsingError, 1),
])
def test_atlas_parsing_errors(tmp_path, content, error, line):
    path = tmp_path / "atlas.txt"
    path.write_text(content)
    with pytest.raises(error) as parse_err:
        load_seed_atlas(path)
    assert parse_err.value.line == line


def test_atlas_seed_outside_cube(tmp_path):
    path = tmp_path / "atlas.txt"
    path.write_text("1\ta\t1\t2\t3\n2\tb\t4\t5\t64\n")
    with pytest.raises(BoundsError, match="line 2"):
        load_seed_atlas(path, side=64)


def test_matrix_files_keep_every_bit(tmp_path, corr_matrix):
    path = write_matrix(corr_matrix, tmp_path)
    assert path.name == f"{corr_matrix.subject_id}.csv"

    sidecar = json.loads(path.with_suffix(".json").read_text())
    assert sidecar["label"] == corr_matrix.label
    assert sidecar["half_length"] == 10

    restored = read_matrix(path)
    assert np.array_equal(restored.values, corr_matrix.values)
    assert restored.subject_id == corr_matrix.subject_id
    assert restored.half_length == 10


def test_matrix_without_sidecar(tmp_path):
    path = tmp_path / "sub-0042.csv"
    path.write_text("1,0.25\n0.25,1\n")
    matrix = read_matrix(path)
    assert matrix.subject_id == "sub-0042"
    assert matrix.label == ""

    path.write_text("1,0.25\n")
    with pytest.raises(ParsingError):
        read_matrix(path)


def test_matrix_directory(tmp_path, correlation_matrix_factory):
    matrices = correlation_matrix_factory.create_batch(3)
    entries = []
    for matrix in matrices:
        csv_path = write_matrix(matrix, tmp_path)
        entries.append((matrix.subject_id, "MCI", csv_path.name))
    write_manifest(entries, tmp_path)

    manifest = read_manifest(tmp_path)
    assert list(manifest["subject_id"]) == [m.subject_id for m in matrices]

    loaded = read_matrix_directory(tmp_path)
    assert [m.label for m in loaded] == ["MCI"] * 3
    assert all(np.array_equal(a.values, b.values) for a, b in zip(loaded, matrices))


def test_manifest_errors(tmp_path):
    with pytest.raises(DataError, match="No manifest"):
        read_manifest(tmp_path)

    pd.DataFrame({"subject_id": ["a"], "path": ["a.csv"]}).to_csv(
        tmp_path / "manifest.csv", index=False,
    )
    with pytest.raises(ParsingError):
        read_manifest(tmp_path)

    write_manifest([("a", "CN", "missing.csv")], tmp_path)
    with pytest.raises(DataError, match="do not exist"):
        read_manifest(tmp_path)
