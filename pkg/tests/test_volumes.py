import numpy as np
import pytest

from hilbertfc.exceptions import DataError
from hilbertfc.volumes.ioports import (
    INTERNAL_MAGIC,
    ParsingError,
    nifti_header_dtype,
    parse_internal,
    parse_nifti,
    read_internal,
    read_nifti,
    read_volume,
    write_internal,
    write_nifti,
    write_volume,
)
from hilbertfc.volumes.models import Volume3D, Volume4D


def _nifti_bytes(vol: Volume4D, tmp_path) -> bytearray:
    """Bytes of the NIfTI export of ``vol``."""
    path = tmp_path / "export.nii"
    write_nifti(vol, path)
    return bytearray(path.read_bytes())


def test_volume_rejects_invalid_data():
    with pytest.raises(DataError):
        Volume4D(data=np.zeros((2, 2, 2)), voxel_mm=(3, 3, 3), tr_seconds=2.2)
    with pytest.raises(DataError):
        Volume4D(data=np.full((2, 2, 2, 2), np.nan), voxel_mm=(3, 3, 3), tr_seconds=2.2)
    with pytest.raises(DataError):
        Volume4D(data=np.zeros((2, 2, 2, 2)), voxel_mm=(3, 0, 3), tr_seconds=2.2)
    with pytest.raises(DataError):
        Volume4D(data=np.zeros((2, 2, 2, 2)), voxel_mm=(3, 3, 3), tr_seconds=0.0)
    with pytest.raises(DataError):
        Volume3D(data=np.zeros((2, 2, 2, 1)), voxel_mm=(3, 3, 3))


def test_frame(volume):
    frame = volume.frame(3)
    assert frame.dims == volume.dims[:3]
    assert np.array_equal(frame.data, volume.data[..., 3])


def test_internal_roundtrip_is_lossless(tmp_path, volume):
    path = tmp_path / "subject.vol"
    write_internal(volume, path)
    assert path.read_bytes()[:7] == INTERNAL_MAGIC

    restored = read_internal(path)
    assert np.array_equal(restored.data, volume.data)
    assert restored.voxel_mm == volume.voxel_mm
    assert restored.tr_seconds == volume.tr_seconds


def test_internal_rejects_truncation_and_bad_magic(tmp_path, volume):
    path = tmp_path / "subject.vol"
    write_internal(volume, path)
    raw = path.read_bytes()

    with pytest.raises(ParsingError) as truncated:
        parse_internal(raw[:-8])
    assert truncated.value.field == "dims"

    with pytest.raises(ParsingError) as bad_magic:
        parse_internal(b"XXXXXX\x00" + raw[7:])
    assert bad_magic.value.field == "magic"


def test_nifti_roundtrip_within_single_precision(tmp_path, volume):
    path = tmp_path / "subject.nii"
    write_nifti(volume, path)
    raw = path.read_bytes()
    assert len(raw) == 352 + 4 * volume.data.size
    assert raw[344:348] == b"n+1\x00"

    restored = read_nifti(path)
    assert restored.dims == volume.dims
    assert np.allclose(restored.data, volume.data, rtol=1e-7, atol=0)
    assert np.array_equal(restored.data, volume.data.astype(np.float32))
    assert restored.voxel_mm == volume.voxel_mm
    assert restored.tr_seconds == pytest.approx(2.2, rel=1e-7)


def test_nifti_errors_are_distinct(tmp_path, volume):
    raw = _nifti_bytes(volume, tmp_path)

    bad_magic = bytearray(raw)
    bad_magic[344:348] = b"xyz\x00"
    with pytest.raises(ParsingError) as magic_err:
        parse_nifti(bytes(bad_magic))
    assert magic_err.value.field == "magic"

    bad_type = bytearray(raw)
    bad_type[70:72] = np.array([64], dtype="<i2").tobytes()
    with pytest.raises(ParsingError) as type_err:
        parse_nifti(bytes(bad_type))
    assert type_err.value.field == "datatype"

    with pytest.raises(ParsingError) as truncated_err:
        parse_nifti(bytes(raw[:-4]))
    assert "Truncated" in str(truncated_err.value)

    with pytest.raises(ParsingError) as header_err:
        parse_nifti(bytes(raw[:100]))
    assert header_err.value.field == "sizeof_hdr"


def test_nifti_big_endian_int16_with_scaling():
    header = np.zeros((), dtype=nifti_header_dtype.newbyteorder(">"))
    header["sizeof_hdr"] = 348
    header["dim"] = [3, 2, 3, 4, 1, 1, 1, 1]
    header["datatype"] = 4
    header["bitpix"] = 16
    header["pixdim"] = [1.0, 2.0, 2.0, 2.5, 0, 0, 0, 0]
    header["vox_offset"] = 352
    header["scl_slope"] = 2.0
    header["scl_inter"] = 10.0
    header["xyzt_units"] = 2
    header["magic"] = b"n+1"
    values = np.arange(24, dtype=">i2")
    raw = header.tobytes() + bytes(4) + values.tobytes()

    volume = parse_nifti(raw)
    assert volume.dims == (2, 3, 4, 1)
    assert volume.voxel_mm == (2.0, 2.0, 2.5)
    assert volume.tr_seconds == 1.0
    expected = (2.0 * np.arange(24) + 10.0).reshape((2, 3, 4), order="F")
    assert np.array_equal(volume.data[..., 0], expected)


def test_nifti_nan_slope_means_no_scaling(tmp_path, volume):
    raw = _nifti_bytes(volume, tmp_path)
    raw[112:116] = np.array([np.nan], dtype="<f4").tobytes()
    restored = parse_nifti(bytes(raw))
    assert np.array_equal(restored.data, volume.data.astype(np.float32))


def test_read_volume_dispatches_on_content(tmp_path, volume):
    write_volume(volume, tmp_path / "a.dat", file_format="internal")
    write_volume(volume, tmp_path / "b.dat", file_format="nifti")
    assert np.array_equal(read_volume(tmp_path / "a.dat").data, volume.data)
    assert np.allclose(read_volume(tmp_path / "b.dat").data, volume.data, rtol=1e-7)

    with pytest.raises(DataError):
        write_volume(volume, tmp_path / "c.dat", file_format="analyze")


def test_nifti_export_readable_by_nibabel(tmp_path, volume):
    nibabel = pytest.importorskip("nibabel")
    path = tmp_path / "subject.nii"
    write_nifti(volume, path)

    image = nibabel.load(str(path))
    assert image.shape == volume.dims
    assert np.allclose(np.asarray(image.dataobj), volume.data, rtol=1e-7)
    assert image.header.get_zooms() == pytest.approx((3.0, 3.0, 3.0, 2.2))
