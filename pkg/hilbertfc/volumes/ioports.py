"""
Module for reading and writing volumes and for exporting cohort statistics.

Two volume formats are supported:

- A subset of **NIfTI-1**: single files (magic ``n+1``) and header/image pairs (magic
  ``ni1``, the data is read from the ``.img`` file next to the header), either
  endianness, datatypes 4 (int16) and 16 (float32), three or four dimensions. The
  orientation fields (qform, sform) are ignored; grid coordinates are authoritative.
  Exports are always single-file float32.
- The **internal format**, a lossless little-endian dump of a `Volume4D`: magic
  ``HFCVOL\\0``, one version byte, the dims as four uint32, the voxel spacing as three
  float64, the repetition time as float64 and finally the data as float64 with x
  varying fastest.

`read_volume` tells the two apart by the leading bytes. The exact byte layouts are
documented in ``docs/formats.md``.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..exceptions import DataError
from .models import CohortStats, Volume3D, Volume4D

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ParsingError(DataError):
    """
    Exception raised when a file cannot be parsed. It names the offending header
    ``field`` or the ``line`` number of a text file where there is one.
    """
    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        line: Optional[int] = None,
    ):
        self.field = field
        self.line = line
        if field is not None:
            message = f"{message} (header field '{field}')"
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


NIFTI_HEADER_SIZE = 348
NIFTI_VOX_OFFSET = 352
NIFTI_MAGICS = {b"n+1": "single", b"ni1": "pair"}

nifti_header_dtype = np.dtype({
    "names": [
        "sizeof_hdr", "dim", "datatype", "bitpix", "pixdim",
        "vox_offset", "scl_slope", "scl_inter", "xyzt_units", "magic",
    ],
    "formats": [
        "i4", ("i2", (8,)), "i2", "i2", ("f4", (8,)),
        "f4", "f4", "f4", "u1", "S4",
    ],
    "offsets": [0, 40, 70, 72, 76, 108, 112, 116, 123, 344],
    "itemsize": NIFTI_HEADER_SIZE,
})
"""Numpy dtype of the NIfTI-1 header fields used by the reader (native byte order)."""

NIFTI_DATATYPES = {4: np.dtype("i2"), 16: np.dtype("f4")}
"""Supported NIfTI datatype codes and the numpy types they map to."""

SPACE_UNIT_TO_MM = {0: 1.0, 1: 1000.0, 2: 1.0, 3: 1e-3}
TIME_UNIT_TO_S = {0: 1.0, 8: 1.0, 16: 1e-3, 24: 1e-6}
XYZT_MM_SEC = 2 | 8

INTERNAL_MAGIC = b"HFCVOL\x00"
INTERNAL_VERSION = 1
internal_header_dtype = np.dtype([
    ("magic", "S7"),
    ("version", "u1"),
    ("dims", "<u4", (4,)),
    ("voxel_mm", "<f8", (3,)),
    ("tr_seconds", "<f8"),
])
"""Numpy dtype of the 56 byte header of the internal format."""


def _nifti_byte_order(raw: bytes) -> str:
    """Detect the byte order by checking ``sizeof_hdr == 348`` under both orders."""
    if len(raw) < NIFTI_HEADER_SIZE:
        raise ParsingError(
            f"Truncated header: {len(raw)} of {NIFTI_HEADER_SIZE} bytes",
            field="sizeof_hdr",
        )
    for order in ("<", ">"):
        if np.frombuffer(raw, dtype=f"{order}i4", count=1)[0] == NIFTI_HEADER_SIZE:
            return order
    raise ParsingError("Not a NIfTI-1 header", field="sizeof_hdr")


def parse_nifti(raw: bytes, image: Optional[bytes] = None) -> Volume4D:
    """Parse the bytes of a NIfTI-1 file into a `Volume4D`.

    For header/image pairs, ``image`` holds the bytes of the ``.img`` file. The parser
    never reads past the sizes declared in the header.
    """
    order = _nifti_byte_order(raw)
    header = np.frombuffer(
        raw, dtype=nifti_header_dtype.newbyteorder(order), count=1
    )[0]

    magic = bytes(header["magic"]).rstrip(b"\x00")
    if magic not in NIFTI_MAGICS:
        raise ParsingError(f"bad magic {magic!r}", field="magic")

    dim = [int(d) for d in header["dim"]]
    if dim[0] not in (3, 4):
        raise ParsingError(f"Unsupported number of dimensions {dim[0]}", field="dim")
    shape = dim[1:4] + [dim[4] if dim[0] == 4 else 1]
    if any(n <= 0 for n in shape):
        raise ParsingError(f"Non-positive dims {shape}", field="dim")

    datatype = int(header["datatype"])
    if datatype not in NIFTI_DATATYPES:
        raise ParsingError(f"Unsupported datatype code {datatype}", field="datatype")
    value_dtype = NIFTI_DATATYPES[datatype].newbyteorder(order)
    if int(header["bitpix"]) != 8 * value_dtype.itemsize:
        raise ParsingError(
            f"bitpix {int(header['bitpix'])} does not match datatype {datatype}",
            field="bitpix",
        )

    vox_offset = float(header["vox_offset"])
    if NIFTI_MAGICS[magic] == "single":
        payload = raw
        if not np.isfinite(vox_offset) or vox_offset < NIFTI_HEADER_SIZE:
            raise ParsingError(f"Invalid data offset {vox_offset}", field="vox_offset")
    else:
        if image is None:
            raise ParsingError("Header/image pair without image data", field="magic")
        payload = image
        if not np.isfinite(vox_offset) or vox_offset < 0:
            raise ParsingError(f"Invalid data offset {vox_offset}", field="vox_offset")
    offset = int(vox_offset)

    count = int(np.prod(shape))
    needed = offset + count * value_dtype.itemsize
    if len(payload) < needed:
        raise ParsingError(
            f"Truncated data section: {len(payload)} of {needed} bytes", field="dim"
        )
    values = np.frombuffer(payload, dtype=value_dtype, count=count, offset=offset)
    data = values.astype(np.float64).reshape(shape, order="F")

    slope = float(header["scl_slope"])
    if np.isfinite(slope) and slope != 0.0:
        inter = float(header["scl_inter"])
        data = data * slope + (inter if np.isfinite(inter) else 0.0)

    units = int(header["xyzt_units"])
    space_scale = SPACE_UNIT_TO_MM.get(units & 0x07, 1.0)
    time_scale = TIME_UNIT_TO_S.get(units & 0x38, 1.0)
    pixdim = [float(p) for p in header["pixdim"]]
    voxel_mm = [p * space_scale for p in pixdim[1:4]]
    if not all(np.isfinite(v) and v > 0 for v in voxel_mm):
        raise ParsingError(f"Non-positive voxel spacing {voxel_mm}", field="pixdim")

    tr_seconds = pixdim[4] * time_scale if dim[0] == 4 else 1.0
    if not (np.isfinite(tr_seconds) and tr_seconds > 0):
        raise ParsingError(f"Non-positive repetition time {tr_seconds}", field="pixdim")

    if not np.all(np.isfinite(data)):
        raise ParsingError("Data section contains non-finite values")

    return Volume4D(data=data, voxel_mm=voxel_mm, tr_seconds=tr_seconds)


def read_nifti(path: PathLike) -> Volume4D:
    """Read a NIfTI-1 file (``.nii`` or the header of a ``.hdr``/``.img`` pair).

    Raises:
        ParsingError: for a bad magic, an unsupported datatype, a truncated file or
            non-positive dims. The error names the offending header field.
    """
    path = Path(path)
    raw = path.read_bytes()
    image = None
    if raw[344:347] == b"ni1":
        image = path.with_suffix(".img").read_bytes()
    volume = parse_nifti(raw, image=image)
    logger.debug(f"Read NIfTI volume {volume.dims} from {path}")
    return volume


def write_nifti(vol: Union[Volume3D, Volume4D], path: PathLike) -> None:
    """Write a volume as single-file NIfTI-1 with float32 data.

    Values are rounded to single precision; everything else (dims, spacing, TR) is
    stored exactly as far as the header types allow.
    """
    header = np.zeros((), dtype=nifti_header_dtype.newbyteorder("<"))
    header["sizeof_hdr"] = NIFTI_HEADER_SIZE
    dims = list(vol.dims)
    tr_seconds = getattr(vol, "tr_seconds", 0.0)
    header["dim"] = [len(dims), *dims] + [1] * (7 - len(dims))
    header["datatype"] = 16
    header["bitpix"] = 32
    header["pixdim"] = [1.0, *vol.voxel_mm, tr_seconds, 0.0, 0.0, 0.0]
    header["vox_offset"] = NIFTI_VOX_OFFSET
    header["scl_slope"] = 1.0
    header["scl_inter"] = 0.0
    header["xyzt_units"] = XYZT_MM_SEC
    header["magic"] = b"n+1"

    extension = bytes(NIFTI_VOX_OFFSET - NIFTI_HEADER_SIZE)
    payload = vol.data.astype("<f4").tobytes(order="F")
    Path(path).write_bytes(header.tobytes() + extension + payload)
    logger.debug(f"Wrote NIfTI volume {vol.dims} to {path}")


def parse_internal(raw: bytes) -> Volume4D:
    """Parse the bytes of an internal-format file into a `Volume4D`."""
    if len(raw) < internal_header_dtype.itemsize:
        raise ParsingError(
            f"Truncated header: {len(raw)} of {internal_header_dtype.itemsize} bytes",
            field="magic",
        )
    header = np.frombuffer(raw, dtype=internal_header_dtype, count=1)[0]
    if bytes(header["magic"]) + b"\x00" != INTERNAL_MAGIC:
        raise ParsingError("bad magic", field="magic")
    if int(header["version"]) != INTERNAL_VERSION:
        raise ParsingError(
            f"Unsupported format version {int(header['version'])}, "
            f"expected {INTERNAL_VERSION}",
            field="version",
        )

    shape = [int(d) for d in header["dims"]]
    if any(n <= 0 for n in shape):
        raise ParsingError(f"Non-positive dims {shape}", field="dims")
    count = int(np.prod(shape))
    needed = internal_header_dtype.itemsize + 8 * count
    if len(raw) < needed:
        raise ParsingError(
            f"Truncated data section: {len(raw)} of {needed} bytes", field="dims"
        )
    data = np.frombuffer(
        raw, dtype="<f8", count=count, offset=internal_header_dtype.itemsize
    ).reshape(shape, order="F")

    try:
        return Volume4D(
            data=data.astype(np.float64),
            voxel_mm=header["voxel_mm"],
            tr_seconds=header["tr_seconds"],
        )
    except DataError as data_err:
        raise ParsingError(str(data_err), field="voxel_mm") from data_err


def read_internal(path: PathLike) -> Volume4D:
    """Read a volume stored in the internal format."""
    volume = parse_internal(Path(path).read_bytes())
    logger.debug(f"Read internal volume {volume.dims} from {path}")
    return volume


def write_internal(vol: Volume4D, path: PathLike) -> None:
    """Write a volume in the internal format. The round trip is bitwise lossless."""
    header = np.zeros((), dtype=internal_header_dtype)
    header["magic"] = INTERNAL_MAGIC
    header["version"] = INTERNAL_VERSION
    header["dims"] = vol.dims
    header["voxel_mm"] = vol.voxel_mm
    header["tr_seconds"] = vol.tr_seconds
    payload = vol.data.astype("<f8").tobytes(order="F")
    Path(path).write_bytes(header.tobytes() + payload)
    logger.debug(f"Wrote internal volume {vol.dims} to {path}")


def read_volume(path: PathLike) -> Volume4D:
    """Read a volume in either format, deciding by the file's leading bytes."""
    with open(path, "rb") as volume_file:
        leading = volume_file.read(len(INTERNAL_MAGIC))

    if leading == INTERNAL_MAGIC:
        return read_internal(path)
    return read_nifti(path)


VOLUME_FORMATS = {"nifti": write_nifti, "internal": write_internal}
VOLUME_SUFFIXES = {"nifti": ".nii", "internal": ".vol"}


def write_volume(vol: Volume4D, path: PathLike, file_format: str = "internal") -> None:
    """Write a volume in the given ``file_format``, ``"nifti"`` or ``"internal"``."""
    try:
        writer = VOLUME_FORMATS[file_format]
    except KeyError as key_err:
        raise DataError(
            f"Unknown volume format '{file_format}', choose from {list(VOLUME_FORMATS)}"
        ) from key_err
    writer(vol, path)


def export_cohort_stats(stats: CohortStats, out_dir: PathLike) -> None:
    """Write the cohort statistics as CSV tables for external plotting.

    The tables are ``histogram.csv`` (``bin_start, bin_end, count``), ``vi_sa.csv``
    (``region_id, position, value``), ``si_sa.csv`` (``region_id, value``) and
    ``stats.csv`` (``statistic, value``).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pd.DataFrame({
        "bin_start": stats.bin_edges[:-1],
        "bin_end": stats.bin_edges[1:],
        "count": stats.counts,
    }).to_csv(out_dir / "histogram.csv", index=False)

    regions, length = stats.vi_sa.shape
    pd.DataFrame({
        "region_id": np.repeat(stats.region_ids, length),
        "position": np.tile(np.arange(length) - length // 2, regions),
        "value": stats.vi_sa.ravel(),
    }).to_csv(out_dir / "vi_sa.csv", index=False)

    pd.DataFrame({
        "region_id": stats.region_ids,
        "value": stats.si_sa,
    }).to_csv(out_dir / "si_sa.csv", index=False)

    low, high = stats.in_range_window
    pd.DataFrame({
        "statistic": [
            "n_subjects", "n_samples", "global_mean", "global_std",
            "seed_mean", "seed_std", f"fraction_in_{low:g}_{high:g}",
        ],
        "value": [
            stats.n_subjects, stats.n_samples, stats.global_mean, stats.global_std,
            stats.seed_mean, stats.seed_std, stats.in_range_fraction,
        ],
    }).to_csv(out_dir / "stats.csv", index=False)

    logger.info(f"Exported cohort statistics of {stats.n_subjects} subjects to {out_dir}")
