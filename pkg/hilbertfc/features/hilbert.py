"""
Three dimensional Hilbert space-filling curve over a cube of side ``2**order``.

The curve is the Gray-code construction that works on the *transposed* index: the
``3 * order`` bits of a curve index are dealt out round robin to the three axes (the
most significant bit goes to ``x``), and a sequence of bit inversions and exchanges
turns that transpose into coordinates. The orientation is fixed once and for all:

- index ``0`` sits at the cube corner ``(0, 0, 0)``,
- index ``1`` is ``(0, 0, 1)``, i.e. the first step goes along ``z``.

At order 1 the traversal is ``000, 001, 011, 010, 110, 111, 101, 100``.

All mappings are vectorized over numpy index arrays so that a whole ROI segment (or
the whole cube) is converted in a single call. A `HilbertCurve` is immutable and can
be shared between threads; its full coordinate table is computed lazily on first
access and cached.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from ..exceptions import BoundsError, ConfigurationError

logger = logging.getLogger(__name__)

NDIM = 3
MIN_ORDER = 1
MAX_ORDER = 10


def _transpose_to_axes(transpose: np.ndarray, order: int) -> np.ndarray:
    """Turn transposed indices of shape ``(3, n)`` into coordinates, in place."""
    X = transpose
    N = 2 << (order - 1)

    # Gray decode
    t = X[NDIM - 1] >> 1
    for i in range(NDIM - 1, 0, -1):
        X[i] ^= X[i - 1]
    X[0] ^= t

    # undo excess work
    Q = 2
    while Q != N:
        P = Q - 1
        for i in range(NDIM - 1, -1, -1):
            invert = (X[i] & Q) != 0
            X[0] = np.where(invert, X[0] ^ P, X[0])
            t = np.where(invert, 0, (X[0] ^ X[i]) & P)
            X[0] ^= t
            X[i] ^= t
        Q <<= 1

    return X


def _axes_to_transpose(axes: np.ndarray, order: int) -> np.ndarray:
    """Turn coordinates of shape ``(3, n)`` into transposed indices, in place."""
    X = axes
    M = 1 << (order - 1)

    # inverse undo
    Q = M
    while Q > 1:
        P = Q - 1
        for i in range(NDIM):
            invert = (X[i] & Q) != 0
            X[0] = np.where(invert, X[0] ^ P, X[0])
            t = np.where(invert, 0, (X[0] ^ X[i]) & P)
            X[0] ^= t
            X[i] ^= t
        Q >>= 1

    # Gray encode
    for i in range(1, NDIM):
        X[i] ^= X[i - 1]
    t = np.zeros_like(X[0])
    Q = M
    while Q > 1:
        t = np.where((X[NDIM - 1] & Q) != 0, t ^ (Q - 1), t)
        Q >>= 1
    for i in range(NDIM):
        X[i] ^= t

    return X


def _index_to_transpose(indices: np.ndarray, order: int) -> np.ndarray:
    """Deal the bits of the curve indices out to the three axes."""
    transpose = np.zeros((NDIM, indices.size), dtype=np.int64)
    for level in range(order):
        for i in range(NDIM):
            bit = (indices >> (NDIM * level + NDIM - 1 - i)) & 1
            transpose[i] |= bit << level
    return transpose


def _transpose_to_index(transpose: np.ndarray, order: int) -> np.ndarray:
    """Interleave the bits of the transposed indices into curve indices."""
    indices = np.zeros(transpose.shape[1], dtype=np.int64)
    for level in range(order - 1, -1, -1):
        for i in range(NDIM):
            indices = (indices << 1) | ((transpose[i] >> level) & 1)
    return indices


@dataclass(frozen=True)
class HilbertCurve:
    """Bijective mapping between curve indices and the voxels of a cube."""
    order: int
    """Recursion depth of the curve. The study uses 6, i.e. a cube of side 64."""

    def __post_init__(self):
        if not MIN_ORDER <= self.order <= MAX_ORDER:
            raise ConfigurationError(
                f"Curve order must be in [{MIN_ORDER}, {MAX_ORDER}], got {self.order}"
            )

    @property
    def side(self) -> int:
        """Number of voxels along each edge of the cube."""
        return 2 ** self.order

    @property
    def total_cells(self) -> int:
        """Number of voxels in the cube, i.e. the length of the curve."""
        return self.side ** NDIM

    def indices_to_coords(self, indices: np.ndarray) -> np.ndarray:
        """Map an array of curve indices to an ``(n, 3)`` array of coordinates."""
        indices = np.asarray(indices, dtype=np.int64).ravel()
        if indices.size and (indices.min() < 0 or indices.max() >= self.total_cells):
            bad = indices[(indices < 0) | (indices >= self.total_cells)][0]
            raise BoundsError(
                f"Curve index {bad} outside [0, {self.total_cells}) at order {self.order}"
            )
        transpose = _index_to_transpose(indices, self.order)
        return _transpose_to_axes(transpose, self.order).T.copy()

    def coords_to_indices(self, coords: np.ndarray) -> np.ndarray:
        """Map an ``(n, 3)`` array of cube coordinates to their curve indices."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, NDIM)
        outside = np.any((coords < 0) | (coords >= self.side), axis=1)
        if np.any(outside):
            bad = tuple(int(c) for c in coords[outside][0])
            raise BoundsError(f"Coordinate {bad} outside the cube of side {self.side}")
        axes = coords.T.copy()
        return _transpose_to_index(_axes_to_transpose(axes, self.order), self.order)

    def index_to_coord(self, h: int) -> Tuple[int, int, int]:
        """Return the ``(x, y, z)`` voxel visited at curve index ``h``."""
        x, y, z = self.indices_to_coords(np.array([h]))[0]
        return int(x), int(y), int(z)

    def coord_to_index(self, x: int, y: int, z: int) -> int:
        """Return the curve index at which voxel ``(x, y, z)`` is visited."""
        return int(self.coords_to_indices(np.array([[x, y, z]]))[0])

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Read-only ``(total_cells, 3)`` table of the coordinates in curve order."""
        table = self.indices_to_coords(np.arange(self.total_cells, dtype=np.int64))
        table.flags.writeable = False
        logger.debug("Cached %d curve coordinates at order %d", len(table), self.order)
        return table


def build_curve(order: int) -> HilbertCurve:
    """Build the Hilbert curve of the given ``order``.

    Construction is deterministic: two curves of the same order are equal and map
    every index to the same voxel.

    Raises:
        ConfigurationError: if ``order`` is not in ``[1, 10]``.
    """
    return HilbertCurve(order=int(order))


def index_to_coord(curve: HilbertCurve, h: int) -> Tuple[int, int, int]:
    """Return the voxel of ``curve`` at index ``h``. See `HilbertCurve.index_to_coord`."""
    return curve.index_to_coord(h)


def coord_to_index(curve: HilbertCurve, x: int, y: int, z: int) -> int:
    """Return the index of voxel ``(x, y, z)``. See `HilbertCurve.coord_to_index`."""
    return curve.coord_to_index(x, y, z)
