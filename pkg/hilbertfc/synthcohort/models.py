"""
Parameters of a synthetic cohort.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

from django.conf import settings

from ..exceptions import ConfigurationError
from ..volumes.models import Volume4D


def _default_grid() -> Tuple[int, int, int]:
    return tuple(settings.GRID_DIMS)


@dataclass(frozen=True)
class SynthSpec:
    """Everything that determines a synthetic cohort. The defaults mimic the study's
    acquisitions and intensity statistics."""
    n_per_class: Tuple[int, ...] = (100, 100)
    """Subjects per class, in the order of ``classes``."""
    classes: Tuple[str, ...] = ("CN", "AD")
    r_regions: int = 90
    half_length: int = 100
    grid_dims: Tuple[int, int, int] = field(default_factory=_default_grid)
    nt: int = 164
    intensity_mean: float = 12_692.0
    intensity_std: float = 2_155.0
    separation: float = 1.0
    """How differently the classes couple their regions: 0 makes all classes
    identically distributed, 1 is the strongest class signal."""
    seed: int = 0
    order: int = 6
    """Order of the Hilbert curve the atlas is built on."""
    offset: Optional[Tuple[int, int, int]] = None
    """Position of the grid inside the curve cube, centered if not given."""
    voxel_mm: Tuple[float, float, float] = (3.0, 3.0, 3.0)
    tr_seconds: float = 2.2
    fluctuation: float = 150.0
    """Standard deviation of the BOLD fluctuation around each voxel's mean."""
    region_coupling: float = 0.6
    """Weight of the region-wide signal in the fluctuation of ROI voxels."""

    def __post_init__(self):
        if not 0.0 <= self.separation <= 1.0:
            raise ConfigurationError(f"Separation must be in [0, 1], got {self.separation}")
        if len(self.n_per_class) != len(self.classes):
            raise ConfigurationError(
                f"{len(self.n_per_class)} class sizes for {len(self.classes)} classes"
            )
        if len(set(self.classes)) != len(self.classes) or len(self.classes) < 2:
            raise ConfigurationError(f"Need at least two distinct classes: {self.classes}")
        if any(n < 0 for n in self.n_per_class):
            raise ConfigurationError(f"Class sizes must be non-negative: {self.n_per_class}")
        if self.r_regions < 2 or self.half_length < 0 or self.nt < 1:
            raise ConfigurationError(
                f"Invalid regions {self.r_regions}, half length {self.half_length} "
                f"or frames {self.nt}"
            )
        if not (self.intensity_std > 0 and self.fluctuation >= 0):
            raise ConfigurationError("Intensity std must be positive, fluctuation non-negative")
        if not 0.0 <= self.region_coupling <= 1.0:
            raise ConfigurationError(f"Region coupling must be in [0, 1]: {self.region_coupling}")

        side = 2**self.order
        offset = self.offset or tuple((side - n) // 2 for n in self.grid_dims)
        if any(o < 0 or o + n > side for o, n in zip(offset, self.grid_dims)):
            raise ConfigurationError(
                f"Grid {self.grid_dims} at offset {offset} does not fit the cube of side {side}"
            )
        object.__setattr__(self, "offset", tuple(int(o) for o in offset))

    @property
    def n_subjects(self) -> int:
        return sum(self.n_per_class)

    @property
    def segment_length(self) -> int:
        return 2 * self.half_length + 1


class SynthSubject(NamedTuple):
    """One generated subject of the volume path."""
    subject_id: str
    label: str
    volume: Volume4D
