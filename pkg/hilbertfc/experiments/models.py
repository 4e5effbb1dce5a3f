"""
Domain types of the evaluation protocol.

A `Split` divides the subjects of a binary cohort into training and test sets, a
`ConfusionCounts` holds the outcome of evaluating one trained model on its test set and
a `RepetitionResult` bundles both with the loss trace of the training run. The
`ExperimentReport` collects all repetitions of one `ExperimentConfig` and derives the
per-repetition and aggregate tables that `ioports.emit_report` writes.

Percentages follow the class denominators: TP and FN are given as a share of the
positive test subjects (so TP% is the sensitivity), TN and FP as a share of the
negative ones (TN% is the specificity). Standard deviations over the repetitions are
population standard deviations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError, DataError

METRICS = ("acc", "se", "sp", "tn_pct", "tp_pct", "fp_pct", "fn_pct")
"""Per-repetition metrics in percent, in the column order of the reports."""


@dataclass(frozen=True)
class Split:
    """One training/test division of the subjects of a binary cohort."""
    train_ids: Tuple[str, ...]
    test_ids: Tuple[str, ...]
    seed: int
    rejections: int
    """Number of draws discarded for violating the class balance tolerance."""
    train_fractions: Dict[str, float] = field(default_factory=dict)
    """Share of every class on the training side."""
    test_fractions: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        shared = set(self.train_ids) & set(self.test_ids)
        if shared:
            raise DataError(f"Training and test sets share subjects {sorted(shared)[:5]}")

    @property
    def train_imbalance(self) -> float:
        """Absolute difference of the two class fractions on the training side."""
        fractions = list(self.train_fractions.values())
        return abs(fractions[0] - fractions[1]) if len(fractions) == 2 else 1.0


@dataclass(frozen=True)
class ConfusionCounts:
    """Test-set outcome of one binary classifier."""
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise DataError(f"Confusion counts must be non-negative: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @staticmethod
    def _ratio(numerator: int, denominator: int) -> float:
        return numerator / denominator if denominator else float("nan")

    @property
    def accuracy(self) -> float:
        """``(TP + TN) / total`` as a fraction."""
        return self._ratio(self.tp + self.tn, self.total)

    @property
    def sensitivity(self) -> float:
        """``TP / (TP + FN)``, NaN without positive test subjects."""
        return self._ratio(self.tp, self.positives)

    @property
    def specificity(self) -> float:
        """``TN / (TN + FP)``, NaN without negative test subjects."""
        return self._ratio(self.tn, self.negatives)

    def percentages(self) -> Dict[str, float]:
        """All `METRICS` in percent."""
        return {
            "acc": 100 * self.accuracy,
            "se": 100 * self.sensitivity,
            "sp": 100 * self.specificity,
            "tn_pct": 100 * self._ratio(self.tn, self.negatives),
            "tp_pct": 100 * self._ratio(self.tp, self.positives),
            "fp_pct": 100 * self._ratio(self.fp, self.negatives),
            "fn_pct": 100 * self._ratio(self.fn, self.positives),
        }


@dataclass(frozen=True, eq=False)
class LossTrace:
    """Training losses of one run."""
    sampled_epochs: np.ndarray
    """Epochs ``0, 25, 50, ...`` at which the full training set loss was evaluated."""
    sampled_losses: np.ndarray
    epoch_losses: np.ndarray
    """Mean batch loss of every epoch, ``epochs`` entries."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's outcome."""
    arch: str = "net4"
    half_length: Optional[int] = None
    """Segment half length the matrices were extracted with, for the records."""
    reps: int = 30
    epochs: int = 200
    batch: int = 4
    lr: float = 1e-4
    seed: int = 42
    class_pair: Tuple[str, str] = ("CN", "AD")
    """Negative and positive class, in this order."""
    test_fraction: float = 0.2
    balance_tol: float = 0.2
    test_size: Optional[int] = None
    """Fixed number of test subjects, overriding ``test_fraction``."""
    precision: str = "double"
    protocol: str = ""

    def __post_init__(self):
        if self.reps < 1 or self.epochs < 0 or self.batch < 1:
            raise ConfigurationError(
                f"Invalid repetitions {self.reps}, epochs {self.epochs} or batch {self.batch}"
            )
        if len(self.class_pair) != 2 or self.class_pair[0] == self.class_pair[1]:
            raise ConfigurationError(f"Class pair needs two distinct classes: {self.class_pair}")
        if not 0 < self.test_fraction < 1:
            raise ConfigurationError(f"Test fraction must be in (0, 1): {self.test_fraction}")

    @property
    def negative_class(self) -> str:
        return self.class_pair[0]

    @property
    def positive_class(self) -> str:
        return self.class_pair[1]


@dataclass(frozen=True, eq=False)
class RepetitionResult:
    """Split, training trace and test outcome of one repetition."""
    rep: int
    split_seed: int
    init_seed: int
    shuffle_seed: int
    split: Split
    counts: ConfusionCounts
    trace: LossTrace
    train_seconds: float


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """All repetitions of one experiment, ordered by repetition index."""
    config: ExperimentConfig
    repetitions: List[RepetitionResult]
    core_params: int
    model_size_kib: float
    """Single-precision size of the core parameters."""

    def summary(self) -> pd.DataFrame:
        """One row per repetition plus a final ``mean`` row.

        Columns: ``rep``, the seeds, the four counts, the test size and `METRICS`.
        """
        rows = []
        for result in self.repetitions:
            counts = result.counts
            rows.append({
                "rep": str(result.rep),
                "split_seed": result.split_seed,
                "init_seed": result.init_seed,
                "shuffle_seed": result.shuffle_seed,
                "tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn,
                "test_size": counts.total,
                **counts.percentages(),
            })
        table = pd.DataFrame(rows)
        mean_row = {column: np.nan for column in table.columns}
        mean_row.update({metric: table[metric].mean() for metric in METRICS})
        mean_row["rep"] = "mean"
        for column in ("tp", "tn", "fp", "fn", "test_size"):
            mean_row[column] = table[column].mean()
        return pd.concat([table, pd.DataFrame([mean_row])], ignore_index=True)

    def aggregate(self) -> pd.DataFrame:
        """Mean and population standard deviation of every metric over the repetitions."""
        metrics = pd.DataFrame([r.counts.percentages() for r in self.repetitions])
        return pd.DataFrame({
            "metric": list(METRICS),
            "mean": [metrics[m].mean() for m in METRICS],
            "std": [metrics[m].std(ddof=0) for m in METRICS],
        })
