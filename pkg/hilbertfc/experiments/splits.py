"""
Random training/test splits with class balance rejection.

Test subjects are drawn uniformly at random without regard to their class. A draw is
rejected when the two class fractions on the *training* side differ by more than the
balance tolerance, and redrawn with a seed derived from the master seed and the attempt
number, so the accepted split is a deterministic function of the master seed.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import logging
import math
from collections import Counter
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from ..exceptions import ConfigurationError, DataError, InfeasibleError
from .models import Split

logger = logging.getLogger(__name__)

MIN_SUBJECTS = 10
MAX_REJECTIONS = 1000


def n_test_subjects(n_subjects: int, test_fraction: float, test_size: Optional[int] = None) -> int:
    """Number of test subjects: ``test_size`` if given, else ``ceil(fraction * n)``."""
    if test_size is None:
        # 0.2 * 205 evaluates to 41.00000000000001
        test_size = math.ceil(round(test_fraction * n_subjects, 9))
    if not 1 <= test_size < n_subjects:
        raise ConfigurationError(
            f"Test size {test_size} does not fit a cohort of {n_subjects} subjects"
        )
    return test_size


def class_fractions(ids: Sequence[str], labels: Mapping[str, str], classes: Sequence[str]) -> Dict[str, float]:
    counts = Counter(labels[i] for i in ids)
    return {c: counts[c] / len(ids) for c in classes}


def make_split(
    labels: Mapping[str, str],
    test_fraction: float = 0.2,
    balance_tol: float = 0.2,
    seed: int = 0,
    test_size: Optional[int] = None,
    max_rejections: int = MAX_REJECTIONS,
) -> Split:
    """Draw a training/test split of the subjects in ``labels`` (subject id → class).

    Raises:
        DataError: if the cohort has fewer than 10 subjects or not exactly two classes.
        InfeasibleError: after ``max_rejections`` consecutive rejected draws.
    """
    ids = sorted(labels)
    classes = sorted(set(labels.values()))
    if len(ids) < MIN_SUBJECTS:
        raise DataError(f"A split needs at least {MIN_SUBJECTS} subjects, got {len(ids)}")
    if len(classes) != 2:
        raise DataError(f"A split needs exactly two classes, got {classes}")
    n_test = n_test_subjects(len(ids), test_fraction, test_size)

    for attempt in range(max_rejections):
        attempt_seed = int(np.random.SeedSequence([seed, attempt]).generate_state(1)[0])
        train_ids, test_ids = train_test_split(
            ids, test_size=n_test, random_state=attempt_seed, shuffle=True,
        )
        train_fractions = class_fractions(train_ids, labels, classes)
        imbalance = abs(train_fractions[classes[0]] - train_fractions[classes[1]])
        if imbalance <= balance_tol:
            logger.debug(f"Split with seed {seed} accepted after {attempt} rejections")
            return Split(
                train_ids=tuple(sorted(train_ids)),
                test_ids=tuple(sorted(test_ids)),
                seed=seed,
                rejections=attempt,
                train_fractions=train_fractions,
                test_fractions=class_fractions(test_ids, labels, classes),
            )

    raise InfeasibleError(
        f"{max_rejections} consecutive splits exceeded the class balance tolerance "
        f"{balance_tol} (seed {seed})"
    )


def split_distribution(splits: Sequence[Split], positive_class: str) -> pd.DataFrame:
    """Minimum, maximum and mean class percentages on both sides over ``splits``.

    Returns one row per side and class, the positive class first.
    """
    if not splits:
        raise DataError("No splits to summarize")
    classes = sorted(splits[0].train_fractions, key=lambda c: c != positive_class)
    rows = []
    for side in ("test", "train"):
        for cls in classes:
            values = np.array([
                100 * getattr(split, f"{side}_fractions")[cls] for split in splits
            ])
            rows.append({
                "side": side,
                "class": cls,
                "min": values.min(),
                "max": values.max(),
                "mean": values.mean(),
            })
    return pd.DataFrame(rows)
