"""
The repeated evaluation protocol and its published presets.

`run_experiment` derives one independent seed triple (split, weight initialization,
shuffling) per repetition from the master seed, draws a balanced split, trains a fresh
model on the training side and evaluates it on the test side. Repetitions run on
`settings.THREADS` worker threads and are collected in repetition order, so the report
does not depend on the thread count.

The four presets reproduce the study's experiments: they subsample the cohort per class
to the published class sizes and fix the published test set size.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed

from ..exceptions import ConfigurationError, DataError
from ..features.models import CorrelationMatrix
from ..network.ioports import save_checkpoint
from ..network.models import build_model, model_size_kib, param_count
from .models import ExperimentConfig, ExperimentReport, RepetitionResult
from .splits import make_split, split_distribution
from .training import encode, evaluate, train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Protocol:
    """Published cohort composition of one experiment."""
    name: str
    class_pair: tuple
    """Negative and positive class."""
    class_sizes: Dict[str, int]
    test_size: int

    @property
    def n_subjects(self) -> int:
        return sum(self.class_sizes.values())


PROTOCOLS = {
    p.name: p for p in (
        Protocol("cn-ad-429", ("CN", "AD"), {"CN": 246, "AD": 183}, test_size=109),
        Protocol("cn-ad-205", ("CN", "AD"), {"CN": 107, "AD": 98}, test_size=41),
        Protocol("mci-cn-204", ("CN", "MCI"), {"MCI": 97, "CN": 107}, test_size=40),
        Protocol("mci-ad-195", ("MCI", "AD"), {"MCI": 97, "AD": 98}, test_size=39),
    )
}
"""Presets by name. The positive class is the disease class (AD, or MCI against CN)."""


REFERENCE_RESULTS = [
    # protocol, arch, segment length, ACC, SE, SP as (mean, std) in percent
    ("cn-ad-429", "net4", 201, (82, 3.4), (86, 5.1), (80, 6.2)),
    ("cn-ad-429", "net4", 101, (78, 4.0), (84, 4.7), (71, 5.7)),
    ("cn-ad-429", "net2", 201, (81, 3.3), (85, 5.8), (77, 5.9)),
    ("cn-ad-429", "net2", 101, (80, 3.4), (85, 4.4), (75, 3.3)),
    ("cn-ad-205", "net4", 201, (78, 5.5), (78, 9.0), (79, 9.2)),
    ("cn-ad-205", "net4", 101, (86, 5.5), (92, 6.0), (82, 10.0)),
    ("cn-ad-205", "net2", 201, (86, 5.4), (87, 7.7), (86, 7.3)),
    ("cn-ad-205", "net2", 101, (89, 4.9), (91, 6.9), (87, 9.4)),
    ("mci-cn-204", "net4", 201, (80, 5.5), (79, 10.5), (81, 8.6)),
    ("mci-cn-204", "net4", 101, (91, 4.2), (90, 5.9), (92, 6.2)),
    ("mci-cn-204", "net2", 201, (84, 5.3), (85, 9.4), (83, 8.9)),
    ("mci-cn-204", "net2", 101, (91, 4.4), (91, 6.1), (92, 6.9)),
    ("mci-ad-195", "net4", 201, (80, 4.8), (80, 7.6), (81, 7.8)),
    ("mci-ad-195", "net4", 101, (82, 5.0), (85, 10.0), (80, 8.0)),
    ("mci-ad-195", "net2", 201, (83, 4.8), (84, 5.9), (84, 7.8)),
    ("mci-ad-195", "net2", 101, (84, 6.0), (90, 9.0), (80, 8.0)),
]


def reference_results() -> pd.DataFrame:
    """Published accuracies on the real cohorts, one row per experiment, architecture,
    segment length and metric. Reference data only; synthetic runs are not expected to
    match them."""
    rows = []
    for protocol, arch, length, *metrics in REFERENCE_RESULTS:
        for metric, (mean, std) in zip(("acc", "se", "sp"), metrics):
            rows.append({
                "protocol": protocol,
                "arch": arch,
                "segment_length": length,
                "metric": metric,
                "mean": float(mean),
                "std": float(std),
            })
    return pd.DataFrame(rows)


def get_protocol(name: str) -> Protocol:
    try:
        return PROTOCOLS[name]
    except KeyError as key_err:
        raise ConfigurationError(
            f"Unknown protocol {name!r}, expected one of {sorted(PROTOCOLS)}"
        ) from key_err


def apply_protocol(
    dataset: Sequence[CorrelationMatrix],
    protocol: Protocol,
    seed: int,
) -> List[CorrelationMatrix]:
    """Subsample ``dataset`` to the protocol's class sizes, deterministically in ``seed``.

    Raises:
        DataError: if a class has fewer subjects than the protocol needs.
    """
    rng = np.random.default_rng([seed, protocol.n_subjects])
    chosen = []
    for cls, size in protocol.class_sizes.items():
        members = sorted((m for m in dataset if m.label == cls), key=lambda m: m.subject_id)
        if len(members) < size:
            raise DataError(
                f"Protocol {protocol.name} needs {size} {cls} subjects, "
                f"the dataset has {len(members)}"
            )
        picked = np.sort(rng.choice(len(members), size=size, replace=False))
        chosen.extend(members[i] for i in picked)
    return sorted(chosen, key=lambda m: m.subject_id)


def repetition_seeds(seed: int, reps: int) -> List[tuple]:
    """Independent ``(split, init, shuffle)`` seeds of every repetition."""
    children = np.random.SeedSequence(seed).spawn(reps)
    return [tuple(int(s) for s in child.generate_state(3)) for child in children]


def _run_repetition(
    rep: int,
    seeds: tuple,
    matrices: Dict[str, CorrelationMatrix],
    labels: Dict[str, str],
    config: ExperimentConfig,
    checkpoint_dir: Optional[Path] = None,
) -> RepetitionResult:
    split_seed, init_seed, shuffle_seed = seeds
    split = make_split(
        labels,
        test_fraction=config.test_fraction,
        balance_tol=config.balance_tol,
        seed=split_seed,
        test_size=config.test_size,
    )
    train_inputs, train_labels = encode([matrices[i] for i in split.train_ids], config.class_pair)
    test_inputs, test_labels = encode([matrices[i] for i in split.test_ids], config.class_pair)

    model = build_model(
        config.arch,
        seed=init_seed,
        precision=config.precision,
        input_size=train_inputs.shape[-1],
    )
    start_time = time.perf_counter()
    model, trace = train(
        model,
        train_inputs,
        train_labels,
        epochs=config.epochs,
        batch_size=config.batch,
        lr=config.lr,
        seed=shuffle_seed,
    )
    train_seconds = time.perf_counter() - start_time
    counts = evaluate(model, test_inputs, test_labels)
    if checkpoint_dir is not None:
        save_checkpoint(model, checkpoint_dir / f"model_rep{rep:02d}.h5")
    logger.info(
        f"Repetition {rep}: accuracy {100 * counts.accuracy:.1f}% on {counts.total} "
        f"test subjects"
    )
    return RepetitionResult(
        rep=rep,
        split_seed=split_seed,
        init_seed=init_seed,
        shuffle_seed=shuffle_seed,
        split=split,
        counts=counts,
        trace=trace,
        train_seconds=train_seconds,
    )


def run_experiment(
    dataset: Sequence[CorrelationMatrix],
    config: ExperimentConfig,
    n_jobs: Optional[int] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> ExperimentReport:
    """Run all repetitions of ``config`` on ``dataset``.

    Subjects outside the configured class pair are ignored. With a ``protocol`` in the
    config, the cohort is first subsampled to the preset's class sizes. The trained
    models are saved into ``checkpoint_dir`` if one is given.

    Raises:
        DataError: if a class of the pair is missing, subject ids repeat, or the
            matrices differ in size.
    """
    dataset = [m for m in dataset if m.label in config.class_pair]
    if config.protocol:
        protocol = get_protocol(config.protocol)
        if tuple(config.class_pair) != protocol.class_pair:
            raise ConfigurationError(
                f"Protocol {protocol.name} compares {protocol.class_pair}, "
                f"not {tuple(config.class_pair)}"
            )
        dataset = apply_protocol(dataset, protocol, config.seed)
        if config.test_size is None:
            config = replace(config, test_size=protocol.test_size)

    present = {m.label for m in dataset}
    missing = [c for c in config.class_pair if c not in present]
    if missing:
        raise DataError(f"The dataset has no subjects of class {missing}")
    matrices = {m.subject_id: m for m in dataset}
    if len(matrices) != len(dataset):
        raise DataError("Subject ids in the dataset are not unique")
    if len({m.r for m in dataset}) != 1:
        raise DataError("Matrices of the dataset differ in size")
    labels = {subject_id: m.label for subject_id, m in matrices.items()}

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    start_time = time.perf_counter()
    seeds = repetition_seeds(config.seed, config.reps)
    results = Parallel(n_jobs=n_jobs or settings.THREADS, prefer="threads")(
        delayed(_run_repetition)(
            rep, seeds[rep - 1], matrices, labels, config, checkpoint_dir,
        )
        for rep in range(1, config.reps + 1)
    )
    logger.info(
        "%(reps)d repetitions took %(time).3f s",
        {"reps": config.reps, "time": time.perf_counter() - start_time},
    )

    sizing_model = build_model(config.arch, precision=config.precision, input_size=dataset[0].r)
    return ExperimentReport(
        config=config,
        repetitions=list(results),
        core_params=param_count(sizing_model),
        model_size_kib=model_size_kib(sizing_model, "single"),
    )


def report_split_distribution(report: ExperimentReport) -> pd.DataFrame:
    """`splits.split_distribution` of all repetitions of ``report``."""
    return split_distribution(
        [r.split for r in report.repetitions], report.config.positive_class
    )
