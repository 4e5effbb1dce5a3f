"""
Writing experiment reports.

`emit_report` fills an output directory with

- ``summary.csv``: one row per repetition and a closing ``mean`` row,
- ``aggregate.csv``: mean and population std of every metric, next to the published
  values when the run follows one of the presets,
- ``loss_rep<NN>.csv``: the sampled training loss (``epoch, loss``) of every repetition,
- ``epoch_loss_rep<NN>.csv``: the mean batch loss of every epoch,
- ``split_distribution.csv``: class percentages of the splits,
- ``timings.csv``: training wall times,
- ``config.txt``: the config echo that reproduces the run.

All files except ``timings.csv`` are byte-identical between two runs with the same
configuration.
"""
# pylint: disable=logging-fstring-interpolation

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import pandas as pd

from ..forms import write_config_echo
from .models import ExperimentReport
from .protocol import reference_results, report_split_distribution

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def _with_reference(report: ExperimentReport) -> pd.DataFrame:
    aggregate = report.aggregate()
    aggregate["reference_mean"] = np.nan
    aggregate["reference_std"] = np.nan

    config = report.config
    if not config.protocol or config.half_length is None:
        return aggregate

    reference = reference_results()
    reference = reference[
        (reference["protocol"] == config.protocol)
        & (reference["arch"] == config.arch)
        & (reference["segment_length"] == 2 * config.half_length + 1)
    ].set_index("metric")
    for i, metric in enumerate(aggregate["metric"]):
        if metric in reference.index:
            aggregate.loc[i, "reference_mean"] = reference.loc[metric, "mean"]
            aggregate.loc[i, "reference_std"] = reference.loc[metric, "std"]
    return aggregate


def config_echo(report: ExperimentReport) -> Dict[str, Any]:
    """Key/value echo of the experiment configuration."""
    echo = dataclasses.asdict(report.config)
    echo["class_pair"] = ",".join(report.config.class_pair)
    return echo


def emit_report(
    report: ExperimentReport,
    out_dir: Union[str, Path],
    echo: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write all report files of ``report`` into ``out_dir`` (created if missing).

    ``echo`` is the full run configuration to store in ``config.txt``; it defaults to
    the experiment configuration alone.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report.summary().to_csv(out_dir / "summary.csv", index=False, float_format=FLOAT_FORMAT)
    _with_reference(report).to_csv(
        out_dir / "aggregate.csv", index=False, float_format=FLOAT_FORMAT,
    )
    report_split_distribution(report).to_csv(
        out_dir / "split_distribution.csv", index=False, float_format=FLOAT_FORMAT,
    )

    width = max(2, len(str(len(report.repetitions))))
    for result in report.repetitions:
        trace = result.trace
        pd.DataFrame({
            "epoch": trace.sampled_epochs,
            "loss": trace.sampled_losses,
        }).to_csv(
            out_dir / f"loss_rep{result.rep:0{width}d}.csv",
            index=False,
            float_format=FLOAT_FORMAT,
        )
        pd.DataFrame({
            "epoch": np.arange(1, len(trace.epoch_losses) + 1),
            "loss": trace.epoch_losses,
        }).to_csv(
            out_dir / f"epoch_loss_rep{result.rep:0{width}d}.csv",
            index=False,
            float_format=FLOAT_FORMAT,
        )

    pd.DataFrame({
        "rep": [r.rep for r in report.repetitions],
        "train_seconds": [r.train_seconds for r in report.repetitions],
    }).to_csv(out_dir / "timings.csv", index=False, float_format="%.3f")

    write_config_echo(
        echo if echo is not None else config_echo(report),
        out_dir / "config.txt",
        info={
            "core_params": report.core_params,
            "model_size_kib_single": f"{report.model_size_kib:.2f}",
            "std": "population",
        },
    )
    logger.info(f"Wrote report of {len(report.repetitions)} repetitions to {out_dir}")
    return out_dir
