"""
Train and evaluate a CNN on a directory of correlation matrices with repeated random
splits, and write the report (per-repetition metrics, their mean and std, loss curves,
split distribution, timings and the config echo).
"""
from ....commands import PipelineCommand
from ....exceptions import DataError
from ....features.ioports import read_matrix_directory
from ...ioports import emit_report
from ...models import ExperimentConfig
from ...protocol import run_experiment


class Command(PipelineCommand):
    """Run the repeated training/test protocol."""
    help = __doc__
    config_keys = (
        "input", "out", "arch", "half_length", "epochs", "lr", "batch", "reps", "seed",
        "class_pair", "protocol", "precision",
    )
    needs = ("input", "out")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--save-models", action="store_true",
            help="Store the trained model of every repetition as HDF5 checkpoint.",
        )

    def run(self, config, options):
        dataset = read_matrix_directory(config.input)
        lengths = {m.half_length for m in dataset if m.half_length is not None}
        if lengths - {config.half_length}:
            raise DataError(
                f"Matrices in {config.input} were extracted with half length "
                f"{sorted(lengths)}, not {config.half_length}"
            )

        experiment = ExperimentConfig(
            arch=config.arch,
            half_length=config.half_length,
            reps=config.reps,
            epochs=config.epochs,
            batch=config.batch,
            lr=config.lr,
            seed=config.seed,
            class_pair=config.class_pair,
            precision=config.precision,
            protocol=config.protocol,
        )
        checkpoint_dir = config.out / "models" if options.get("save_models") else None
        report = run_experiment(dataset, experiment, checkpoint_dir=checkpoint_dir)

        echo = {key: value for key, value in config.echo().items() if key in self.config_keys}
        emit_report(report, config.out, echo=echo)

        aggregate = report.aggregate().set_index("metric")
        self.success(
            f"{config.arch} over {len(report.repetitions)} repetitions: "
            f"ACC {aggregate.loc['acc', 'mean']:.1f} ± {aggregate.loc['acc', 'std']:.1f}, "
            f"SE {aggregate.loc['se', 'mean']:.1f} ± {aggregate.loc['se', 'std']:.1f}, "
            f"SP {aggregate.loc['sp', 'mean']:.1f} ± {aggregate.loc['sp', 'std']:.1f} "
            f"({report.core_params} core parameters)"
        )
