"""
Intensity statistics of the ROI voxels over a cohort of volumes, written as
plot-ready CSV tables (histogram, subject averaged ROI arrays and seed voxels).
"""
from ....commands import PipelineCommand
from ....features.extract import default_offsets, segments_for_atlas
from ....features.hilbert import build_curve
from ....features.ioports import load_seed_atlas, read_manifest
from ...ioports import export_cohort_stats, read_volume
from ...preprocess import cohort_stats, preprocess_subject


class Command(PipelineCommand):
    """Compute the intensity statistics of a cohort of volumes."""
    help = __doc__
    config_keys = (
        "input", "atlas", "out", "order", "half_length", "offset_x", "offset_y",
        "offset_z", "fwhm", "slice_axis", "bin_width",
    )
    needs = ("input", "atlas", "out")

    def run(self, config, options):
        curve = build_curve(config.order)
        atlas = load_seed_atlas(config.atlas, side=curve.side)
        segments = segments_for_atlas(curve, atlas, config.half_length)
        manifest = read_manifest(config.input)

        averages = []
        for row in manifest.itertuples():
            volume = read_volume(row.path)
            averages.append(preprocess_subject(volume, config.slice_axis, config.fwhm))
            self.logger.debug(f"Preprocessed {row.subject_id}")

        offset = config.offsets or default_offsets(averages[0].dims, curve.side)
        stats = cohort_stats(
            averages,
            segments,
            seed_voxels=atlas.seeds,
            offset=offset,
            bin_width=config.bin_width,
        )
        config.out.mkdir(parents=True, exist_ok=True)
        export_cohort_stats(stats, config.out)
        self.write_echo(config)
        self.success(
            f"Mean {stats.global_mean:.1f}, std {stats.global_std:.1f}, "
            f"{100 * stats.in_range_fraction:.1f}% in "
            f"[{stats.in_range_window[0]:g}, {stats.in_range_window[1]:g}] "
            f"over {stats.n_samples} samples (seed voxels: mean {stats.seed_mean:.1f}, "
            f"std {stats.seed_std:.1f})"
        )
