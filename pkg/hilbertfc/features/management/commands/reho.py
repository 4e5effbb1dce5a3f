"""
Regional homogeneity of every (subject, region) pair of a cohort of volumes, with the
per-subject and per-region means and standard deviations, as one CSV table.
"""
from ....commands import PipelineCommand
from ....volumes.ioports import read_volume
from ....volumes.preprocess import preprocess_series
from ...extract import default_offsets, segments_for_atlas
from ...hilbert import build_curve
from ...ioports import load_seed_atlas, read_manifest, write_reho_table
from ...models import CubeToGrid
from ...reho import reho_table


class Command(PipelineCommand):
    """Compute the ReHo table of a cohort of volumes."""
    help = __doc__
    config_keys = (
        "input", "atlas", "out", "order", "half_length", "offset_x", "offset_y",
        "offset_z", "fwhm", "slice_axis",
    )
    needs = ("input", "atlas", "out")

    def run(self, config, options):
        curve = build_curve(config.order)
        atlas = load_seed_atlas(config.atlas, side=curve.side)
        segments = segments_for_atlas(curve, atlas, config.half_length)
        manifest = read_manifest(config.input)

        first = read_volume(manifest["path"].iloc[0])
        offsets = config.offsets or default_offsets(first.dims[:3], curve.side)

        def subjects():
            for row in manifest.itertuples(index=False):
                volume = read_volume(row.path)
                yield row.subject_id, preprocess_series(volume, config.slice_axis, config.fwhm)

        table = reho_table(subjects(), segments, CubeToGrid(offset=offsets))
        config.out.mkdir(parents=True, exist_ok=True)
        path = write_reho_table(table, config.out)
        self.write_echo(config)
        self.success(
            f"ReHo of {len(table.subject_ids)} subjects and {len(table.region_ids)} "
            f"regions written to {path}"
        )
