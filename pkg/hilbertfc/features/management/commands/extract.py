"""
Turn a cohort of 4D volumes into spatial correlation matrices: slice timing
correction, smoothing and time average per subject, then the ROI arrays along the
Hilbert curve segments of the seed atlas and their pairwise correlations. Optionally
computes the ReHo table of the same cohort.
"""
import time

from django.conf import settings
from joblib import Parallel, delayed

from ....commands import PipelineCommand
from ....volumes.ioports import read_volume
from ....volumes.preprocess import preprocess_series, time_average
from ...extract import check_overlaps, default_offsets, extract_features, segments_for_atlas
from ...hilbert import build_curve
from ...ioports import load_seed_atlas, read_manifest, write_manifest, write_matrix, write_reho_table
from ...models import CubeToGrid
from ...reho import subject_reho, table_from_rows


def process_subject(row, segments, config, side):
    """Matrix and, if asked for, ReHo row of one manifest entry."""
    volume = read_volume(row.path)
    offsets = config.offsets or default_offsets(volume.dims[:3], side)
    cube_to_grid = CubeToGrid(offset=offsets)
    series = preprocess_series(volume, config.slice_axis, config.fwhm)
    matrix = extract_features(
        time_average(series), segments, cube_to_grid, row.subject_id, row.label,
    )
    reho = subject_reho(series, segments, cube_to_grid) if config.reho else None
    return matrix, reho


class Command(PipelineCommand):
    """Extract the correlation matrices of a cohort of volumes."""
    help = __doc__
    config_keys = (
        "input", "atlas", "out", "order", "half_length", "offset_x", "offset_y",
        "offset_z", "fwhm", "slice_axis", "reho",
    )
    needs = ("input", "atlas", "out")

    def run(self, config, options):
        curve = build_curve(config.order)
        atlas = load_seed_atlas(config.atlas, side=curve.side)
        segments = segments_for_atlas(curve, atlas, config.half_length)
        overlaps = check_overlaps(segments)
        if overlaps:
            self.stderr.write(f"{len(overlaps)} pairs of ROI segments overlap")
        manifest = read_manifest(config.input)

        start_time = time.perf_counter()
        results = Parallel(n_jobs=settings.THREADS, prefer="threads")(
            delayed(process_subject)(row, segments, config, curve.side)
            for row in manifest.itertuples(index=False)
        )
        self.logger.info(
            "Extracting %(count)d subjects took %(time).3f s",
            {"count": len(results), "time": time.perf_counter() - start_time},
        )

        config.out.mkdir(parents=True, exist_ok=True)
        entries = []
        for matrix, _ in results:
            path = write_matrix(matrix, config.out)
            entries.append((matrix.subject_id, matrix.label, path.name))
        write_manifest(entries, config.out)

        if config.reho:
            degenerate = {
                m.subject_id: regions for m, (_, regions) in results if regions
            }
            table = table_from_rows(
                [m.subject_id for m, _ in results],
                [values for _, (values, _) in results],
                atlas.region_ids,
                degenerate,
            )
            write_reho_table(table, config.out)

        self.write_echo(config)
        self.success(f"Wrote {len(entries)} correlation matrices to {config.out}")
