"""
Django settings module that defines important configurations. For an explanation of
the Django-specific values, see the official `Django documentation`_.

`hilbertfc` is a batch tool: it has no database, no URLs and no templates. What Django
provides here is the command framework (``manage.py``-style subcommands), form-based
validation of the run configuration and the logging setup.

Only one environment variable changes how the pipeline runs:

- `HILBERTFC_THREADS` sets the number of worker threads used for per-subject and
  per-repetition work. Outputs never depend on it.

The remaining settings are the defaults of the pipeline. They equal the published
constants of the study wherever one exists and can be overridden per run via a
``key=value`` config file or command line flags (see `hilbertfc.forms`).

.. _Django documentation: https://docs.djangoproject.com/en/4.1/ref/settings/
"""
import os

try:
    from ._version import version
except ImportError:
    version = "0.0.0"

DEBUG = False

VERSION = version
"""Version of the installed package, written by ``setuptools_scm``."""

THREADS = int(os.getenv("HILBERTFC_THREADS", "1"))
"""
Number of worker threads for per-subject and per-repetition parallelism. Set via the
environment variable ``HILBERTFC_THREADS``.
"""
if THREADS < 1:
    raise ValueError("HILBERTFC_THREADS must be a positive integer")

LOG_LEVEL = "INFO"
"""
Default threshold for logging events. Commands lower or raise it according to their
``--verbosity`` flag.
"""

PIPELINE_DEFAULTS = {
    "order": 6,
    "half_length": 100,
    "arch": "net4",
    "epochs": 200,
    "lr": 1e-4,
    "batch": 4,
    "reps": 30,
    "seed": 42,
    "offset_x": None,
    "offset_y": None,
    "offset_z": None,
    "mode": "matrices",
    "per_class": 100,
    "separation": 1.0,
    "class_pair": "CN,AD",
    "protocol": "",
    "fwhm": 8.0,
    "slice_axis": 2,
    "nt": 164,
    "reho": False,
    "bin_width": 1000.0,
    "precision": "double",
    "regions": 90,
    "volume_format": "internal",
}
"""
Defaults of every run configuration key. Offsets of ``None`` mean "center the data grid
inside the curve cube".
"""

GRID_DIMS = (53, 63, 52)
"""Data grid of the normalized volumes in voxels (3 mm isotropic)."""

VOXEL_MM = (3.0, 3.0, 3.0)
"""Voxel spacing of the normalized volumes."""

TR_SECONDS = 2.2
"""Repetition time of the resting-state acquisitions."""

INTENSITY_MEAN = 12_692.0
"""Mean of the time-averaged ROI voxel intensities over the full cohort."""

INTENSITY_STD = 2_155.0
"""Standard deviation of the time-averaged ROI voxel intensities."""

HISTOGRAM_RANGE = (0.0, 30_000.0)
"""Intensity range covered by the cohort histogram."""

IN_RANGE_WINDOW = (10_000.0, 14_000.0)
"""Window whose voxel fraction is reported with the cohort statistics."""

NMI_BINS = 64
"""Default number of equal-width bins per volume for the NMI metric."""

LOSS_SAMPLE_INTERVAL = 25
"""Epoch interval at which training losses are recorded."""


# Logging
def set_LOGGING(LOG_LEVEL):
    """Return logging settings in the form of a dictionary as function of the
    log-level. Commands adjust the level of the `hilbertfc` logger per run.
    """
    LOGGING = {
        "version": 1,
        "disable_existing_loggers": False,

        "formatters": {
            "default": {
                "format": "[%(asctime)s] %(levelname)-10s %(name)-40s %(message)s"
            }
        },

        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "formatter": "default",
            },
        },

        "root": {
            "handlers": ["console"],
            "level": "WARNING",
        },

        "loggers": {
            "django": {
                "level": "WARNING",
                "handlers": ["console"],
                "propagate": False,
            },
            "hilbertfc": {
                "level": LOG_LEVEL,
                "handlers": ["console"],
                "propagate": False,
            },
        }
    }
    return LOGGING

LOGGING = set_LOGGING(LOG_LEVEL)


# Application definition
INSTALLED_APPS = [
    "hilbertfc.volumes.apps.VolumesConfig",
    "hilbertfc.features.apps.FeaturesConfig",
    "hilbertfc.network.apps.NetworkConfig",
    "hilbertfc.experiments.apps.ExperimentsConfig",
    "hilbertfc.synthcohort.apps.SynthCohortConfig",
]

DATABASES = {}

USE_TZ = True
TIME_ZONE = "Europe/Zurich"
