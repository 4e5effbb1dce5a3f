from factories import (
    CorrelationMatrixFactory,
    ExperimentConfigFactory,
    SeedAtlasFactory,
    SynthSpecFactory,
    VolumeFactory,
)
from pytest_factoryboy import register

register(CorrelationMatrixFactory, "corr_matrix")
register(SeedAtlasFactory)
register(VolumeFactory, "volume")
register(SynthSpecFactory)
register(ExperimentConfigFactory)
