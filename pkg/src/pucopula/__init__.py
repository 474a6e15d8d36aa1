"""Data-driven partition-of-unity copulas and Monte Carlo risk aggregation."""

from .empirical_ranks import (
    DataParseError,
    RankData,
    TiesError,
    compute_ranks,
    read_data_csv,
    relative_ranks,
)
from .partition_families import FamilyKind, PartitionFamily
from .patchwork import (
    CellKind,
    DimensionError,
    PatchworkCopula,
    SingularCopulaError,
)
from .pu_copula import PuCopula, SparseProbTable, compute_pij, tail_dependence_estimate

__version__ = "0.1.0"
