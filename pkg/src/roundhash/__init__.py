"""Round-hashing toolkit."""

from roundhash.analytics import predicted_stash_fraction, uniform_stash_fraction
from roundhash.baselines import jump_hash, linear_hash, make_strategy, mix64
from roundhash.blockstore import FileBlockStore, MemoryBlockStore
from roundhash.oracle import PermutationOracle
from roundhash.round_mapping import MapperState, RoundMapper, pos
from roundhash.round_table import AuditError, RoundTable, TableConfig

__all__ = [
    "AuditError",
    "FileBlockStore",
    "MapperState",
    "MemoryBlockStore",
    "PermutationOracle",
    "RoundMapper",
    "RoundTable",
    "TableConfig",
    "jump_hash",
    "linear_hash",
    "make_strategy",
    "mix64",
    "pos",
    "predicted_stash_fraction",
    "uniform_stash_fraction",
]
__version__ = "0.1.0"
