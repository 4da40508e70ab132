"""Edge-cloud synchronization, delta compression, WAL persistence, and
federated delta aggregation."""

from aura.syncfed.compress import delta_compress, delta_decompress
from aura.syncfed.fedagg import LinearModel, ShapeMismatch, federated_aggregate
from aura.syncfed.sync import (
    ConflictError,
    InProcessCloud,
    PhaseFailure,
    SyncReport,
    synchronize,
)
from aura.syncfed.wal import CorruptEntry, WalStore

__all__ = [
    "delta_compress",
    "delta_decompress",
    "LinearModel",
    "ShapeMismatch",
    "federated_aggregate",
    "ConflictError",
    "InProcessCloud",
    "PhaseFailure",
    "SyncReport",
    "synchronize",
    "CorruptEntry",
    "WalStore",
]
