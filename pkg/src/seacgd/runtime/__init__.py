from .audit import AuditReport, audit_log, block_ages
from .delays import (EXPONENTIAL_ONE_WORKER, FIXED_WORKER, NO_DELAY, RANDOM_EACH_ITER, ROUND_ROBIN,
                     DelayInjector, DelayModel)
from .ops import DelayedSnapshot, apply_update, sw_acgd_step
from .partition import BlockPartition, partition_blocks
from .simulator import RuntimeBase, SimulatedRuntime, SyncRuntime, build_runtime
from .trace import EventLog, RunTrace

__all__ = [
    "AuditReport", "audit_log", "block_ages", "DelayInjector", "DelayModel", "NO_DELAY",
    "EXPONENTIAL_ONE_WORKER", "ROUND_ROBIN", "FIXED_WORKER", "RANDOM_EACH_ITER", "DelayedSnapshot",
    "apply_update", "sw_acgd_step", "BlockPartition", "partition_blocks", "RuntimeBase",
    "SimulatedRuntime", "SyncRuntime", "build_runtime", "EventLog", "RunTrace",
]
