from .audit import AuditVerdict, audit_result, audit_serializability, capabilities, replay
from .chromatic import ChromaticMachine
from .cluster import CoherenceProbe, RunResult, prepare_locals, run_chromatic, run_locking
from .locking import LockingMachine
from .log import CommitRecord, LogFormatError, SyncRecord, read_log, write_log
from .program import GlobalTable, Program, SyncDefinition, normalize_tasks
from .runtime import METRIC_COLUMNS, Machine, SyncClock
from .sync import fold_partial, merge_partials, run_sync

__all__ = [
    "AuditVerdict", "audit_result", "audit_serializability", "capabilities", "replay",
    "ChromaticMachine", "CoherenceProbe", "RunResult", "prepare_locals", "run_chromatic",
    "run_locking", "LockingMachine", "CommitRecord", "LogFormatError", "SyncRecord",
    "read_log", "write_log", "GlobalTable", "Program", "SyncDefinition", "normalize_tasks",
    "METRIC_COLUMNS", "Machine", "SyncClock", "fold_partial", "merge_partials", "run_sync",
]
