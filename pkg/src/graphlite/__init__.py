"""Graph-parallel computation with scoped update functions, syncs and consistency models."""
from .coloring import Coloring, greedy_color, square_color, validate_coloring
from .engines import Program, SyncDefinition, audit_result, run_chromatic, run_locking, run_sync
from .errors import GraphLiteError
from .graph import ConsistencyModel, DataGraph, build_graph, commit_scope, open_scope
from .scheduler import UpdateTask, make_scheduler

__version__ = "0.1.0"

__all__ = [
    "Coloring", "greedy_color", "square_color", "validate_coloring", "Program",
    "SyncDefinition", "audit_result", "run_chromatic", "run_locking", "run_sync",
    "GraphLiteError", "ConsistencyModel", "DataGraph", "build_graph", "commit_scope",
    "open_scope", "UpdateTask", "make_scheduler",
]
