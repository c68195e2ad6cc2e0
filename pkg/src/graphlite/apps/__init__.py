"""Bundled workloads: PageRank, ALS, CoEM, loopy BP and a contended counter."""
from .datasets import KINDS, load_dataset, make_dataset
from .registry import APPS, build_app, get_app

__all__ = ["KINDS", "load_dataset", "make_dataset", "APPS", "build_app", "get_app"]
