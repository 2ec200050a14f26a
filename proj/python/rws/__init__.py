"""Reweighted wake-sleep training for deep directed binary models.

Thin python surface over the C++ core: build model pairs from architecture
strings, train them, and query the estimators and exact-enumeration oracle.
"""

from rws._core import (
    ModelPair,
    RngStream,
    RwsError,
    bars_dataset,
    bars_process_ll,
    load_amat,
    load_pair,
)

__all__ = [
    "ModelPair",
    "RngStream",
    "RwsError",
    "bars_dataset",
    "bars_process_ll",
    "load_amat",
    "load_pair",
]
