"""Python bindings for the fulsim federated unlearning simulator."""

from ._core import (
    ChameleonHash,
    FulsimError,
    Simulation,
    attack_rate,
    depth_bound,
    parallel_cost,
    propagate,
    sequential_cost,
    verify_chain_ndjson,
)

__all__ = [
    "ChameleonHash",
    "FulsimError",
    "Simulation",
    "attack_rate",
    "depth_bound",
    "parallel_cost",
    "propagate",
    "sequential_cost",
    "verify_chain_ndjson",
]
