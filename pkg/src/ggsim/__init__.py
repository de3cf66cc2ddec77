"""Generalized graph-state growth under monitored entanglement errors."""

from __future__ import annotations

from .algebra import bridge_params, canonicalize, compose_fusion, compose_weighted, p_merge, p_success, r_exacerbate
from .ledger import GeneralizedGraphState, contract_full_fusion, from_snapshot, star, to_dot, to_snapshot
from .statevec import StateVector, apply_operator

__version__ = "0.1.0"

__all__ = [
    "GeneralizedGraphState",
    "StateVector",
    "apply_operator",
    "bridge_params",
    "canonicalize",
    "compose_fusion",
    "compose_weighted",
    "contract_full_fusion",
    "from_snapshot",
    "p_merge",
    "p_success",
    "r_exacerbate",
    "star",
    "to_dot",
    "to_snapshot",
]
