"""Brute-force evaluation of ledgers and ledger events on dense statevectors."""

from __future__ import annotations

import math

import numpy as np

from . import algebra as alg
from .ledger import AddEdge, AddFusion, AddVertex, ApplyLocal, GeneralizedGraphState, RemoveVertex
from .statevec import (
    AnnihilatedStateError,
    StateVector,
    apply_operator,
    fidelity,
    insert_qubit,
    project_qubit,
)


def qubit_map(ledger: GeneralizedGraphState) -> dict[int, int]:
    """Vertex id -> qubit index (sorted ids, little-endian)."""
    return {v: i for i, v in enumerate(ledger.vertices)}


def build_from_ledger(ledger: GeneralizedGraphState, normalize: bool = True, check_order: bool = False) -> StateVector:
    """Statevector described by ``ledger``.

    Tilted initialization, then edges and fusions, then the local frame.
    With ``normalize=False`` the vector carries ``exp(log_weight)`` and the
    norm changes produced by the fusions.
    """
    idx = qubit_map(ledger)
    if not idx:
        return StateVector([math.exp(ledger.log_weight) if not normalize else 1.0], 0)
    sv = StateVector.product([[math.cos(ledger.tilts[v]), math.sin(ledger.tilts[v])] for v in ledger.vertices])
    diag_ops = []
    for (a, b), t in sorted(ledger.edges.items()):
        diag_ops.append(((idx[a], idx[b]), alg.CZ if t is None else alg.weighted_edge(t)))
    for (a, b), t in sorted(ledger.fusions.items()):
        diag_ops.append(((idx[a], idx[b]), alg.partial_fusion(t)))

    def run(ops):
        out = sv
        for targets, m in ops:
            out, _ = apply_operator(out, targets, m)
        return out

    out = run(diag_ops)
    if check_order and len(diag_ops) > 1:
        rev = run(diag_ops[::-1])
        assert np.allclose(out.amplitudes, rev.amplitudes, atol=1e-12), "diagonal operators failed to commute"
    out = apply_frames(out, ledger, idx)
    if normalize:
        if out.norm < 1e-12:
            raise AnnihilatedStateError("ledger encodes an impossible projection")
        return out.normalized()
    return StateVector(out.amplitudes * math.exp(ledger.log_weight), out.num_qubits)


def apply_frames(sv: StateVector, ledger: GeneralizedGraphState, idx=None) -> StateVector:
    idx = qubit_map(ledger) if idx is None else idx
    for v, tags in sorted(ledger.frame.items()):
        sv, _ = apply_operator(sv, [idx[v]], alg.tags_matrix(tags))
    return sv


def undo_frame(sv: StateVector, ledger: GeneralizedGraphState, v: int, idx=None) -> StateVector:
    idx = qubit_map(ledger) if idx is None else idx
    m = alg.tags_matrix(ledger.frame_of(v))
    sv, _ = apply_operator(sv, [idx[v]], m.conj().T)
    return sv


def in_graph_frame(sv, ledger, targets, m):
    """Apply ``F m F^dagger`` where F is the frame of the target vertices."""
    idx = qubit_map(ledger)
    for v in targets:
        sv = undo_frame(sv, ledger, v, idx)
    sv, _ = apply_operator(sv, [idx[v] for v in targets], m)
    for v in targets:
        sv, _ = apply_operator(sv, [idx[v]], alg.tags_matrix(ledger.frame_of(v)))
    return sv


def apply_event(sv: StateVector, ledger: GeneralizedGraphState, event) -> StateVector:
    """Physical meaning of a ledger event, applied to the (unnormalized) vector of ``ledger``."""
    idx = qubit_map(ledger)
    if isinstance(event, AddVertex):
        pos = sum(1 for v in ledger.vertices if v < event.vertex)
        return insert_qubit(sv, pos, [math.cos(event.alpha), math.sin(event.alpha)])
    if isinstance(event, AddEdge):
        m = alg.CZ if event.theta is None else alg.weighted_edge(event.theta)
        return in_graph_frame(sv, ledger, [event.a, event.b], m)
    if isinstance(event, AddFusion):
        return in_graph_frame(sv, ledger, [event.a, event.b], alg.partial_fusion(event.theta))
    if isinstance(event, ApplyLocal):
        return apply_operator(sv, [idx[event.vertex]], alg.tag_matrix(event.tag))[0]
    if isinstance(event, RemoveVertex):
        sv = undo_frame(sv, ledger, event.vertex, idx)
        return project_qubit(sv, idx[event.vertex], event.outcome)
    raise TypeError(event)


def same_state(a: StateVector, b: StateVector, tol: float = 1e-10) -> bool:
    """Equality up to global phase, comparing normalized states by fidelity."""
    return a.num_qubits == b.num_qubits and fidelity(a.normalized(), b.normalized()) >= 1 - tol


def same_vector(a: StateVector, b: StateVector, tol: float = 1e-10) -> bool:
    """Equality up to global phase including the norm."""
    if a.num_qubits != b.num_qubits:
        return False
    na, nb = a.norm, b.norm
    if abs(na - nb) > tol * max(1.0, na):
        return False
    if na < 1e-14:
        return True
    return fidelity(a.normalized(), b.normalized()) >= 1 - tol
