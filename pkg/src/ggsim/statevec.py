"""Dense statevector simulator used as the ground truth for every symbolic rule.

Basis labelling is little-endian: qubit 0 is the least significant bit of the
amplitude index, so amplitude ``i`` corresponds to ``x_q = (i >> q) & 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_QUBITS = 16
ANNIHILATION_TOL = 1e-12
IMPOSSIBLE_BRANCH_TOL = 1e-15


class AnnihilatedStateError(ValueError):
    """Raised when a non-unitary operation maps the state to (numerically) zero."""


class ImpossibleBranchError(ValueError):
    """Raised when a forced measurement branch has vanishing probability."""


@dataclass(frozen=True)
class Operator:
    """A one- or two-qubit operator with a unitarity flag."""

    matrix: np.ndarray
    unitary: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise ValueError(f"operator must be 2x2 or 4x4, got {m.shape}")
        if self.unitary and not np.allclose(m.conj().T @ m, np.eye(len(m)), atol=1e-12):
            raise ValueError("matrix flagged unitary is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def num_qubits(self) -> int:
        return 1 if self.matrix.shape == (2, 2) else 2


class StateVector:
    """Complex amplitudes over ``num_qubits`` qubits (little-endian)."""

    def __init__(self, amplitudes, num_qubits: int | None = None, max_qubits: int = MAX_QUBITS):
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        n = int(round(np.log2(len(amps)))) if num_qubits is None else num_qubits
        if len(amps) != 2**n:
            raise ValueError(f"expected {2 ** n} amplitudes for {n} qubits, got {len(amps)}")
        if n > max_qubits:
            raise ValueError(f"{n} qubits exceeds the dense cap of {max_qubits}")
        self.num_qubits = n
        self.amplitudes = amps

    @classmethod
    def product(cls, single_qubit_states) -> "StateVector":
        """Tensor product of one-qubit states; the first entry is qubit 0."""
        amps = np.ones(1, dtype=complex)
        for s in single_qubit_states:
            amps = np.kron(np.asarray(s, dtype=complex), amps)
        return cls(amps, len(single_qubit_states))

    @classmethod
    def basis(cls, bits) -> "StateVector":
        idx = sum(int(b) << q for q, b in enumerate(bits))
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[idx] = 1.0
        return cls(amps, len(bits))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm
        if nrm < ANNIHILATION_TOL:
            raise AnnihilatedStateError("cannot normalize a zero state")
        return StateVector(self.amplitudes / nrm, self.num_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.num_qubits)

    def tensor(self) -> np.ndarray:
        # axis k of the tensor is qubit n-1-k
        return self.amplitudes.reshape([2] * self.num_qubits) if self.num_qubits else self.amplitudes

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits}, norm={self.norm:.6g})"


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def _check_targets(sv: StateVector, targets) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct, got {targets}")
    for t in targets:
        if not 0 <= t < sv.num_qubits:
            raise IndexError(f"qubit {t} out of range for {sv.num_qubits} qubits")
    return targets


def apply_operator(sv: StateVector, targets, op, renormalize: bool = False):
    """Apply a 1- or 2-qubit operator to ``targets``.

    For a two-qubit operator the matrix is indexed little-endian as well:
    row/column ``x_a + 2 x_b`` for ``targets = (a, b)``.

    Returns
    -------
    (StateVector, float)
        The transformed state and the Euclidean norm of the unnormalized
        result relative to the input norm.  With ``renormalize`` the returned
        state has unit norm.
    """
    if isinstance(op, Operator):
        m = op.matrix
    else:
        m = np.asarray(op, dtype=complex)
    targets = _check_targets(sv, targets)
    k = len(targets)
    if m.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {m.shape} does not match {k} targets")
    n = sv.num_qubits
    psi = sv.tensor()
    if k == 1:
        ax = _axis(n, targets[0])
        out = np.tensordot(m, psi, axes=([1], [ax]))
        out = np.moveaxis(out, 0, ax)
    else:
        a, b = targets
        # little-endian index x_a + 2 x_b -> tensor axes (x_b, x_a)
        m4 = m.reshape(2, 2, 2, 2)  # [xb', xa', xb, xa]
        axa, axb = _axis(n, a), _axis(n, b)
        out = np.tensordot(m4, psi, axes=([2, 3], [axb, axa]))
        out = np.moveaxis(out, [0, 1], [axb, axa])
    out = out.reshape(-1)
    in_norm = sv.norm
    weight = float(np.linalg.norm(out) / in_norm) if in_norm else 0.0
    result = StateVector(out, n)
    if renormalize:
        if weight < ANNIHILATION_TOL:
            raise AnnihilatedStateError(f"operator annihilated the state (weight {weight:.3g})")
        result = StateVector(out / np.linalg.norm(out), n)
    return result, weight


def project_qubit(sv: StateVector, q: int, outcome: int) -> StateVector:
    """Unnormalized projection onto ``|outcome>`` of qubit ``q``, which is removed."""
    (q,) = _check_targets(sv, [q])
    psi = sv.tensor()
    sub = np.take(psi, int(outcome), axis=_axis(sv.num_qubits, q))
    return StateVector(np.ascontiguousarray(sub).reshape(-1), sv.num_qubits - 1)


def branch_probabilities(sv: StateVector, q: int, pre_rotation=None) -> np.ndarray:
    if pre_rotation is not None:
        sv, _ = apply_operator(sv, [q], pre_rotation)
    total = sv.norm**2
    return np.array([project_qubit(sv, q, k).norm ** 2 / total for k in (0, 1)])


def measure_qubit(sv: StateVector, q: int, pre_rotation=None, forced_outcome=None, rng=None):
    """Rotate qubit ``q`` and measure it in the computational basis.

    Returns ``(outcome, probability, post)`` where ``post`` is the normalized
    state of the remaining qubits.
    """
    if pre_rotation is not None:
        sv, _ = apply_operator(sv, [q], pre_rotation)
    total = sv.norm**2
    branches = [project_qubit(sv, q, k) for k in (0, 1)]
    probs = [b.norm**2 / total for b in branches]
    if forced_outcome is None:
        rng = np.random.default_rng() if rng is None else rng
        outcome = int(rng.random() >= probs[0])
    else:
        outcome = int(forced_outcome)
        if probs[outcome] < IMPOSSIBLE_BRANCH_TOL:
            raise ImpossibleBranchError(f"outcome {outcome} has probability {probs[outcome]:.3g}")
    return outcome, float(probs[outcome]), branches[outcome].normalized()


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for normalized states."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"qubit counts differ: {a.num_qubits} vs {b.num_qubits}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def insert_qubit(sv: StateVector, q: int, state) -> StateVector:
    """Tensor a fresh one-qubit ``state`` in at position ``q``."""
    n = sv.num_qubits
    if not 0 <= q <= n:
        raise IndexError(q)
    psi = sv.tensor() if n else sv.amplitudes.reshape(())
    s = np.asarray(state, dtype=complex)
    out = np.multiply.outer(s, psi)  # new axis first
    out = np.moveaxis(out, 0, n - q)
    return StateVector(out.reshape(-1), n + 1)


def schmidt_coefficients(sv: StateVector, qubits) -> np.ndarray:
    """Schmidt coefficients of the cut ``qubits`` | rest, in decreasing order."""
    n = sv.num_qubits
    qubits = list(_check_targets(sv, qubits))
    rest = [q for q in range(n) if q not in qubits]
    psi = sv.normalized().tensor()
    perm = [_axis(n, q) for q in qubits] + [_axis(n, q) for q in rest]
    mat = np.transpose(psi, perm).reshape(2 ** len(qubits), -1)
    return np.linalg.svd(mat, compute_uv=False)


def write_fixture(path, sv: StateVector) -> None:
    lines = [f"n={sv.num_qubits}"]
    lines += [f"{a.real:.17g} {a.imag:.17g}" for a in sv.amplitudes]
    Path(path).write_text("\n".join(lines) + "\n")


def read_fixture(path) -> StateVector:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines[0].startswith("n="):
        raise ValueError(f"{path}: missing 'n=<qubits>' header")
    n = int(lines[0][2:])
    amps = [complex(float(re), float(im)) for re, im in (ln.split() for ln in lines[1:])]
    return StateVector(amps, n)
