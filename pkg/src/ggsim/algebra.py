"""Operator definitions, angle canonicalization and closed-form probabilities.

Two-qubit operators here are all of the form ``a * 1 + b * ZZ``; they are
symmetric under exchange of the two qubits, so the qubit ordering of the
4x4 matrices does not matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUARTER = math.pi / 4
HALF = math.pi / 2
ANGLE_TOL = 1e-9
DOMAIN_SLACK = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])
ZZ = np.diag([1, -1, -1, 1]).astype(complex)
I4 = np.eye(4, dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


class AnnihilationError(ValueError):
    """The composed operator is zero (orthogonal projections)."""


# ---------------------------------------------------------------------------
# local tags
# ---------------------------------------------------------------------------

INVOLUTIONS = {"X", "Y", "Z", "H"}
_FIXED_TAGS = {"X": X, "Y": Y, "Z": Z, "H": H, "S": S, "Sdg": SDG}
_DIAGONAL = {"Z", "S", "Sdg"}


def phase_tag(phi: float) -> str:
    """Tag for diag(1, exp(i phi))."""
    return f"Ph:{phi:.17g}"


def tag_matrix(tag: str) -> np.ndarray:
    if tag in _FIXED_TAGS:
        return _FIXED_TAGS[tag]
    if tag.startswith("Ph:"):
        return np.diag([1, np.exp(1j * float(tag[3:]))])
    raise ValueError(f"unknown local tag {tag!r}")


def tag_is_diagonal(tag: str) -> bool:
    return tag in _DIAGONAL or tag.startswith("Ph:")


def tag_inverse(tag: str) -> str:
    if tag in INVOLUTIONS:
        return tag
    if tag == "S":
        return "Sdg"
    if tag == "Sdg":
        return "S"
    if tag.startswith("Ph:"):
        return phase_tag(-float(tag[3:]))
    raise ValueError(f"unknown local tag {tag!r}")


def simplify_tags(tags) -> tuple[str, ...]:
    """Cancel adjacent inverse pairs (tags listed in application order)."""
    out: list[str] = []
    for t in tags:
        tag_matrix(t)  # validate
        if out and tag_inverse(t) == out[-1]:
            out.pop()
        else:
            out.append(t)
    return tuple(out)


def tags_matrix(tags) -> np.ndarray:
    m = I2.copy()
    for t in tags:
        m = tag_matrix(t) @ m
    return m


@dataclass(frozen=True)
class Byproduct:
    """Symbolic local correction: a global phase and per-slot tag sequences.

    ``tags`` maps a slot (qubit position within the operator, or a vertex id
    in a ledger) to tags in application order.
    """

    phase: complex = 1.0
    tags: tuple[tuple[int, tuple[str, ...]], ...] = field(default=())

    @classmethod
    def identity(cls) -> "Byproduct":
        return cls()

    @classmethod
    def from_map(cls, phase=1.0, mapping=None) -> "Byproduct":
        items = []
        for slot, ts in sorted((mapping or {}).items()):
            ts = simplify_tags(ts)
            if ts:
                items.append((slot, ts))
        return cls(complex(phase), tuple(items))

    def as_map(self) -> dict[int, tuple[str, ...]]:
        return dict(self.tags)

    @property
    def is_trivial(self) -> bool:
        return not self.tags and abs(self.phase - 1) < 1e-12

    def then(self, other: "Byproduct") -> "Byproduct":
        """Byproduct equal to applying ``self`` first and ``other`` second."""
        merged = self.as_map()
        for slot, ts in other.tags:
            merged[slot] = merged.get(slot, ()) + ts
        return Byproduct.from_map(self.phase * other.phase, merged)

    def matrix(self, num_slots: int) -> np.ndarray:
        m = np.ones((1, 1), dtype=complex)
        local = self.as_map()
        for slot in range(num_slots):
            m = np.kron(tags_matrix(local.get(slot, ())), m)
        return self.phase * m


ZZ_SLOTS = {0: ("Z",), 1: ("Z",)}


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

_PARAMETRIC = {"weighted_edge", "partial_fusion", "m_rotation"}
_FIXED = {"s_gate": S, "hadamard": H, "pauli_x": X, "pauli_z": Z, "control_z": CZ}


def weighted_edge(theta: float) -> np.ndarray:
    return math.cos(theta) * I4 + 1j * math.sin(theta) * ZZ


def partial_fusion(theta: float) -> np.ndarray:
    return math.cos(theta) * I4 + math.sin(theta) * ZZ


def m_rotation(alpha: float) -> np.ndarray:
    return math.sin(alpha) * X - math.cos(alpha) * Z


def operator_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """Matrix of one of the named operators.

    ``weighted_edge``, ``partial_fusion`` and ``m_rotation`` take an angle;
    ``s_gate``, ``hadamard``, ``pauli_x``, ``pauli_z`` and ``control_z`` do not.
    """
    if kind in _PARAMETRIC:
        if angle is None:
            raise ValueError(f"{kind} requires an angle")
        return {"weighted_edge": weighted_edge, "partial_fusion": partial_fusion, "m_rotation": m_rotation}[kind](
            float(angle)
        )
    if kind in _FIXED:
        if angle is not None:
            raise ValueError(f"{kind} takes no angle")
        return _FIXED[kind].copy()
    raise ValueError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# canonicalization and composition
# ---------------------------------------------------------------------------


def canonicalize(kind: str, theta: float) -> tuple[float, Byproduct]:
    """Reduce an edge or fusion angle into [-pi/4, pi/4].

    Returns ``(theta_c, byproduct)`` with ``op(theta) = byproduct . op(theta_c)``
    (the byproduct commutes with the operator, so the order is immaterial).
    Weighted edges at the boundary are represented by +pi/4.
    """
    k = round(theta / HALF)
    r = theta - k * HALF
    if kind == "weighted_edge":
        if r < -QUARTER + ANGLE_TOL:
            r += HALF
            k -= 1
        phase = (1, 1j, -1, -1j)[k % 4]
        tags = ZZ_SLOTS if k % 2 else {}
        return r, Byproduct.from_map(phase, tags)
    if kind == "partial_fusion":
        if k % 2 == 0:
            return r, Byproduct.from_map((-1) ** (k // 2))
        return -r, Byproduct.from_map((-1) ** ((k - 1) // 2), ZZ_SLOTS)
    raise ValueError(f"cannot canonicalize {kind!r}")


def compose_weighted(theta1: float, theta2: float) -> tuple[float, Byproduct]:
    """Weighted edges add: U(t1) U(t2) = U(t1 + t2)."""
    return canonicalize("weighted_edge", theta1 + theta2)


def compose_fusion(theta1: float, theta2: float) -> tuple[float, Byproduct, float]:
    """Product of two canonical partial fusions.

    P(t1) P(t2) = cos(t1 - t2) 1 + sin(t1 + t2) ZZ = w P(t) with
    w = hypot(cos(t1 - t2), sin(t1 + t2)) and t = atan2(sin(t1 + t2), cos(t1 - t2)).
    For canonical inputs the result is canonical and the byproduct trivial.
    """
    c = math.cos(theta1 - theta2)
    s = math.sin(theta1 + theta2)
    w = math.hypot(c, s)
    if w < DOMAIN_SLACK:
        raise AnnihilationError(f"P({theta1:.6g}) P({theta2:.6g}) is the zero operator")
    theta = math.atan2(s, c)
    if abs(theta) > QUARTER + ANGLE_TOL:
        theta, bp = canonicalize("partial_fusion", theta)
        return theta, bp, w
    return theta, Byproduct.identity(), w


# ---------------------------------------------------------------------------
# success probabilities
# ---------------------------------------------------------------------------


def p_success(alpha):
    """Success probability of a tuned measurement on a vertex with tilt ``alpha``."""
    if np.ndim(alpha):
        return 0.5 * np.sin(2 * np.asarray(alpha)) ** 2
    return 0.5 * math.sin(2 * alpha) ** 2


def r_exacerbate(alpha: float) -> float:
    """Tilt left behind when the tuned measurement fails."""
    arg = math.cos(alpha) ** 2 / math.sqrt(1 - p_success(alpha))
    if arg > 1 + DOMAIN_SLACK or arg < -1 - DOMAIN_SLACK:
        raise ValueError(f"arccos argument {arg!r} outside [-1, 1]")
    # same angle as arccos(arg) but without the loss of precision near 0
    return math.atan2(math.sin(alpha) ** 2, math.cos(alpha) ** 2)


def matched_merge_sign(theta: float) -> int:
    return 1 if theta >= 0 else -1


def matched_bridge_sign(alpha: float, theta: float) -> int:
    return 1 if math.sin(2 * theta) * math.cos(2 * alpha) >= 0 else -1


def p_merge(alpha: float, theta: float, sign: int) -> float:
    """Merge success with a prior partial fusion ``theta``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return p_success(alpha) * (1 + sign * math.sin(2 * theta))


@dataclass(frozen=True)
class BridgeParams:
    """Measurement angle and outcome data for bridging onto a prior edge."""

    beta: float
    n_factor: float
    p_b: float
    lambda_f: float
    target: float  # edge angle added on success

    def __post_init__(self):
        if not 0 <= self.p_b <= 1 + 1e-12:
            raise ValueError(f"p_b={self.p_b} outside [0, 1]")
        if self.n_factor <= 0:
            raise ValueError("n_factor must be positive")


def bridge_params(alpha: float, theta: float, sign: int) -> BridgeParams:
    """Rotation M(beta).S on a tilted intercore that adds U(sign*pi/4 - theta).

    Closed forms (oracle-derived)::

        cos(beta) = N cos(alpha) (sign cos(theta) - sin(theta))
        N         = (1 - sign sin(2 theta) cos(2 alpha)) ** -1/2
        p_b       = p_s(alpha) N**2
        cos(lambda_f) = cos(alpha) cos(beta) / sqrt(1 - p_b)

    with ``tan(lambda_f) = -tan(alpha) tan(beta)`` fixing the sign of the
    failure edge.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    target = sign * QUARTER - theta
    sa, ca = math.sin(alpha), math.cos(alpha)
    d = math.hypot(sa * math.cos(target), ca * math.sin(target))
    beta = math.atan2(sa * math.cos(target) / d, ca * math.sin(target) / d)
    n_factor = 1.0 / math.sqrt(1 - sign * math.sin(2 * theta) * math.cos(2 * alpha))
    p_b = p_success(alpha) * n_factor**2
    lam = math.atan2(-math.sin(beta) * sa, math.cos(beta) * ca)
    if lam > HALF:
        lam -= math.pi
    elif lam <= -HALF:
        lam += math.pi
    return BridgeParams(beta=beta, n_factor=n_factor, p_b=min(p_b, 1.0), lambda_f=lam, target=target)
