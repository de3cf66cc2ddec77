"""Symbolic ledger for generalized graph states.

A ledger describes the (unnormalized) vector

    exp(log_weight) * F * D * |tilts>

where ``|tilts>`` is the product of ``cos(a)|0> + sin(a)|1>`` over vertices,
``D`` is the product of all edge operators (CZ or U(theta)) and partial
fusions P(theta), and ``F`` applies each vertex's frame tags in order.
Everything in ``D`` is diagonal, so the rewrite rules below act on the
"inner" state ``D |tilts>`` and push new corrections to the front of a
vertex's frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from . import algebra as alg

TILT_TOL = 1e-9
ZERO_ANGLE = 1e-12


class LedgerError(ValueError):
    """Precondition violation on a ledger operation."""


class AnnihilatedError(ValueError):
    """The ledger would describe the zero vector."""


def pair(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise LedgerError(f"self-pair on vertex {a}")
    return (a, b) if a < b else (b, a)


def tilt_from_amplitudes(c0: float, c1: float) -> tuple[float, float, bool]:
    """Return (tilt, norm, flipped) for real amplitudes (c0, c1).

    ``flipped`` means the amplitudes have opposite sign, i.e. a Z correction
    is needed on top of the positive tilt.
    """
    norm = math.hypot(c0, c1)
    if norm < 1e-300:
        raise AnnihilatedError("vertex amplitudes vanish")
    flipped = c0 * c1 < 0
    if c0 < 0 or (c0 == 0 and c1 < 0):
        c0, c1 = -c0, -c1
    return math.atan2(abs(c1), abs(c0)), norm, flipped


@dataclass
class GeneralizedGraphState:
    """Vertices with tilts, weighted/proper edges, partial fusions and local frames.

    ``edges`` maps an ordered pair to ``None`` for a proper (CZ) edge or to a
    canonical angle for a weighted edge.  ``frame`` maps a vertex to its tags
    in application order.
    """

    tilts: dict[int, float] = field(default_factory=dict)
    edges: dict[tuple[int, int], float | None] = field(default_factory=dict)
    fusions: dict[tuple[int, int], float] = field(default_factory=dict)
    frame: dict[int, tuple[str, ...]] = field(default_factory=dict)
    log_weight: float = 0.0

    def copy(self) -> "GeneralizedGraphState":
        return GeneralizedGraphState(
            dict(self.tilts), dict(self.edges), dict(self.fusions), dict(self.frame), self.log_weight
        )

    # -- queries ---------------------------------------------------------
    @property
    def vertices(self) -> list[int]:
        return sorted(self.tilts)

    def __len__(self) -> int:
        return len(self.tilts)

    def neighbors(self, v: int) -> list[int]:
        return sorted(b if a == v else a for a, b in self.edges if v in (a, b))

    def fusion_partners(self, v: int) -> list[int]:
        return sorted(b if a == v else a for a, b in self.fusions if v in (a, b))

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def edge(self, a: int, b: int):
        return self.edges.get(pair(a, b), "absent")

    def is_proper_vertex(self, v: int) -> bool:
        return abs(self.tilts[v] - alg.QUARTER) < TILT_TOL

    def frame_of(self, v: int) -> tuple[str, ...]:
        return self.frame.get(v, ())

    def require(self, *vs: int) -> None:
        for v in vs:
            if v not in self.tilts:
                raise LedgerError(f"vertex {v} does not exist")

    def components(self) -> list[set[int]]:
        seen: set[int] = set()
        out = []
        links = list(self.edges) + list(self.fusions)
        for v in self.vertices:
            if v in seen:
                continue
            comp, stack = set(), [v]
            while stack:
                w = stack.pop()
                if w in comp:
                    continue
                comp.add(w)
                stack.extend(b if a == w else a for a, b in links if w in (a, b))
            seen |= comp
            out.append(comp)
        return out

    def validate(self) -> None:
        for v, a in self.tilts.items():
            if not -TILT_TOL <= a <= alg.HALF + TILT_TOL:
                raise LedgerError(f"tilt of {v} outside [0, pi/2]: {a}")
        for rec in (self.edges, self.fusions):
            for (a, b), theta in rec.items():
                if a >= b:
                    raise LedgerError(f"pair ({a}, {b}) is not ordered")
                self.require(a, b)
                if theta is not None and abs(theta) > alg.QUARTER + alg.ANGLE_TOL:
                    raise LedgerError(f"angle on ({a}, {b}) not canonical: {theta}")
        for v, tags in self.frame.items():
            self.require(v)
            for t in tags:
                alg.tag_matrix(t)

    # -- low-level mutation (in place, used by the rewrite rules) -------------
    def _push_inner(self, v: int, *tags: str) -> None:
        """Insert diagonal corrections underneath the existing frame of ``v``."""
        for t in tags:
            if not alg.tag_is_diagonal(t):
                raise LedgerError(f"only diagonal tags may be pushed inside the frame, got {t}")
        new = alg.simplify_tags(tuple(tags) + self.frame_of(v))
        self._set_frame(v, new)

    def _push_inner_general(self, v: int, tags) -> None:
        new = alg.simplify_tags(tuple(tags) + self.frame_of(v))
        self._set_frame(v, new)

    def _set_frame(self, v: int, tags) -> None:
        if tags:
            self.frame[v] = tuple(tags)
        else:
            self.frame.pop(v, None)

    def _apply_byproduct(self, bp: alg.Byproduct, slots: dict[int, int]) -> None:
        for slot, tags in bp.tags:
            self._push_inner(slots[slot], *tags)

    def _scale_tilt(self, v: int, f0: float, f1: float) -> None:
        """Multiply the amplitudes of ``v`` by diag(f0, f1) (real factors)."""
        a = self.tilts[v]
        tilt, norm, flipped = tilt_from_amplitudes(math.cos(a) * f0, math.sin(a) * f1)
        self.tilts[v] = tilt
        self.log_weight += math.log(norm)
        if flipped:
            self._push_inner(v, "Z")

    def _add_edge(self, a: int, b: int, theta: float | None) -> None:
        key = pair(a, b)
        old = self.edges.get(key, "absent")
        if old == "absent":
            if theta is None:
                self.edges[key] = None
                return
            new, bp = alg.canonicalize("weighted_edge", theta)
        elif old is None and theta is None:
            del self.edges[key]
            return
        else:
            # CZ = exp(-i pi/4) S_a S_b U(pi/4)
            t_old = alg.QUARTER if old is None else old
            t_new = alg.QUARTER if theta is None else theta
            if old is None:
                self._push_inner(a, "S")
                self._push_inner(b, "S")
            if theta is None:
                self._push_inner(a, "S")
                self._push_inner(b, "S")
            new, bp = alg.compose_weighted(t_old, t_new)
        self._apply_byproduct(bp, {0: key[0], 1: key[1]})
        if abs(new) < ZERO_ANGLE:
            self.edges.pop(key, None)
        else:
            self.edges[key] = new

    def _add_fusion(self, a: int, b: int, theta: float) -> None:
        key = pair(a, b)
        theta, bp = alg.canonicalize("partial_fusion", theta)
        self._apply_byproduct(bp, {0: key[0], 1: key[1]})
        if key in self.fusions:
            try:
                theta, bp, w = alg.compose_fusion(self.fusions[key], theta)
            except alg.AnnihilationError as exc:
                raise AnnihilatedError(str(exc)) from exc
            self._apply_byproduct(bp, {0: key[0], 1: key[1]})
            self.log_weight += math.log(w)
        if abs(theta) < ZERO_ANGLE:
            self.fusions.pop(key, None)
        else:
            self.fusions[key] = theta

    def _remove_vertex_z(self, v: int, outcome: int) -> None:
        """Project the inner state of ``v`` onto ``|outcome>`` and drop ``v``."""
        sigma = 1 - 2 * outcome
        amp = math.cos(self.tilts[v]) if outcome == 0 else math.sin(self.tilts[v])
        if abs(amp) < 1e-300:
            raise AnnihilatedError(f"vertex {v} has no weight on |{outcome}>")
        self.log_weight += math.log(abs(amp))
        for w in self.neighbors(v):
            theta = self.edges.pop(pair(v, w))
            if theta is None:
                if outcome:
                    self._push_inner(w, "Z")
            else:
                # cos t + i sigma sin t Z_w  ~  diag(1, exp(-2 i sigma t))
                self._push_inner(w, alg.phase_tag(-2 * sigma * theta))
        for w in self.fusion_partners(v):
            theta = self.fusions.pop(pair(v, w))
            c, s = math.cos(theta), math.sin(theta)
            self._scale_tilt(w, c + sigma * s, c - sigma * s)
        del self.tilts[v]
        self.frame.pop(v, None)


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddVertex:
    vertex: int
    alpha: float = alg.QUARTER


@dataclass(frozen=True)
class AddEdge:
    """Entangling edge applied in the graph frame; ``theta=None`` is a proper CZ."""

    a: int
    b: int
    theta: float | None = None


@dataclass(frozen=True)
class AddFusion:
    a: int
    b: int
    theta: float


@dataclass(frozen=True)
class ApplyLocal:
    """A physical local gate, applied after the existing frame."""

    vertex: int
    tag: str


@dataclass(frozen=True)
class RemoveVertex:
    """Measure the vertex in its graph-frame Z basis with the given outcome."""

    vertex: int
    outcome: int = 0


LedgerEvent = Union[AddVertex, AddEdge, AddFusion, ApplyLocal, RemoveVertex]


def ledger_apply(ledger: GeneralizedGraphState, event: LedgerEvent) -> GeneralizedGraphState:
    """Return a new ledger with ``event`` applied and compositions resolved."""
    out = ledger.copy()
    if isinstance(event, AddVertex):
        if event.vertex in out.tilts:
            raise LedgerError(f"vertex {event.vertex} already exists")
        if not 0 <= event.alpha <= alg.HALF:
            raise LedgerError(f"tilt {event.alpha} outside [0, pi/2]")
        out.tilts[event.vertex] = float(event.alpha)
    elif isinstance(event, AddEdge):
        out.require(event.a, event.b)
        out._add_edge(event.a, event.b, event.theta)
    elif isinstance(event, AddFusion):
        out.require(event.a, event.b)
        out._add_fusion(event.a, event.b, event.theta)
    elif isinstance(event, ApplyLocal):
        out.require(event.vertex)
        out._set_frame(event.vertex, alg.simplify_tags(out.frame_of(event.vertex) + (event.tag,)))
    elif isinstance(event, RemoveVertex):
        out.require(event.vertex)
        if event.outcome not in (0, 1):
            raise LedgerError("outcome must be 0 or 1")
        out._remove_vertex_z(event.vertex, event.outcome)
    else:
        raise TypeError(f"unknown event {event!r}")
    return out


def replay(events, ledger: GeneralizedGraphState | None = None) -> GeneralizedGraphState:
    ledger = GeneralizedGraphState() if ledger is None else ledger
    for e in events:
        ledger = ledger_apply(ledger, e)
    return ledger


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def star(core: int, cherries, alpha: float = alg.QUARTER, ledger=None) -> GeneralizedGraphState:
    """GHZ star: a (possibly tilted) core with proper cherries."""
    events = [AddVertex(core, alpha)]
    for c in cherries:
        events += [AddVertex(c), AddEdge(core, c)]
    return replay(events, ledger)


def path(vertices, ledger=None) -> GeneralizedGraphState:
    vertices = list(vertices)
    events = [AddVertex(v) for v in vertices]
    events += [AddEdge(a, b) for a, b in zip(vertices, vertices[1:])]
    return replay(events, ledger)


# ---------------------------------------------------------------------------
# contraction of full fusions
# ---------------------------------------------------------------------------


def contract_full_fusion(ledger: GeneralizedGraphState, a: int, b: int) -> GeneralizedGraphState:
    """Resolve a full fusion P(+-pi/4) into a proper-graph description.

    The lower id ``u`` becomes the merged vertex: it inherits every edge and
    fusion of the higher id ``v`` (sign-flipped for the odd parity), and the
    tilts of both combine on ``u``.  ``v`` stays behind as a proper cherry of
    ``u`` carrying the local frame H (even) or H then X (odd).
    """
    u, v = pair(a, b)
    ledger.require(u, v)
    theta = ledger.fusions.get((u, v))
    if theta is None or abs(abs(theta) - alg.QUARTER) > alg.ANGLE_TOL:
        raise LedgerError(f"({u}, {v}) does not carry a full fusion")
    sigma = 1 if theta > 0 else -1
    out = ledger.copy()
    del out.fusions[(u, v)]
    # P(+-pi/4) restricted to its parity subspace is sqrt(2)
    out.log_weight += 0.5 * math.log(2)

    old = out.edges.pop((u, v), "absent")
    if old is None and sigma == 1:
        out._push_inner(u, "Z")

    for w in out.neighbors(v):
        t = out.edges.pop(pair(v, w))
        if t is None:
            out._add_edge(u, w, None)
            if sigma == -1:
                out._push_inner(w, "Z")
        else:
            out._add_edge(u, w, sigma * t)
    for w in out.fusion_partners(v):
        t = out.fusions.pop(pair(v, w))
        out._add_fusion(u, w, sigma * t)

    av = out.tilts[v]
    cv, sv = math.cos(av), math.sin(av)
    if sigma == 1:
        out._scale_tilt(u, cv, sv)
    else:
        out._scale_tilt(u, sv, cv)

    out.tilts[v] = alg.QUARTER
    out.edges[(u, v)] = None
    prefix = ("H",) if sigma == 1 else ("H", "X")
    out._push_inner_general(v, prefix)
    return out


# ---------------------------------------------------------------------------
# roles, export
# ---------------------------------------------------------------------------

ROLES = ("isolated", "cherry", "intercore", "core")


def classify_vertex(ledger: GeneralizedGraphState, v: int) -> str:
    """Topological role of ``v``.

    Degree 0 is isolated and degree 1 a cherry.  A vertex of degree >= 2 is an
    intercore when exactly two of its neighbours are not cherries (it links two
    subgraphs, possibly keeping one cherry of its own); otherwise it is a core.
    """
    ledger.require(v)
    nbrs = ledger.neighbors(v)
    if not nbrs:
        return "isolated"
    if len(nbrs) == 1:
        return "cherry"
    linking = [w for w in nbrs if ledger.degree(w) >= 2]
    return "intercore" if len(linking) == 2 else "core"


def cherries_of(ledger: GeneralizedGraphState, v: int) -> list[int]:
    """Neighbours of ``v`` usable as cherries: degree 1, proper, fusion-free, CZ-linked."""
    return [
        w
        for w in ledger.neighbors(v)
        if ledger.degree(w) == 1
        and ledger.edges[pair(v, w)] is None
        and ledger.is_proper_vertex(w)
        and not ledger.fusion_partners(w)
    ]


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def to_dot(ledger: GeneralizedGraphState, name: str = "ggs") -> str:
    """Deterministic DOT rendering.

    Proper vertices are filled circles; tilted vertices are hollow and labelled
    with their tilt.  Proper edges are plain solid lines, weighted edges solid
    lines labelled with their angle, fusions dashed lines labelled with theirs.
    """
    lines = [f"digraph {name} {{", "  edge [dir=none];"]
    for v in ledger.vertices:
        if ledger.is_proper_vertex(v):
            lines.append(f'  {v} [shape=circle, style=filled, fillcolor=black, fontcolor=white, label="{v}"];')
        else:
            lines.append(f'  {v} [shape=circle, style=solid, label="{_fmt(ledger.tilts[v])}", xlabel="{v}"];')
    for (a, b), t in sorted(ledger.edges.items()):
        if t is None:
            lines.append(f"  {a} -> {b} [style=solid];")
        else:
            lines.append(f'  {a} -> {b} [style=solid, label="{_fmt(t)}"];')
    for (a, b), t in sorted(ledger.fusions.items()):
        lines.append(f'  {a} -> {b} [style=dashed, label="{_fmt(t)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


SNAPSHOT_HEADER = "GGS v1"


def to_snapshot(ledger: GeneralizedGraphState) -> str:
    """Line-oriented text: V/E/F/B records plus an optional W (log weight) line."""
    lines = [SNAPSHOT_HEADER]
    if ledger.log_weight:
        lines.append(f"W {ledger.log_weight:.17g}")
    lines += [f"V {v} {ledger.tilts[v]:.17g}" for v in ledger.vertices]
    for (a, b), t in sorted(ledger.edges.items()):
        lines.append(f"E {a} {b} {'proper' if t is None else f'{t:.17g}'}")
    lines += [f"F {a} {b} {t:.17g}" for (a, b), t in sorted(ledger.fusions.items())]
    for v in ledger.vertices:
        lines += [f"B {v} {tag}" for tag in ledger.frame_of(v)]
    return "\n".join(lines) + "\n"


def from_snapshot(text: str) -> GeneralizedGraphState:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or " ".join(rows[0]) != SNAPSHOT_HEADER:
        raise LedgerError(f"snapshot must start with {SNAPSHOT_HEADER!r}")
    g = GeneralizedGraphState()
    for row in rows[1:]:
        kind = row[0]
        try:
            if kind == "W":
                g.log_weight = float(row[1])
            elif kind == "V":
                g.tilts[int(row[1])] = float(row[2])
            elif kind == "E":
                g.edges[pair(int(row[1]), int(row[2]))] = None if row[3] == "proper" else float(row[3])
            elif kind == "F":
                g.fusions[pair(int(row[1]), int(row[2]))] = float(row[3])
            elif kind == "B":
                v = int(row[1])
                g.frame[v] = g.frame_of(v) + (row[2],)
            else:
                raise LedgerError(f"unknown record {kind!r}")
        except (IndexError, ValueError) as exc:
            raise LedgerError(f"bad snapshot line {' '.join(row)!r}: {exc}") from exc
    g.validate()
    return g
