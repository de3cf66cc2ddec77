"""Growth protocols as ledger transformations with exact branch probabilities.

Every probabilistic operation enumerates its branches; ``forced`` selects one
by label (``"success"``, ``"failure"``, or an outcome-specific label such as
``"even"``), otherwise a branch is sampled with ``rng``.

Measured vertices are read out after undoing their frame.  For the
intercore measurements (merge and bridge families) the measured qubit's
graph-frame Z value controls ``Z3 Z4`` on its two neighbours, so a rotation
``R`` followed by a computational-basis readout with outcome ``k`` applies
``sum_x t(x) R[k, x] (Z3 Z4)^x`` to the rest of the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import algebra as alg
from .ledger import (
    AnnihilatedError,
    GeneralizedGraphState,
    LedgerError,
    cherries_of,
    contract_full_fusion,
    pair,
)
from .statevec import ImpossibleBranchError

PROB_TOL = 1e-15


class CherrylessError(LedgerError):
    """Realignment requested on a vertex without a usable cherry."""


@dataclass
class StrategyOutcome:
    branch: str  # "success" | "failure"
    probability: float
    ledger_after: GeneralizedGraphState
    label: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.label:
            self.label = self.branch


@dataclass(frozen=True)
class PMEvent:
    """A heralded single click: monitored tilt plus the detector that fired."""

    alpha_pm: float
    detector: int = 0

    def __post_init__(self):
        if not 0 < self.alpha_pm < alg.HALF:
            raise ValueError(f"alpha_pm={self.alpha_pm} outside (0, pi/2)")


def choose(outcomes: list[StrategyOutcome], forced=None, rng=None) -> StrategyOutcome:
    if forced is not None:
        hits = [o for o in outcomes if o.label == forced] or [o for o in outcomes if o.branch == forced]
        if not hits:
            raise ValueError(f"no branch labelled {forced!r}; have {[o.label for o in outcomes]}")
        if len(hits) > 1:
            raise ValueError(f"{forced!r} is ambiguous; use one of {[o.label for o in hits]}")
        hit = hits[0]
        if hit.probability < PROB_TOL or hit.ledger_after is None:
            raise ImpossibleBranchError(f"branch {forced!r} has probability {hit.probability:.3g}")
        return hit
    if rng is None:
        raise ValueError("either forced or rng must be given")
    u = rng.random()
    acc = 0.0
    live = [o for o in outcomes if o.probability > 0 and o.ledger_after is not None]
    for o in live:
        acc += o.probability
        if u < acc:
            return o
    return live[-1]


# ---------------------------------------------------------------------------
# preconditions
# ---------------------------------------------------------------------------


def _intercore_targets(g: GeneralizedGraphState, c: int) -> tuple[int, int]:
    g.require(c)
    nbrs = g.neighbors(c)
    if len(nbrs) != 2:
        raise LedgerError(f"intercore {c} must have exactly two neighbours, has {nbrs}")
    for w in nbrs:
        if g.edges[pair(c, w)] is not None:
            raise LedgerError(f"edge ({c}, {w}) must be a proper edge")
    if g.fusion_partners(c):
        raise LedgerError(f"intercore {c} carries a fusion")
    return nbrs[0], nbrs[1]


def _require_merge_targets(g: GeneralizedGraphState, n3: int, n4: int) -> None:
    for w in (n3, n4):
        if not g.is_proper_vertex(w):
            raise LedgerError(f"merge target {w} must be untilted")
        if set(g.fusion_partners(w)) - {n3, n4}:
            raise LedgerError(f"merge target {w} carries unrelated fusions")


def _drop(g: GeneralizedGraphState, v: int) -> None:
    for w in g.neighbors(v):
        del g.edges[pair(v, w)]
    del g.tilts[v]
    g.frame.pop(v, None)


def _ensure_weighted(g: GeneralizedGraphState, a: int, b: int) -> float:
    """Current edge angle between a and b, rewriting a proper edge as U(pi/4)."""
    key = pair(a, b)
    t = g.edges.get(key, "absent")
    if t == "absent":
        return 0.0
    if t is None:
        # CZ = exp(-i pi/4) S_a S_b U(pi/4)
        g._push_inner(a, "S")
        g._push_inner(b, "S")
        g.edges[key] = alg.QUARTER
        return alg.QUARTER
    return t


# ---------------------------------------------------------------------------
# projective measurement (path erasure)
# ---------------------------------------------------------------------------


def _pm_outcomes(g: GeneralizedGraphState, a: int, b: int, event: PMEvent) -> list[StrategyOutcome]:
    g.require(a, b)
    if a == b:
        raise LedgerError("PM needs two distinct qubits")
    for v in (a, b):
        if g.fusion_partners(v):
            raise LedgerError(f"PM qubit {v} carries a fusion")
    ta, tb = g.tilts[a], g.tilts[b]
    p00 = (math.cos(ta) * math.cos(tb)) ** 2
    p11 = (math.sin(ta) * math.sin(tb)) ** 2
    p_odd = max(0.0, 1.0 - p00 - p11)

    base = g.copy()
    # local corrections are applied physically before the measurement
    base.frame.pop(a, None)
    base.frame.pop(b, None)

    out = []
    succ = None
    if p_odd > PROB_TOL:
        succ = base.copy()
        # cos(a_pm)|01><01| + sin(a_pm)|10><10| = diag_a(cos, sin) * P(-pi/4) / sqrt(2)
        succ._scale_tilt(a, math.cos(event.alpha_pm), math.sin(event.alpha_pm))
        if event.detector:
            succ._push_inner(a, "Z")
        succ._add_fusion(a, b, -alg.QUARTER)
        succ.log_weight -= 0.5 * math.log(2)
    out.append(StrategyOutcome("success", p_odd, succ, notes={"alpha_pm": event.alpha_pm, "parity": "odd"}))
    for x, p in ((0, p00), (1, p11)):
        led = None
        if p > PROB_TOL:
            led = base.copy()
            led._remove_vertex_z(a, x)
            led._remove_vertex_z(b, x)
            led.tilts[a] = alg.QUARTER
            led.tilts[b] = alg.QUARTER
        out.append(StrategyOutcome("failure", p, led, label=f"failure:{x}{x}", notes={"reset": (a, b), "outcome": x}))
    return out


def pm_attempt(g, a, b, event: PMEvent, forced=None, rng=None) -> StrategyOutcome:
    """Parity projection of two fresh or cherry qubits.

    Success (single click, odd sector) applies
    ``cos(alpha)|01><01| + sin(alpha)|10><10|`` and records it as a tilt on
    ``a`` plus an odd full fusion.  Failure (even sector) projects both
    qubits onto ``|00>`` or ``|11>`` in their graph frame; they are then
    re-prepared as fresh isolated vertices.
    """
    for v in (a, b):
        g.require(v)
        if g.degree(v) > 1:
            raise LedgerError(f"PM qubit {v} must be fresh or a cherry (degree {g.degree(v)})")
    return choose(_pm_outcomes(g, a, b, event), forced, rng)


def cherry_fuse(g, k1, k2, event: PMEvent, forced=None, rng=None) -> StrategyOutcome:
    """PM on two cherries followed by contraction.

    On success the lower id becomes a tilted intercore linking the two
    cores and the other qubit becomes its single cherry.
    """
    out = pm_attempt(g, k1, k2, event, forced, rng)
    if out.branch == "success":
        out.ledger_after = contract_full_fusion(out.ledger_after, k1, k2)
    return out


def ghz_fuse(g, core1, core2, event: PMEvent, forced=None, rng=None) -> StrategyOutcome:
    """PM on the cores of two disjoint GHZ stars.

    On success the lower core id is the single tilted core of the merged
    star; its tilt is reported in ``notes["alpha3"]``.  Failure measures
    both cores, which disentangles their cherries.
    """
    g.require(core1, core2)
    for comp in g.components():
        if core1 in comp and core2 in comp:
            raise LedgerError("cores must belong to disjoint GHZ states")
    out = choose(_pm_outcomes(g, core1, core2, event), forced, rng)
    if out.branch == "success":
        out.ledger_after = contract_full_fusion(out.ledger_after, core1, core2)
        out.notes["alpha3"] = out.ledger_after.tilts[min(core1, core2)]
    return out


def ghz_fused_tilt(alpha1: float, alpha2: float, alpha_pm: float) -> float:
    """Tilt of the merged core (seen from ``core1``) after a successful GHZ fusion."""
    return math.atan2(math.sin(alpha1) * math.sin(alpha_pm) * math.cos(alpha2),
                      math.cos(alpha1) * math.cos(alpha_pm) * math.sin(alpha2))


# ---------------------------------------------------------------------------
# realignment
# ---------------------------------------------------------------------------


def realign_outcomes(g, tilted, cherry=None) -> list[StrategyOutcome]:
    g.require(tilted)
    usable = cherries_of(g, tilted)
    if cherry is None:
        if not usable:
            raise CherrylessError(f"vertex {tilted} has no cherry")
        cherry = usable[0]
    elif cherry not in usable:
        raise CherrylessError(f"{cherry} is not a usable cherry of {tilted}")
    if g.fusion_partners(tilted):
        raise LedgerError(f"vertex {tilted} carries a fusion")
    a = g.tilts[tilted]
    ps = alg.p_success(a)
    ca, sa = math.cos(a), math.sin(a)

    succ = g.copy()
    _drop(succ, cherry)
    succ.tilts[tilted] = alg.QUARTER
    succ.log_weight += math.log(math.sqrt(2) * sa * ca) if ps > 0 else 0.0

    fail = g.copy()
    _drop(fail, cherry)
    fail.tilts[tilted] = alg.r_exacerbate(a)
    fail.log_weight += 0.5 * math.log(ca**4 + sa**4)
    if sa > 0:
        fail._push_inner(tilted, "Z")
    notes = {"vertex": tilted, "cherry": cherry, "alpha": a, "rotation": "M(alpha) H"}
    return [
        StrategyOutcome("success", ps, succ if ps > PROB_TOL else None, notes=dict(notes, outcome=1)),
        StrategyOutcome("failure", 1 - ps, fail, notes=dict(notes, outcome=0)),
    ]


def realign(g, tilted, cherry=None, forced=None, rng=None) -> StrategyOutcome:
    """Measure a cherry of ``tilted`` with ``M(alpha)`` (after a Hadamard into the GHZ frame).

    Success removes the tilt; failure leaves tilt ``R(alpha)``.  The cherry is
    consumed either way.
    """
    return choose(realign_outcomes(g, tilted, cherry), forced, rng)


# ---------------------------------------------------------------------------
# merging
# ---------------------------------------------------------------------------


def _merge_branches(g, c, prior_theta, sign, rotation_alpha, labels):
    """Measure intercore ``c`` with ``M(sign * rotation_alpha)``; see module docstring."""
    n3, n4 = _intercore_targets(g, c)
    _require_merge_targets(g, n3, n4)
    a = g.tilts[c]
    t = (math.cos(a), math.sin(a))
    m = alg.m_rotation(sign * rotation_alpha).real
    theta1 = g.fusions.get(pair(n3, n4), 0.0)
    if prior_theta is not None and abs(prior_theta - theta1) > 1e-9:
        raise LedgerError(f"prior fusion is {theta1}, caller expected {prior_theta}")
    outs = []
    for k, label in ((1, labels[1]), (0, labels[0])):
        c0, c1 = t[0] * m[k, 0], t[1] * m[k, 1]
        scale = math.hypot(c0, c1)
        # c0 + c1 ZZ = scale * (+-) P(theta)
        theta = math.atan2(c1, c0)
        # expectation <ZZ> on the rest of the graph is sin(2 theta1)
        prob = c0 * c0 + c1 * c1 + 2 * c0 * c1 * math.sin(2 * theta1)
        prob = max(0.0, prob)
        led = None
        if prob > PROB_TOL:
            led = g.copy()
            _drop(led, c)
            led.log_weight += math.log(scale)
            try:
                led._add_fusion(n3, n4, theta)
            except AnnihilatedError:
                led, prob = None, 0.0
        outs.append((k, label, prob, led, theta))
    return n3, n4, theta1, outs


def merge_attempt_outcomes(g, intercore, sign=1):
    _, _, theta1, outs = _merge_branches(g, intercore, 0.0, sign, g.tilts[intercore], ("failure", "success"))
    return _merge_wrap(intercore, sign, theta1, outs, "M(sign*alpha)")


def _merge_wrap(c, sign, theta1, outs, rotation):
    res = []
    for k, label, prob, led, theta in outs:
        branch = "success" if label in ("success", "even", "odd") else "failure"
        res.append(
            StrategyOutcome(
                branch,
                prob,
                led,
                label=label,
                notes={"vertex": c, "sign": sign, "prior_theta": theta1, "added_fusion": theta,
                       "rotation": rotation, "outcome": k},
            )
        )
    return res


def merge_attempt(g, intercore, sign=1, forced=None, rng=None) -> StrategyOutcome:
    """Target P(sign*pi/4) between the two neighbours of a tilted intercore.

    Success has probability p_s(alpha); failure leaves P(-sign R(alpha)).
    At alpha = pi/4 both branches are full fusions.
    """
    g.require(intercore)
    n3, n4 = _intercore_targets(g, intercore)
    if pair(n3, n4) in g.fusions:
        raise LedgerError("prior fusion present; use merge_with_fusion")
    return choose(merge_attempt_outcomes(g, intercore, sign), forced, rng)


def merge_with_fusion_outcomes(g, intercore, prior_theta=None, sign=None):
    g.require(intercore)
    n3, n4 = _intercore_targets(g, intercore)
    theta1 = g.fusions.get(pair(n3, n4), 0.0)
    if sign is None:
        sign = alg.matched_merge_sign(theta1)
    _, _, theta1, outs = _merge_branches(g, intercore, prior_theta, sign, g.tilts[intercore], ("failure", "success"))
    return _merge_wrap(intercore, sign, theta1, outs, "M(sign*alpha)")


def merge_with_fusion(g, intercore, prior_theta=None, sign=None, forced=None, rng=None) -> StrategyOutcome:
    """Second merge attempt on top of a prior partial fusion.

    Succeeds with p_m = p_s(alpha)(1 + sign sin(2 theta1)); the default sign
    matches the sign of the prior fusion.
    """
    return choose(merge_with_fusion_outcomes(g, intercore, prior_theta, sign), forced, rng)


def merge_deterministic_outcomes(g, intercore, prior_theta=None):
    g.require(intercore)
    if not g.is_proper_vertex(intercore):
        raise LedgerError(f"intercore {intercore} is tilted; realign first")
    _, _, theta1, outs = _merge_branches(g, intercore, prior_theta, 1, alg.QUARTER, ("odd", "even"))
    return _merge_wrap(intercore, 1, theta1, outs, "M(pi/4)")


def merge_deterministic(g, intercore, prior_theta=None, forced=None, rng=None) -> StrategyOutcome:
    """Untilted intercore: both outcomes complete a full fusion (even or odd)."""
    return choose(merge_deterministic_outcomes(g, intercore, prior_theta), forced, rng)


# ---------------------------------------------------------------------------
# bridging
# ---------------------------------------------------------------------------


def _bridge_branches(g, c, beta, labels):
    """Measure intercore ``c`` with ``M(beta) S``; returns added edge angles."""
    n3, n4 = _intercore_targets(g, c)
    a = g.tilts[c]
    ca, sa = math.cos(a), math.sin(a)
    sb, cb = math.sin(beta), math.cos(beta)
    outs = []
    # row 1 of M(beta) S: (sin b, i cos b); row 0: (-cos b, i sin b)
    for k, (re, im) in ((1, (sb * ca, cb * sa)), (0, (-cb * ca, sb * sa))):
        prob = re * re + im * im
        lam = math.atan2(im, re)
        if lam > alg.HALF:
            lam -= math.pi
        elif lam <= -alg.HALF:
            lam += math.pi
        led = None
        if prob > PROB_TOL:
            led = g.copy()
            _drop(led, c)
            led.log_weight += 0.5 * math.log(prob)
            led._add_edge(n3, n4, lam)
        outs.append((k, labels[k], prob, led, lam))
    return n3, n4, outs


def _bridge_wrap(c, sign, theta1, params, outs, det=False):
    res = []
    for k, label, prob, led, lam in outs:
        branch = "success" if (det or label == "success") else "failure"
        res.append(
            StrategyOutcome(
                branch,
                prob,
                led,
                label=label,
                notes={"vertex": c, "sign": sign, "prior_theta": theta1, "added_edge": lam,
                       "beta": params.beta, "outcome": k},
            )
        )
    return res


def bridge_attempt_outcomes(g, intercore, sign=1):
    g.require(intercore)
    n3, n4 = _intercore_targets(g, intercore)
    if pair(n3, n4) in g.edges:
        raise LedgerError("prior edge present; use bridge_with_edge")
    params = alg.bridge_params(g.tilts[intercore], 0.0, sign)
    _, _, outs = _bridge_branches(g, intercore, params.beta, {1: "success", 0: "failure"})
    return _bridge_wrap(intercore, sign, 0.0, params, outs)


def bridge_attempt(g, intercore, sign=1, forced=None, rng=None) -> StrategyOutcome:
    """Target U(sign*pi/4) between the neighbours of a tilted intercore.

    Rotation M(sign*alpha) S; success p_s(alpha), failure adds U(-sign R(alpha)).
    """
    return choose(bridge_attempt_outcomes(g, intercore, sign), forced, rng)


def bridge_with_edge_outcomes(g, intercore, prior_theta=None, sign=None):
    g.require(intercore)
    n3, n4 = _intercore_targets(g, intercore)
    work = g.copy()
    theta1 = _ensure_weighted(work, n3, n4)
    if prior_theta is not None and abs(prior_theta - theta1) > 1e-9:
        raise LedgerError(f"prior edge is {theta1}, caller expected {prior_theta}")
    a = work.tilts[intercore]
    if sign is None:
        sign = alg.matched_bridge_sign(a, theta1)
    params = alg.bridge_params(a, theta1, sign)
    _, _, outs = _bridge_branches(work, intercore, params.beta, {1: "success", 0: "failure"})
    return _bridge_wrap(intercore, sign, theta1, params, outs)


def bridge_with_edge(g, intercore, prior_theta=None, sign=None, forced=None, rng=None) -> StrategyOutcome:
    """Second bridge attempt on top of a prior weighted edge ``theta1``.

    Success (probability p_b) adds U(sign*pi/4 - theta1), completing a full
    edge; failure adds U(lambda_f).  Parameters from ``bridge_params``.
    """
    return choose(bridge_with_edge_outcomes(g, intercore, prior_theta, sign), forced, rng)


def bridge_deterministic_outcomes(g, intercore, prior_theta=None, sign=1):
    g.require(intercore)
    if not g.is_proper_vertex(intercore):
        raise LedgerError(f"intercore {intercore} is tilted; realign first")
    n3, n4 = _intercore_targets(g, intercore)
    work = g.copy()
    theta1 = _ensure_weighted(work, n3, n4)
    if prior_theta is not None and abs(prior_theta - theta1) > 1e-9:
        raise LedgerError(f"prior edge is {theta1}, caller expected {prior_theta}")
    params = alg.bridge_params(alg.QUARTER, theta1, sign)
    _, _, outs = _bridge_branches(work, intercore, params.beta, {1: "target", 0: "complement"})
    return _bridge_wrap(intercore, sign, theta1, params, outs, det=True)


def bridge_deterministic(g, intercore, prior_theta=None, sign=1, forced=None, rng=None) -> StrategyOutcome:
    """Untilted intercore: adds U(sign*pi/4 - theta1) or U(-sign*pi/4 - theta1), each with probability 1/2.

    Either way the edge between the neighbours becomes a full edge.
    """
    return choose(bridge_deterministic_outcomes(g, intercore, prior_theta, sign), forced, rng)


def is_full_edge(g: GeneralizedGraphState, a: int, b: int) -> bool:
    t = g.edges.get(pair(a, b), "absent")
    return t is None or (t != "absent" and abs(abs(t) - alg.QUARTER) < alg.ANGLE_TOL)


def is_full_fusion(g: GeneralizedGraphState, a: int, b: int) -> bool:
    t = g.fusions.get(pair(a, b))
    return t is not None and abs(abs(t) - alg.QUARTER) < alg.ANGLE_TOL


OUTCOME_FUNCTIONS = {
    "realign": realign_outcomes,
    "merge_attempt": merge_attempt_outcomes,
    "merge_with_fusion": merge_with_fusion_outcomes,
    "merge_deterministic": merge_deterministic_outcomes,
    "bridge_attempt": bridge_attempt_outcomes,
    "bridge_with_edge": bridge_with_edge_outcomes,
    "bridge_deterministic": bridge_deterministic_outcomes,
}


def total_probability(outcomes) -> float:
    return float(np.sum([o.probability for o in outcomes]))
