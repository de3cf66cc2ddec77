"""Randomized oracle checks shared by the ``verify`` subcommand and the test suite.

Each strategy branch is simulated physically on the dense vector of the input
ledger (undo the measured qubit's frame, rotate, project) and compared with
the ledger the strategy predicts.  The comparison uses unnormalized vectors,
so branch probabilities and post-measurement states are checked together.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import algebra as alg
from . import strategies as st
from .ledger import AddEdge, AddFusion, AddVertex, ApplyLocal, GeneralizedGraphState, ledger_apply, pair, replay
from .oracle import build_from_ledger, qubit_map, undo_frame
from .statevec import StateVector, apply_operator, fidelity, insert_qubit, project_qubit

FIDELITY_TOL = 1e-10
PROB_TOL = 1e-10
LOCAL_TAGS = ("X", "Y", "Z", "H", "S", "Sdg")


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int = 0
    worst_infidelity: float = 0.0
    worst_prob_error: float = 0.0
    seconds: float = 0.0
    detail: str = ""


@dataclass
class Instance:
    op: str
    ledger: GeneralizedGraphState
    args: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# physical simulation of each measurement
# ---------------------------------------------------------------------------


def _measure(sv, ledger, v, rotation, outcome):
    idx = qubit_map(ledger)
    sv = undo_frame(sv, ledger, v, idx)
    sv, _ = apply_operator(sv, [idx[v]], rotation)
    return project_qubit(sv, idx[v], outcome)


def _prior_edge(ledger, a, b):
    t = ledger.edges.get(pair(a, b), "absent")
    if t == "absent":
        return 0.0
    return alg.QUARTER if t is None else t


def physical_rotation(inst: Instance, label_outcome: int | None = None):
    """Measurement rotation on the consumed qubit, derived from the protocol alone."""
    g, a = inst.ledger, inst.args
    c = a.get("intercore")
    if inst.op == "realign":
        alpha = g.tilts[a["tilted"]]
        return alg.m_rotation(alpha) @ alg.H
    if inst.op in ("merge_attempt", "merge_with_fusion"):
        n3, n4 = g.neighbors(c)
        sign = a.get("sign")
        if sign is None:
            sign = alg.matched_merge_sign(g.fusions.get(pair(n3, n4), 0.0))
        return alg.m_rotation(sign * g.tilts[c])
    if inst.op == "merge_deterministic":
        return alg.m_rotation(alg.QUARTER)
    n3, n4 = g.neighbors(c)
    theta = _prior_edge(g, n3, n4)
    alpha = g.tilts[c] if inst.op != "bridge_deterministic" else alg.QUARTER
    sign = a.get("sign")
    if sign is None:
        sign = alg.matched_bridge_sign(alpha, theta) if inst.op == "bridge_with_edge" else 1
    beta = alg.bridge_params(alpha, theta, sign).beta
    return alg.m_rotation(beta) @ alg.S


def simulate_branch(inst: Instance, outcome_label: str) -> tuple[StateVector, float]:
    """Unnormalized post-measurement vector and branch probability by brute force."""
    g, a = inst.ledger, inst.args
    sv = build_from_ledger(g, normalize=False)
    total = sv.norm**2
    if inst.op in ("pm_attempt", "cherry_fuse", "ghz_fuse"):
        return _simulate_pm(g, sv, total, a, outcome_label)
    target = a["cherry"] if inst.op == "realign" else a["intercore"]
    outcome = _outcome_index(inst.op, outcome_label)
    post = _measure(sv, g, target, physical_rotation(inst), outcome)
    return post, post.norm**2 / total


def _outcome_index(op, label):
    if op == "bridge_deterministic":
        return {"target": 1, "complement": 0}[label]
    if op == "merge_deterministic":
        return {"even": 1, "odd": 0}[label]
    return {"success": 1, "failure": 0}[label]


def _simulate_pm(g, sv, total, a, label):
    p, q = a["a"], a["b"]
    ev: st.PMEvent = a["event"]
    idx = qubit_map(g)
    sv = undo_frame(sv, g, p, idx)
    sv = undo_frame(sv, g, q, idx)
    i, j = idx[p], idx[q]
    if label == "success":
        odd = np.diag([0, 1, 1, 0]).astype(complex)  # index x_p + 2 x_q
        p_odd = apply_operator(sv, [i, j], odd)[0].norm ** 2 / total
        amp_p = np.diag([math.cos(ev.alpha_pm), math.sin(ev.alpha_pm)]).astype(complex)
        if ev.detector:
            amp_p = alg.Z @ amp_p
        post, _ = apply_operator(sv, [i, j], odd)
        post, _ = apply_operator(post, [i], amp_p)
        return post, p_odd
    x = int(label[-1])
    hi, lo = max(i, j), min(i, j)
    post = project_qubit(project_qubit(sv, hi, x), lo, x)
    prob = post.norm**2 / total
    plus = [1 / math.sqrt(2), 1 / math.sqrt(2)]
    post = insert_qubit(insert_qubit(post, lo, plus), hi, plus)
    return post, prob


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def _tilt(rng, lo=0.05, hi=alg.HALF - 0.05):
    return float(rng.uniform(lo, hi))


def _angle(rng):
    return float(rng.uniform(-alg.QUARTER + 0.02, alg.QUARTER - 0.02))


def _dress(g, rng, vertices, p_frame=0.5):
    """Random outer frames on the given vertices."""
    for v in vertices:
        if rng.random() < p_frame:
            for _ in range(int(rng.integers(1, 3))):
                tag = LOCAL_TAGS[int(rng.integers(len(LOCAL_TAGS)))]
                if rng.random() < 0.2:
                    tag = alg.phase_tag(float(rng.uniform(-math.pi, math.pi)))
                g = ledger_apply(g, ApplyLocal(v, tag))
    return g


def _spectators(rng, g, first_id, anchors, count):
    """Attach ``count`` extra vertices with random edges to ``anchors``."""
    events = []
    for k in range(count):
        v = first_id + k
        events.append(AddVertex(v, _tilt(rng) if rng.random() < 0.5 else alg.QUARTER))
        w = anchors[int(rng.integers(len(anchors)))]
        events.append(AddEdge(v, w, None if rng.random() < 0.5 else _angle(rng)))
    return replay(events, g)


def random_instance(op: str, rng: np.random.Generator) -> Instance:
    """A 3-6 qubit ledger meeting the preconditions of ``op``."""
    extra = int(rng.integers(0, 3))
    if op == "realign":
        n_ch = int(rng.integers(1, 3))
        events = [AddVertex(0, _tilt(rng))]
        for c in range(1, n_ch + 1):
            events += [AddVertex(c), AddEdge(0, c)]
        g = replay(events)
        g = _spectators(rng, g, 10, [0], min(extra + (1 if n_ch == 1 else 0), 6 - (n_ch + 1)))
        g = _dress(g, rng, g.vertices)
        return Instance(op, g, {"tilted": 0, "cherry": 1})
    if op in ("merge_attempt", "merge_with_fusion", "merge_deterministic",
              "bridge_attempt", "bridge_with_edge", "bridge_deterministic"):
        det = op.endswith("deterministic")
        c = 5
        events = [AddVertex(3), AddVertex(4), AddVertex(c, alg.QUARTER if det else _tilt(rng)),
                  AddEdge(c, 3), AddEdge(c, 4)]
        merge = op.startswith("merge")
        if op in ("merge_with_fusion", "merge_deterministic") and rng.random() < 0.85:
            events.append(AddFusion(3, 4, _angle(rng)))
        if op in ("bridge_with_edge", "bridge_deterministic") and rng.random() < 0.85:
            events.append(AddEdge(3, 4, None if rng.random() < 0.2 else _angle(rng)))
        g = replay(events)
        g = _spectators(rng, g, 10, [3, 4], extra)
        if not merge and rng.random() < 0.3 and extra:
            g = ledger_apply(g, AddFusion(10, 4 if 10 not in g.neighbors(4) else 3, _angle(rng)))
        g = _dress(g, rng, g.vertices)
        args = {"intercore": c}
        if op in ("merge_attempt", "bridge_attempt") or rng.random() < 0.3:
            args["sign"] = int(rng.choice([-1, 1]))
        if op == "merge_deterministic":
            args.pop("sign", None)
        return Instance(op, g, args)
    if op == "pm_attempt":
        # a cherry of a small star, a fresh qubit, and optionally a cherry of a tilted vertex
        g = replay([AddVertex(0), AddVertex(1), AddEdge(0, 1), AddVertex(2), AddVertex(3, _tilt(rng))])
        if extra:
            g = ledger_apply(ledger_apply(g, AddVertex(4)), AddEdge(3, 4))
            g = _dress(g, rng, g.vertices)
            return Instance(op, g, {"a": 1, "b": 4, "event": _pm_event(rng)})
        g = _dress(g, rng, g.vertices)
        return Instance(op, g, {"a": 1, "b": 2, "event": _pm_event(rng)})
    if op == "cherry_fuse":
        g = replay([AddVertex(0, _tilt(rng)), AddVertex(1), AddEdge(0, 1),
                    AddVertex(2, _tilt(rng)), AddVertex(3), AddEdge(2, 3)])
        if extra:
            g = replay([AddVertex(4), AddEdge(0, 4)], g)
        g = _dress(g, rng, g.vertices)
        return Instance(op, g, {"a": 1, "b": 3, "event": _pm_event(rng)})
    if op == "ghz_fuse":
        n1 = int(rng.integers(1, 3))
        n2 = int(rng.integers(1, 3))
        events = [AddVertex(0, _tilt(rng)), AddVertex(10, _tilt(rng))]
        for k in range(n1):
            events += [AddVertex(1 + k), AddEdge(0, 1 + k)]
        for k in range(n2):
            events += [AddVertex(11 + k), AddEdge(10, 11 + k)]
        g = replay(events)
        g = _dress(g, rng, [v for v in g.vertices if v not in (0, 10)])
        return Instance(op, g, {"a": 0, "b": 10, "event": _pm_event(rng)})
    raise ValueError(f"unknown op {op!r}")


def _pm_event(rng):
    return st.PMEvent(_tilt(rng), int(rng.integers(0, 2)))


OPS = (
    "pm_attempt",
    "cherry_fuse",
    "ghz_fuse",
    "realign",
    "merge_attempt",
    "merge_with_fusion",
    "merge_deterministic",
    "bridge_attempt",
    "bridge_with_edge",
    "bridge_deterministic",
)


def predicted_outcomes(inst: Instance) -> list[st.StrategyOutcome]:
    """Every branch of ``inst`` as predicted by the symbolic strategies."""
    g, a = inst.ledger, inst.args
    if inst.op in ("pm_attempt", "cherry_fuse", "ghz_fuse"):
        fn = {"pm_attempt": st.pm_attempt, "cherry_fuse": st.cherry_fuse, "ghz_fuse": st.ghz_fuse}[inst.op]
        outs = []
        for label in ("success", "failure:00", "failure:11"):
            try:
                outs.append(fn(g, a["a"], a["b"], a["event"], forced=label))
            except st.ImpossibleBranchError:
                pass
        return outs
    if inst.op == "realign":
        return st.realign_outcomes(g, a["tilted"], a["cherry"])
    kwargs = {k: v for k, v in a.items() if k == "sign"}
    return st.OUTCOME_FUNCTIONS[inst.op](g, a["intercore"], **kwargs)


def check_instance(inst: Instance) -> tuple[float, float]:
    """Worst infidelity and worst probability error over the branches of ``inst``."""
    worst_f, worst_p = 0.0, 0.0
    outs = predicted_outcomes(inst)
    if inst.op not in ("pm_attempt", "cherry_fuse", "ghz_fuse"):
        worst_p = abs(sum(o.probability for o in outs) - 1)
    for o in outs:
        sim, prob = simulate_branch(inst, o.label)
        worst_p = max(worst_p, abs(prob - o.probability))
        if o.ledger_after is None:
            worst_p = max(worst_p, prob)
            continue
        pred = build_from_ledger(o.ledger_after, normalize=False)
        if prob < 1e-14:
            continue
        # unnormalized comparison; the branch norm is the square root of its probability
        f = fidelity(sim.normalized(), pred.normalized()) if sim.num_qubits == pred.num_qubits else 0.0
        worst_f = max(worst_f, 1 - f)
        worst_p = max(worst_p, abs(sim.norm - pred.norm) / max(sim.norm, 1e-300) * prob)
    return worst_f, worst_p


def oracle_suite(n_ledgers: int = 500, seed: int = 7, ops=OPS) -> list[CheckResult]:
    """Randomized oracle equivalence for every strategy operation."""
    rng = np.random.default_rng(seed)
    results = []
    for op in ops:
        t0 = time.perf_counter()
        wf = wp = 0.0
        for _ in range(n_ledgers):
            inst = random_instance(op, rng)
            f, p = check_instance(inst)
            wf, wp = max(wf, f), max(wp, p)
        results.append(
            CheckResult(f"oracle:{op}", wf <= FIDELITY_TOL and wp <= PROB_TOL, n_ledgers, wf, wp,
                        time.perf_counter() - t0)
        )
    return results


# ---------------------------------------------------------------------------
# formula grids
# ---------------------------------------------------------------------------


def grid(n: int = 9):
    """(alpha, theta) grid: alpha in (0, pi/2), theta in (-pi/4, pi/4)."""
    alphas = np.linspace(0.05, alg.HALF - 0.05, n)
    thetas = np.linspace(-alg.QUARTER + 0.02, alg.QUARTER - 0.02, n)
    return [(float(a), float(t)) for a in alphas for t in thetas]


def _grid_instance(op, alpha, theta, sign=None):
    c = 5
    events = [AddVertex(3), AddVertex(4), AddVertex(c, alpha), AddEdge(c, 3), AddEdge(c, 4)]
    if op == "merge_with_fusion" and theta:
        events.append(AddFusion(3, 4, theta))
    if op == "bridge_with_edge" and theta:
        events.append(AddEdge(3, 4, theta))
    args = {"intercore": c}
    if sign is not None:
        args["sign"] = sign
    return Instance(op, replay(events), args)


def formula_grid_checks(n: int = 9) -> list[CheckResult]:
    """Closed forms against brute-force branch probabilities and states on an n*n grid."""
    out = []
    pts = grid(n)

    # realignment: p_s and R
    t0 = time.perf_counter()
    err = 0.0
    for a, _ in pts:
        inst = Instance("realign", replay([AddVertex(0, a), AddVertex(1), AddEdge(0, 1), AddVertex(2), AddEdge(0, 2)]),
                        {"tilted": 0, "cherry": 1})
        _, p1 = simulate_branch(inst, "success")
        sim0, _ = simulate_branch(inst, "failure")
        err = max(err, abs(p1 - alg.p_success(a)))
        # remaining core tilt, read from the oracle state in the GHZ frame
        rest = sim0.normalized().amplitudes
        r_oracle = math.atan2(abs(rest[0b11]), abs(rest[0b00]))
        err = max(err, abs(r_oracle - alg.r_exacerbate(a)))
    out.append(CheckResult("grid:p_s,R", err <= 1e-10, len(pts), 0.0, err, time.perf_counter() - t0))

    # merging with a prior fusion
    t0 = time.perf_counter()
    err = 0.0
    for a, t in pts:
        for sign in (1, -1):
            inst = _grid_instance("merge_with_fusion", a, t, sign)
            _, p = simulate_branch(inst, "success")
            err = max(err, abs(p - alg.p_merge(a, t, sign)))
    out.append(CheckResult("grid:p_m", err <= 1e-10, 2 * len(pts), 0.0, err, time.perf_counter() - t0))

    # bridging with a prior edge: probability, success edge and failure edge
    t0 = time.perf_counter()
    err = 0.0
    for a, t in pts:
        for sign in (1, -1):
            bp = alg.bridge_params(a, t, sign)
            inst = _grid_instance("bridge_with_edge", a, t, sign)
            for label, lam, prob in (("success", bp.target, bp.p_b), ("failure", bp.lambda_f, 1 - bp.p_b)):
                sim, p = simulate_branch(inst, label)
                err = max(err, abs(p - prob))
                ref = replay([AddVertex(3), AddVertex(4)])
                ref = ledger_apply(ref, AddEdge(3, 4, t)) if t else ref
                ref = ledger_apply(ref, AddEdge(3, 4, lam))
                err = max(err, 1 - fidelity(sim.normalized(), build_from_ledger(ref)))
    out.append(CheckResult("grid:bridge_params", err <= 1e-10, 2 * len(pts), 0.0, err, time.perf_counter() - t0))

    # limiting cases
    t0 = time.perf_counter()
    err = 0.0
    for a, _ in pts:
        for sign in (1, -1):
            bp = alg.bridge_params(a, 0.0, sign)
            err = max(err, abs(bp.p_b - alg.p_success(a)), abs(bp.n_factor - 1))
            err = max(err, abs(bp.beta - sign * a) if abs(bp.beta - sign * a) < 1 else abs(abs(bp.beta - sign * a) - math.pi))
            err = max(err, abs(alg.p_merge(a, 0.0, sign) - alg.p_success(a)))
            lam_expected = -sign * alg.r_exacerbate(a)
            err = max(err, _angle_gap(bp.lambda_f, lam_expected))
    for _, t in pts:
        for sign in (1, -1):
            bp = alg.bridge_params(alg.QUARTER, t, sign)
            # untilted intercore: both outcomes equally likely, failure edge is the complementary full edge
            err = max(err, abs(bp.p_b - 0.5), _angle_gap(bp.lambda_f, -sign * alg.QUARTER - t))
    out.append(CheckResult("grid:limits", err <= 1e-10, 4 * len(pts), 0.0, err, time.perf_counter() - t0))
    return out


def _angle_gap(x, y):
    """Distance between two edge angles modulo pi (U(t + pi) = -U(t))."""
    d = (x - y) % math.pi
    return min(d, math.pi - d)


def benefit_checks(n: int = 9) -> list[CheckResult]:
    """Matched-sign second attempts never do worse than a first attempt."""
    worst_m = worst_b = math.inf
    for a, t in grid(n):
        ps = alg.p_success(a)
        worst_m = min(worst_m, alg.p_merge(a, t, alg.matched_merge_sign(t)) - ps)
        worst_b = min(worst_b, alg.bridge_params(a, t, alg.matched_bridge_sign(a, t)).p_b - ps)
    return [
        CheckResult("benefit:p_m>=p_s", worst_m >= -1e-15, n * n, 0.0, worst_m),
        CheckResult("benefit:p_b>=p_s", worst_b >= -1e-15, n * n, 0.0, worst_b),
    ]


def hadamard_check() -> CheckResult:
    m = alg.m_rotation(-alg.QUARTER)
    k = np.argmax(np.abs(alg.H))
    phase = m.flat[k] / alg.H.flat[k]
    err = float(np.max(np.abs(m - phase * alg.H)))
    return CheckResult("hadamard:M(-pi/4)=H", err <= 1e-12 and abs(abs(phase) - 1) <= 1e-12, 1, 0.0, err)


def run_all(n_ledgers: int = 500, seed: int = 7) -> list[CheckResult]:
    return oracle_suite(n_ledgers, seed) + formula_grid_checks() + benefit_checks() + [hadamard_check()]


def format_table(results) -> str:
    rows = [f"{'check':28s} {'cases':>6s} {'infidelity':>11s} {'prob err':>11s} {'time/s':>7s}  result"]
    for r in results:
        rows.append(
            f"{r.name:28s} {r.cases:6d} {r.worst_infidelity:11.3e} {r.worst_prob_error:11.3e} "
            f"{r.seconds:7.2f}  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(rows)
