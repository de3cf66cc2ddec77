from __future__ import annotations

import math

import numpy as np
import pytest

from ggsim import strategies as st
from ggsim.algebra import p_merge, p_success, r_exacerbate
from ggsim.ledger import AddEdge, AddFusion, AddVertex, LedgerError, classify_vertex, replay, star
from ggsim.oracle import build_from_ledger, same_state
from ggsim.statevec import ImpossibleBranchError, StateVector, read_fixture
from ggsim.verify import Instance, check_instance, grid, random_instance

P8, P4 = math.pi / 8, math.pi / 4
TOL = 1e-10


def intercore(alpha, fusion=None, edge=None):
    """Intercore 2 between proper vertices 0 and 1."""
    events = [AddVertex(0), AddVertex(1), AddVertex(2, alpha), AddEdge(2, 0), AddEdge(2, 1)]
    if fusion:
        events.append(AddFusion(0, 1, fusion))
    if edge:
        events.append(AddEdge(0, 1, edge))
    return replay(events)


def two_stars(a1=P4, a2=P4):
    return star(10, [11, 12], a2, star(0, [1, 2], a1))


def probs(outs):
    return {o.label: o.probability for o in outs}


# -- path erasure --------------------------------------------------------


def test_pm_ideal_gives_entangled_pair():
    g = replay([AddVertex(0), AddVertex(1)])
    out = st.pm_attempt(g, 0, 1, st.PMEvent(P4), forced="success")
    assert math.isclose(out.probability, 0.5)
    psi = build_from_ledger(out.ledger_after)
    bell = StateVector(np.array([0, 1, 1, 0]) / math.sqrt(2), 2)
    assert same_state(psi, bell)


def test_pm_tilted_pair():
    g = replay([AddVertex(0), AddVertex(1)])
    out = st.pm_attempt(g, 0, 1, st.PMEvent(P8), forced="success")
    # qubit 0 is the low bit: |01> in ket order (q1 q0) is index 1 when q0 = 1
    expected = StateVector([0, math.sin(P8), math.cos(P8), 0], 2)
    assert same_state(build_from_ledger(out.ledger_after), expected)


def test_pm_failure_resets_only_measured_qubits():
    g = replay([AddVertex(5), AddEdge(5, 0)], star(0, [1]))
    g = replay([AddVertex(7)], g)
    out = st.pm_attempt(g, 1, 7, st.PMEvent(P4), forced="failure:11")
    led = out.ledger_after
    assert led.tilts[1] == P4 and led.tilts[7] == P4
    assert not led.neighbors(1) and not led.neighbors(7)
    assert led.edges == {(0, 5): None}


def test_pm_event_validation():
    with pytest.raises(ValueError):
        st.PMEvent(0.0)
    with pytest.raises(ValueError):
        st.PMEvent(math.pi / 2)


def test_pm_rejects_core():
    with pytest.raises(LedgerError):
        st.pm_attempt(star(0, [1, 2]), 0, 1, st.PMEvent(P4), forced="success")


@pytest.mark.parametrize(
    "a1, a2, apm, key",
    [(P4, P4, P8, "pi4_pi4_pi8"), (P8, P4, P4, "pi8_pi4_pi4"), (P4, P4, P4, "pi4_pi4_pi4")],
)
def test_ghz_fuse_alpha3(oracle_values, a1, a2, apm, key):
    out = st.ghz_fuse(two_stars(a1, a2), 0, 10, st.PMEvent(apm), forced="success")
    ref = oracle_values["ghz_alpha3"][key]
    assert math.isclose(out.notes["alpha3"], ref, abs_tol=1e-12)
    assert math.isclose(st.ghz_fused_tilt(a1, a2, apm), ref, abs_tol=1e-12)
    led = out.ledger_after
    assert classify_vertex(led, 0) == "core"
    # the merged core keeps every cherry; the other core stays behind as a leaf
    assert led.neighbors(0) == [1, 2, 10, 11, 12]
    assert classify_vertex(led, 10) == "cherry"


def test_ghz_fuse_rejects_shared_component():
    with pytest.raises(LedgerError):
        st.ghz_fuse(star(0, [1, 2]), 0, 1, st.PMEvent(P4), forced="success")


def test_cherry_fuse_creates_intercore():
    out = st.cherry_fuse(two_stars(), 2, 12, st.PMEvent(P8), forced="success")
    led = out.ledger_after
    assert classify_vertex(led, 2) == "intercore"
    assert math.isclose(led.tilts[2], P8)
    assert led.neighbors(2) == [0, 10, 12]


# -- realignment ---------------------------------------------------------


def test_realign_pi8():
    outs = st.realign_outcomes(star(0, [1, 2], P8), 0)
    p = probs(outs)
    assert math.isclose(p["success"], 0.25) and math.isclose(p["failure"], 0.75)
    succ, fail = outs
    assert math.isclose(succ.ledger_after.tilts[0], P4)
    assert math.isclose(fail.ledger_after.tilts[0], 0.169918, abs_tol=1e-6)
    assert 1 not in succ.ledger_after.tilts and 1 not in fail.ledger_after.tilts


def test_realign_quarter_degenerate():
    outs = st.realign_outcomes(star(0, [1, 2]), 0)
    assert math.isclose(probs(outs)["success"], 0.5)
    assert all(math.isclose(o.ledger_after.tilts[0], P4) for o in outs)


def test_realign_small_tilt():
    assert probs(st.realign_outcomes(star(0, [1], 1e-4), 0))["success"] < 1e-7


def test_realign_cherryless():
    # an intercore between two cores has no degree-1 neighbour
    g = replay([AddVertex(5, P8), AddEdge(5, 0), AddEdge(5, 10)], two_stars())
    with pytest.raises(st.CherrylessError):
        st.realign(g, 5, forced="success")


# -- merging -------------------------------------------------------------


def test_merge_quarter_is_full_either_way():
    outs = st.merge_attempt_outcomes(intercore(P4), 2)
    for o in outs:
        assert st.is_full_fusion(o.ledger_after, 0, 1)
    assert math.isclose(st.total_probability(outs), 1.0)


def test_merge_pi8():
    outs = {o.label: o for o in st.merge_attempt_outcomes(intercore(P8), 2, sign=1)}
    assert math.isclose(outs["success"].probability, 0.25)
    assert math.isclose(outs["success"].ledger_after.fusions[(0, 1)], P4)
    assert math.isclose(outs["failure"].ledger_after.fusions[(0, 1)], -r_exacerbate(P8), abs_tol=1e-12)


def test_merge_small_tilt():
    outs = {o.label: o for o in st.merge_attempt_outcomes(intercore(1e-4), 2)}
    assert outs["failure"].probability > 1 - 1e-7
    assert abs(outs["failure"].ledger_after.fusions.get((0, 1), 0.0)) < 1e-7


def test_merge_with_fusion_pi8_fixture(fixtures_dir, oracle_values):
    outs = {o.label: o for o in st.merge_with_fusion_outcomes(intercore(P8, fusion=P8), 2)}
    ref = oracle_values["merge_pi8_pi8"]
    assert math.isclose(outs["success"].probability, ref["p_success"], abs_tol=1e-12)
    assert math.isclose(outs["success"].probability, 0.426777, abs_tol=1e-6)
    assert math.isclose(outs["failure"].probability, ref["p_failure"], abs_tol=1e-12)
    for label in ("success", "failure"):
        fixture = read_fixture(fixtures_dir / f"merge_pi8_{label}.txt")
        assert same_state(build_from_ledger(outs[label].ledger_after), fixture, TOL)
    assert st.is_full_fusion(outs["success"].ledger_after, 0, 1)


def test_merge_with_full_prior_is_certain():
    outs = probs(st.merge_with_fusion_outcomes(intercore(P4, fusion=P4), 2))
    assert math.isclose(outs["success"], 1.0)
    assert math.isclose(p_merge(P4, P4, 1), 1.0)


def test_merge_with_zero_prior_reduces():
    a = st.merge_with_fusion_outcomes(intercore(0.6), 2, sign=1)
    b = st.merge_attempt_outcomes(intercore(0.6), 2, sign=1)
    for x, y in zip(a, b):
        assert x.label == y.label and math.isclose(x.probability, y.probability, abs_tol=1e-12)
        assert x.ledger_after == y.ledger_after


@pytest.mark.parametrize("theta, even", [(0.0, 0.5), (P4, 1.0), (P8, (1 + math.sin(P4)) / 2)])
def test_merge_deterministic_split(theta, even):
    outs = st.merge_deterministic_outcomes(intercore(P4, fusion=theta), 2)
    p = probs(outs)
    assert math.isclose(p["even"], even, abs_tol=1e-12)
    assert math.isclose(p["odd"], 1 - even, abs_tol=1e-12)
    for o in outs:
        if o.probability > 0:
            assert st.is_full_fusion(o.ledger_after, 0, 1)


def test_merge_deterministic_needs_untilted():
    with pytest.raises(LedgerError):
        st.merge_deterministic(intercore(P8), 2, forced="even")


def test_repeated_merge_failures_stay_canonical():
    rng = np.random.default_rng(3)
    g = intercore(0.3)
    for _ in range(20):
        out = st.merge_with_fusion(g, 2, forced="failure")
        theta = out.ledger_after.fusions.get((0, 1), 0.0)
        assert abs(theta) <= P4 + 1e-12
        g = replay([AddVertex(2, float(rng.uniform(0.1, 1.4))), AddEdge(2, 0), AddEdge(2, 1)], out.ledger_after)


# -- bridging ------------------------------------------------------------


def test_bridge_pi8():
    outs = {o.label: o for o in st.bridge_attempt_outcomes(intercore(P8), 2, sign=1)}
    assert math.isclose(outs["success"].probability, 0.25)
    assert math.isclose(outs["success"].ledger_after.edges[(0, 1)], P4)
    assert math.isclose(outs["failure"].ledger_after.edges[(0, 1)], -r_exacerbate(P8), abs_tol=1e-12)


def test_bridge_quarter_failure_is_full_edge():
    outs = st.bridge_attempt_outcomes(intercore(P4), 2)
    assert math.isclose(probs(outs)["success"], 0.5)
    assert all(st.is_full_edge(o.ledger_after, 0, 1) for o in outs)


def test_bridge_small_tilt():
    outs = {o.label: o for o in st.bridge_attempt_outcomes(intercore(1e-4), 2)}
    assert abs(outs["failure"].ledger_after.edges.get((0, 1), 0.0)) < 1e-7


def test_bridge_with_edge_pi8_fixture(fixtures_dir, oracle_values):
    outs = {o.label: o for o in st.bridge_with_edge_outcomes(intercore(P8, edge=P8), 2)}
    ref = oracle_values["bridge_pi8_pi8"]
    assert math.isclose(outs["success"].probability, ref["p_b"], abs_tol=1e-6)
    assert math.isclose(outs["failure"].notes["added_edge"], ref["lambda_f"], abs_tol=1e-6)
    for label in ("success", "failure"):
        fixture = read_fixture(fixtures_dir / f"bridge_pi8_{label}.txt")
        assert same_state(build_from_ledger(outs[label].ledger_after), fixture, 1e-9)
    assert st.is_full_edge(outs["success"].ledger_after, 0, 1)


def test_bridge_with_zero_prior_reduces():
    a = st.bridge_with_edge_outcomes(intercore(0.5), 2, sign=1)
    b = st.bridge_attempt_outcomes(intercore(0.5), 2, sign=1)
    for x, y in zip(a, b):
        assert math.isclose(x.probability, y.probability, abs_tol=1e-12)
        assert x.ledger_after == y.ledger_after


def test_bridge_with_edge_at_quarter_is_deterministic():
    for theta in (-0.5, 0.2, 0.7):
        outs = st.bridge_with_edge_outcomes(intercore(P4, edge=theta), 2)
        assert all(st.is_full_edge(o.ledger_after, 0, 1) for o in outs)


@pytest.mark.parametrize("theta, added", [(0.0, P4), (P4, 0.0), (-P8, 3 * P8)])
def test_bridge_deterministic_target(theta, added):
    outs = {o.label: o for o in st.bridge_deterministic_outcomes(intercore(P4, edge=theta), 2, sign=1)}
    assert math.isclose(outs["target"].probability, 0.5)
    # the recorded angle is reduced to (-pi/2, pi/2]; U(3 pi/8) is kept as is there
    assert math.isclose(outs["target"].notes["added_edge"], added, abs_tol=1e-12)
    for o in outs.values():
        assert st.is_full_edge(o.ledger_after, 0, 1) or (theta == P4 and o.label == "target")


def test_bridge_deterministic_full_prior_target_keeps_edge():
    outs = {o.label: o for o in st.bridge_deterministic_outcomes(intercore(P4, edge=P4), 2, sign=1)}
    assert st.is_full_edge(outs["target"].ledger_after, 0, 1)


# -- shared invariants ---------------------------------------------------


@pytest.mark.parametrize("op", list(st.OUTCOME_FUNCTIONS)[1:])
def test_branch_completeness_on_grid(op):
    for alpha, theta in grid(9):
        if op.endswith("deterministic"):
            alpha = P4
        g = intercore(alpha, fusion=theta if op == "merge_with_fusion" or op == "merge_deterministic" else None,
                      edge=theta if op in ("bridge_with_edge", "bridge_deterministic") else None)
        outs = st.OUTCOME_FUNCTIONS[op](g, 2)
        assert math.isclose(st.total_probability(outs), 1.0, abs_tol=1e-12)


def test_recycling_benefit_on_grid():
    for alpha, theta in grid(9):
        m = probs(st.merge_with_fusion_outcomes(intercore(alpha, fusion=theta), 2))["success"]
        b = probs(st.bridge_with_edge_outcomes(intercore(alpha, edge=theta), 2))["success"]
        assert m >= p_success(alpha) - 1e-12
        assert b >= p_success(alpha) - 1e-12


@pytest.mark.parametrize("op", ["realign", "merge_attempt", "bridge_with_edge", "ghz_fuse", "cherry_fuse"])
def test_oracle_agreement_sample(op):
    rng = np.random.default_rng(17)
    for _ in range(20):
        f, p = check_instance(random_instance(op, rng))
        assert f < TOL and p < TOL


def test_choose_forced_and_sampled():
    outs = st.realign_outcomes(star(0, [1], P8), 0)
    assert st.choose(outs, forced="failure").label == "failure"
    with pytest.raises(ValueError):
        st.choose(outs, forced="even")
    with pytest.raises(ValueError):
        st.choose(outs)
    rng = np.random.default_rng(0)
    hits = sum(st.choose(outs, rng=rng).branch == "success" for _ in range(20000))
    assert abs(hits / 20000 - 0.25) < 5 * math.sqrt(0.25 * 0.75 / 20000)


def test_impossible_forced_branch():
    g = replay([AddVertex(0, 0.0), AddVertex(1, 0.0)])
    with pytest.raises(ImpossibleBranchError):
        st.pm_attempt(g, 0, 1, st.PMEvent(P4), forced="success")


def test_instance_type_is_reexported():
    assert Instance("realign", star(0, [1], P8), {"tilted": 0, "cherry": 1}).op == "realign"
