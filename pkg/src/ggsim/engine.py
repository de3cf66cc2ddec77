"""Monte Carlo growth experiments: naive post-selection versus adaptive repair.

Trials are grouped in fixed-size chunks; chunk ``k`` draws from its own
stream spawned from ``SeedSequence(seed)``, so results depend only on the
seed and never on how chunks are scheduled.

Two back ends share the decision rules in ``choose_action``:

* ``bond`` runs vectorized over a chunk using the closed-form branch
  probabilities;
* ``ghz(n)`` and ``chain(n)`` run the ledger strategies trial by trial.
"""

from __future__ import annotations

import csv
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import algebra as alg
from . import strategies as st
from .emission import (
    EmissionModel,
    adaptive_expected_success,
    alpha_of_time,
    click_time_sample,
    fidelity_of_alpha,
    naive_window_mass,
)
from .ledger import GeneralizedGraphState, RemoveVertex, cherries_of, contract_full_fusion, ledger_apply, pair, star

CHUNK = 1 << 16
Z95 = 1.959963984540054
MODES = ("naive", "adaptive")
SIGN_RULES = ("matched", "fixed+", "fixed-")
_TARGET_RE = re.compile(r"^(bond|ghz\((\d+)\)|chain\((\d+)\))$")


@dataclass(frozen=True)
class StrategyPolicy:
    mode: str = "adaptive"
    epsilon: float = 1e-5
    sign_rule: str = "matched"
    max_retries: int = 3
    realign_first: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if self.sign_rule not in SIGN_RULES:
            raise ValueError(f"sign_rule must be one of {SIGN_RULES}, got {self.sign_rule!r}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def merge_sign(self, theta: float) -> int:
        if self.sign_rule == "matched":
            return alg.matched_merge_sign(theta)
        return 1 if self.sign_rule == "fixed+" else -1

    def bridge_sign(self, alpha: float, theta: float) -> int:
        if self.sign_rule == "matched":
            return alg.matched_bridge_sign(alpha, theta)
        return 1 if self.sign_rule == "fixed+" else -1


def parse_target(target: str) -> tuple[str, int]:
    """``"bond"``, ``"ghz(n)"`` or ``"chain(n)"`` -> (kind, number of cores)."""
    m = _TARGET_RE.match(target.replace(" ", ""))
    if not m:
        raise ValueError(f"target must be bond, ghz(n) or chain(n), got {target!r}")
    if m.group(1) == "bond":
        return "bond", 2
    kind = "ghz" if m.group(2) else "chain"
    n = int(m.group(2) or m.group(3))
    if n < 2:
        raise ValueError(f"{kind} needs at least 2 cores")
    return kind, n


@dataclass(frozen=True)
class ExperimentConfig:
    model: EmissionModel = field(default_factory=EmissionModel)
    policy: StrategyPolicy = field(default_factory=StrategyPolicy)
    target: str = "bond"
    trials: int = 1_000_000
    seed: int = 42

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        parse_target(self.target)

    @property
    def link(self) -> str:
        """How neighbouring cores are joined: a parity fusion for GHZ growth, an edge otherwise."""
        return "merge" if parse_target(self.target)[0] == "ghz" else "bridge"


@dataclass
class TrialRecords:
    t_click: np.ndarray
    alpha: np.ndarray
    actions: list[str]
    outcome: list[str]


@dataclass
class TrialStats:
    trials: int
    successes: int
    rate: float
    ci95: tuple[float, float]
    histogram: dict[str, int]
    mode: str = "adaptive"
    target: str = "bond"
    metric: str = ""
    standard_error: float = 0.0
    expected_rate: float | None = None
    retry_successes: int = 0
    retry_rate: float = 0.0
    mean_recycled_angle: float = 0.0
    recycled_attempts: int = 0
    recycled_successes: int = 0
    recycled_expected: float = 0.0
    recycled_variance: float = 0.0
    action_counts: dict[str, int] = field(default_factory=dict)
    records: TrialRecords | None = field(default=None, repr=False)

    def to_json(self) -> str:
        d = {
            "trials": self.trials,
            "successes": self.successes,
            "rate": self.rate,
            "ci95": list(self.ci95),
            "histogram": self.histogram,
            "mode": self.mode,
            "target": self.target,
            "metric": self.metric,
            "standard_error": self.standard_error,
            "expected_rate": self.expected_rate,
            "retry_successes": self.retry_successes,
            "retry_rate": self.retry_rate,
            "mean_recycled_angle": self.mean_recycled_angle,
            "recycled_attempts": self.recycled_attempts,
            "recycled_successes": self.recycled_successes,
            "recycled_expected": self.recycled_expected,
            "action_counts": dict(sorted(self.action_counts.items())),
        }
        return json.dumps(d, indent=2) + "\n"


def normal_ci(successes: int, trials: int) -> tuple[float, float, float]:
    """Rate, standard error and 95% half-width under the normal approximation."""
    p = successes / trials
    se = math.sqrt(p * (1 - p) / trials)
    return p, se, Z95 * se


# ---------------------------------------------------------------------------
# decision rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionContext:
    link: str = "bridge"  # "merge" or "bridge"
    intercore: int | None = None
    budget_left: int = 1


@dataclass(frozen=True)
class Action:
    name: str
    vertex: int | None = None


def _tilted(g, v):
    return not g.is_proper_vertex(v)


def choose_action(ledger: GeneralizedGraphState, policy: StrategyPolicy, context: ActionContext) -> Action:
    """Next protocol step, from the ledger topology and the policy alone.

    A tilted, fusion-free vertex that still has a cherry is realigned first.
    A cherryless intercore is consumed by the merge or bridge variant that
    matches its tilt and any partial record already linking its neighbours.
    Without an intercore a new PM is requested while the budget lasts.
    """
    c = context.intercore
    if policy.realign_first:
        focus = [c] if c is not None and c in ledger.tilts else []
        focus += [v for v in ledger.vertices if v != c]
        for v in focus:
            if _tilted(ledger, v) and not ledger.fusion_partners(v) and cherries_of(ledger, v):
                return Action("realign", v)
    if c is not None and c in ledger.tilts:
        if ledger.degree(c) > 2:
            # a leftover cherry on an untilted intercore: spend it, both branches stay untilted
            return Action("realign", c)
        n3, n4 = ledger.neighbors(c)
        if context.link == "merge":
            if not _tilted(ledger, c):
                return Action("merge_deterministic", c)
            has_prior = pair(n3, n4) in ledger.fusions
            return Action("merge_with_fusion" if has_prior else "merge_attempt", c)
        if not _tilted(ledger, c):
            return Action("bridge_deterministic", c)
        has_prior = pair(n3, n4) in ledger.edges
        return Action("bridge_with_edge" if has_prior else "bridge_attempt", c)
    if context.budget_left > 0:
        return Action("pm_attempt")
    return Action("give_up")


# ---------------------------------------------------------------------------
# vectorized bond back end
# ---------------------------------------------------------------------------

# action codes for the vectorized recorder
_A_PM, _A_PM_FAIL, _A_REALIGN, _A_REALIGN_FAIL = 1, 2, 3, 4
_A_DET, _A_FIRST, _A_FIRST_FAIL, _A_SECOND, _A_SECOND_FAIL = 5, 6, 7, 8, 9
_A_ACCEPT, _A_REJECT = 10, 11
_NAMES = {
    "bridge": {_A_DET: "bridge_deterministic", _A_FIRST: "bridge_attempt", _A_SECOND: "bridge_with_edge"},
    "merge": {_A_DET: "merge_deterministic", _A_FIRST: "merge_attempt", _A_SECOND: "merge_with_fusion"},
}


def _code_name(code: int, link: str) -> str:
    base = {_A_PM: "pm_attempt", _A_PM_FAIL: "pm_attempt:fail", _A_REALIGN: "realign",
            _A_REALIGN_FAIL: "realign:fail", _A_ACCEPT: "accept", _A_REJECT: "reject"}
    if code in base:
        return base[code]
    names = _NAMES[link]
    if code == _A_FIRST_FAIL:
        return names[_A_FIRST] + ":fail"
    if code == _A_SECOND_FAIL:
        return names[_A_SECOND] + ":fail"
    return names[code]


@dataclass
class _Chunk:
    t_click: np.ndarray
    alpha: np.ndarray
    codes: np.ndarray  # (n, max_steps) action codes, 0 = none
    first: np.ndarray
    done: np.ndarray
    rounds: np.ndarray
    recycled_angles: list
    recycled_p: list
    recycled_hit: list


def _r_vec(alpha):
    return np.arccos(np.clip(np.cos(alpha) ** 2 / np.sqrt(1 - alg.p_success(alpha)), -1, 1))


def _canon_edge(theta):
    return theta - alg.HALF * np.round(theta / alg.HALF)


def _full(theta):
    return np.abs(np.abs(theta) - alg.QUARTER) < alg.ANGLE_TOL


def _bond_chunk(config: ExperimentConfig, rng: np.random.Generator, n: int) -> _Chunk:
    model, pol = config.model, config.policy
    link = config.link
    rounds_max = pol.max_retries + 1
    steps = 4 * rounds_max
    codes = np.zeros((n, steps), dtype=np.int8)
    pos = np.zeros(n, dtype=np.int64)
    t_first = np.full(n, np.nan)
    a_first = np.full(n, np.nan)
    first = np.zeros(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    rounds = np.zeros(n, dtype=np.int64)
    theta = np.zeros(n)
    rec_angle, rec_p, rec_hit = [], [], []

    def log(idx, code):
        codes[idx, pos[idx]] = code
        pos[idx] += 1

    for r in range(rounds_max):
        live = np.flatnonzero(~done)
        if live.size == 0:
            break
        rounds[live] = r + 1
        sector = rng.random(live.size) < model.sector_prob
        t = click_time_sample(model, rng, live.size)
        alpha = alpha_of_time(model, t)
        u_realign = rng.random(live.size)
        u_attempt = rng.random(live.size)
        log(live[~sector], _A_PM_FAIL)
        ok = live[sector]
        log(ok, _A_PM)
        t, alpha = t[sector], alpha[sector]
        u_realign, u_attempt = u_realign[sector], u_attempt[sector]
        fresh = np.isnan(t_first[ok])
        t_first[ok[fresh]] = t[fresh]
        a_first[ok[fresh]] = alpha[fresh]

        if pol.mode == "naive":
            acc = fidelity_of_alpha(alpha) >= 1 - pol.epsilon
            log(ok[acc], _A_ACCEPT)
            log(ok[~acc], _A_REJECT)
            done[ok[acc]] = True
            if r == 0:
                first[ok[acc]] = True
            continue

        untilted = np.abs(alpha - alg.QUARTER) < alg.ANGLE_TOL
        if pol.realign_first:
            # untilted intercores also spend their cherry; both branches stay untilted
            hit = u_realign < alg.p_success(alpha)
            log(ok[hit], _A_REALIGN)
            log(ok[~hit], _A_REALIGN_FAIL)
            log(ok[hit], _A_DET)
            done[ok[hit]] = True
            if r == 0:
                first[ok[hit]] = True
            rest = ~hit
            ok, alpha, u_attempt = ok[rest], _r_vec(alpha[rest]), u_attempt[rest]
            untilted = np.abs(alpha - alg.QUARTER) < alg.ANGLE_TOL
        det = untilted
        log(ok[det], _A_DET)
        done[ok[det]] = True
        if r == 0 and not pol.realign_first:
            first[ok[det]] = True
        ok, alpha, u_attempt = ok[~det], alpha[~det], u_attempt[~det]
        if ok.size == 0:
            continue

        th = theta[ok]
        has_prior = th != 0
        p = np.empty(ok.size)
        new_theta = np.empty(ok.size)
        for i in range(ok.size):
            a, t1 = float(alpha[i]), float(th[i])
            if link == "merge":
                s = pol.merge_sign(t1)
                p[i] = alg.p_merge(a, t1, s)
                try:
                    new_theta[i] = alg.compose_fusion(t1, -s * alg.r_exacerbate(a))[0] if t1 else -s * alg.r_exacerbate(a)
                except alg.AnnihilationError:
                    new_theta[i] = 0.0
            else:
                s = pol.bridge_sign(a, t1)
                bp = alg.bridge_params(a, t1, s)
                p[i] = bp.p_b
                new_theta[i] = _canon_edge(t1 + bp.lambda_f)
        hit = u_attempt < p
        if link == "bridge":
            new_theta = np.where(np.abs(new_theta) < 1e-15, 0.0, new_theta)
        # a failure that lands on a full record also completes the link
        hit |= _full(new_theta)
        for mask, code in ((has_prior & hit, _A_SECOND), (has_prior & ~hit, _A_SECOND_FAIL),
                           (~has_prior & hit, _A_FIRST), (~has_prior & ~hit, _A_FIRST_FAIL)):
            log(ok[mask], code)
        if has_prior.any():
            rec_angle.append(np.abs(th[has_prior]))
            rec_p.append(p[has_prior])
            rec_hit.append(hit[has_prior])
        done[ok[hit]] = True
        if r == 0 and not pol.realign_first:
            first[ok[hit & ~has_prior]] = True
        theta[ok[~hit]] = new_theta[~hit]

    return _Chunk(t_first, a_first, codes, first, done, rounds, rec_angle, rec_p, rec_hit)


# ---------------------------------------------------------------------------
# ledger back end (ghz / chain, and bond cross-checks)
# ---------------------------------------------------------------------------


@dataclass
class _LedgerTrial:
    success: bool
    first: bool
    rounds: int
    t_click: float
    alpha: float
    actions: list[str]
    recycled: list[tuple[float, float, bool]]
    snapshots: list[GeneralizedGraphState]


def initial_ledger(kind: str, n: int, per_link: int) -> tuple[GeneralizedGraphState, list[int], dict[int, list[int]]]:
    """Disjoint GHZ stars with enough cherries for every link attempt.

    Returns the ledger, the core ids and the spare cherries of each core.  One
    extra cherry per core is never spent, so a core never degrades into a
    cherry of the intercore it is being linked through.
    """
    g = GeneralizedGraphState()
    cores, spare = [], {}
    next_id = 0
    for i in range(n):
        links = (n - 1 if i == 0 else 1) if kind == "ghz" else (1 if i in (0, n - 1) else 2)
        core = next_id
        leaves = list(range(core + 1, core + 2 + links * per_link))
        g = star(core, leaves, ledger=g)
        cores.append(core)
        spare[core] = leaves[1:]
        next_id = core + 1 + len(leaves)
    return g, cores, spare


def _drop_isolated(g: GeneralizedGraphState, vs) -> None:
    for v in vs:
        if v in g.tilts and not g.neighbors(v) and not g.fusion_partners(v):
            del g.tilts[v]
            g.frame.pop(v, None)


def _link_complete(g, a, b, link) -> bool:
    return st.is_full_fusion(g, a, b) if link == "merge" else st.is_full_edge(g, a, b)


def _sample_pm(g, k1, k2, model, rng):
    t = click_time_sample(model, rng)
    alpha = alpha_of_time(model, t)
    event = st.PMEvent(min(max(alpha, 1e-300), alg.HALF - 1e-16), int(rng.integers(0, 2)))
    outs = st._pm_outcomes(g, k1, k2, event)
    if rng.random() < model.sector_prob:
        return t, alpha, outs[0]
    fails = [o for o in outs[1:] if o.ledger_after is not None]
    w = np.array([o.probability for o in fails])
    return t, alpha, fails[int(rng.choice(len(fails), p=w / w.sum()))]


def run_ledger_trial(config: ExperimentConfig, rng: np.random.Generator, record: bool = False) -> _LedgerTrial:
    """One growth trial using the symbolic strategies.

    Links are grown one after another; each gets ``max_retries + 1`` PMs.
    In naive mode a click outside the fidelity window is discarded (both
    fused qubits measured out) and an accepted click is treated as ideal.
    """
    kind, n = parse_target(config.target)
    link, pol, model = config.link, config.policy, config.model
    per_link = pol.max_retries + 1
    g, cores, spare = initial_ledger(kind, n, per_link)
    pairs = [(cores[0], c) for c in cores[1:]] if kind == "ghz" else list(zip(cores, cores[1:]))
    actions: list[str] = []
    recycled = []
    snaps = [g.copy()] if record else []
    t_first = a_first = math.nan
    first = False

    def step(name, new):
        nonlocal g
        actions.append(name)
        g = new
        if record:
            snaps.append(g.copy())

    for link_idx, (a, b) in enumerate(pairs):
        done = False
        for r in range(per_link):
            mark = len(actions)
            # a fresh PM on one spare cherry from each side
            k1, k2 = spare[a].pop(), spare[b].pop()
            t, alpha, out = _sample_pm(g, k1, k2, model, rng)
            if out.branch == "failure":
                new = out.ledger_after
                _drop_isolated(new, (k1, k2))
                step("pm_attempt:fail", new)
                continue
            if math.isnan(t_first):
                t_first, a_first = t, alpha
            step("pm_attempt", contract_full_fusion(out.ledger_after, k1, k2))
            c, leaf = min(k1, k2), max(k1, k2)
            if pol.mode == "naive":
                g = g.copy()
                g = ledger_apply(g, RemoveVertex(leaf, int(rng.integers(0, 2))))
                if fidelity_of_alpha(alpha) < 1 - pol.epsilon:
                    step("reject", ledger_apply(g, RemoveVertex(c, int(rng.integers(0, 2)))))
                    continue
                g.tilts[c] = alg.QUARTER
                step("accept", g)
            elif not pol.realign_first:
                step("measure_leaf", ledger_apply(g, RemoveVertex(leaf, int(rng.integers(0, 2)))))
            while c in g.tilts:
                act = choose_action(g, pol, ActionContext(link, c, per_link - r - 1))
                rec = g.fusions if link == "merge" else g.edges
                prior = rec.get(pair(a, b), 0.0)
                prior = alg.QUARTER if prior is None else prior
                out, p_hit = _run_action(g, act, pol, rng)
                step(act.name + ("" if out.branch == "success" else ":fail"), out.ledger_after)
                if act.name in ("merge_with_fusion", "bridge_with_edge"):
                    recycled.append((abs(prior), p_hit, out.branch == "success"))
            if _link_complete(g, a, b, link):
                if link == "merge":
                    step("contract", contract_full_fusion(g, a, b))
                if link_idx == 0 and r == 0:
                    first = not any(x.endswith(":fail") for x in actions[mark:])
                done = True
                break
        if not done:
            actions.append("give_up")
            return _LedgerTrial(False, first, 0, t_first, a_first, actions, recycled, snaps)
    return _LedgerTrial(True, first, len(actions), t_first, a_first, actions, recycled, snaps)


def _run_action(g, act: Action, pol: StrategyPolicy, rng) -> tuple[st.StrategyOutcome, float]:
    """Sample ``act`` and return the outcome with the predicted success probability."""
    c = act.vertex
    if act.name == "realign":
        outs = st.realign_outcomes(g, c)
    elif act.name in ("merge_attempt", "merge_with_fusion"):
        n3, n4 = g.neighbors(c)
        sign = pol.merge_sign(g.fusions.get(pair(n3, n4), 0.0))
        fn = st.merge_attempt_outcomes if act.name == "merge_attempt" else st.merge_with_fusion_outcomes
        outs = fn(g, c, sign=sign)
    elif act.name in ("bridge_attempt", "bridge_with_edge"):
        n3, n4 = g.neighbors(c)
        t = g.edges.get(pair(n3, n4), 0.0)
        sign = pol.bridge_sign(g.tilts[c], alg.QUARTER if t is None else t)
        fn = st.bridge_attempt_outcomes if act.name == "bridge_attempt" else st.bridge_with_edge_outcomes
        outs = fn(g, c, sign=sign)
    elif act.name == "merge_deterministic":
        outs = st.merge_deterministic_outcomes(g, c)
    elif act.name == "bridge_deterministic":
        outs = st.bridge_deterministic_outcomes(g, c)
    else:
        raise ValueError(f"cannot run {act.name!r}")
    p_hit = sum(o.probability for o in outs if o.branch == "success")
    return st.choose(outs, rng=rng), p_hit


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass
class _Partial:
    n: int
    first: np.ndarray
    done: np.ndarray
    rounds: np.ndarray
    t_click: np.ndarray
    alpha: np.ndarray
    actions: list[str]
    outcome_codes: np.ndarray
    rec_angle: np.ndarray
    rec_p: np.ndarray
    rec_hit: np.ndarray
    counts: dict[str, int]


def _chunk_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


def _run_chunk(args) -> _Partial:
    config, k, n, keep, backend = args
    rng = _chunk_rng(config.seed, k)
    kind, _ = parse_target(config.target)
    link = config.link
    if kind == "bond" and backend == "auto":
        ch = _bond_chunk(config, rng, n)
        counts: dict[str, int] = {}
        codes, cnt = np.unique(ch.codes[ch.codes > 0], return_counts=True)
        for code, c in zip(codes.tolist(), cnt.tolist()):
            counts[_code_name(code, link)] = c
        actions = []
        if keep:
            names = {code: _code_name(code, link) for code in range(1, 12)}
            actions = [";".join(names[c] for c in row if c) for row in ch.codes.tolist()]
        cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)  # noqa: E731
        return _Partial(n, ch.first, ch.done, ch.rounds, ch.t_click, ch.alpha, actions,
                        _outcome_codes(ch.first, ch.done), cat(ch.recycled_angles), cat(ch.recycled_p),
                        cat(ch.recycled_hit).astype(bool), counts)
    first = np.zeros(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    rounds = np.zeros(n, dtype=np.int64)
    t_click = np.full(n, np.nan)
    alpha = np.full(n, np.nan)
    actions, ra, rp, rh = [], [], [], []
    counts = {}
    for i in range(n):
        tr = run_ledger_trial(config, rng)
        first[i], done[i] = tr.first, tr.success
        rounds[i] = sum(a.startswith("pm_attempt") for a in tr.actions)
        t_click[i], alpha[i] = tr.t_click, tr.alpha
        for a in tr.actions:
            counts[a] = counts.get(a, 0) + 1
        if keep:
            actions.append(";".join(tr.actions))
        for ang, p, hit in tr.recycled:
            ra.append(ang)
            rp.append(p)
            rh.append(hit)
    return _Partial(n, first, done, rounds, t_click, alpha, actions, _outcome_codes(first, done),
                    np.array(ra), np.array(rp), np.array(rh, dtype=bool), counts)


def _outcome_codes(first, done):
    # 0 failure, 1 first-attempt success, 2 success after retries
    return np.where(first, 1, np.where(done, 2, 0))


def run_experiment(config: ExperimentConfig, keep_records: bool = False, workers: int = 1,
                   backend: str = "auto") -> TrialStats:
    """Run ``config.trials`` independent trials and aggregate them.

    For the bond target the headline metric is strict first-attempt success
    (a heralded click whose first realignment succeeds; in naive mode, a
    click inside the fidelity window).  ``retry_rate`` counts bonds completed
    within the retry budget.  For ghz and chain targets the headline metric is
    the completed topology within the budget of every link.
    """
    if backend not in ("auto", "ledger"):
        raise ValueError("backend must be 'auto' or 'ledger'")
    kind, _ = parse_target(config.target)
    n_chunks = -(-config.trials // CHUNK)
    jobs = [(config, k, min(CHUNK, config.trials - k * CHUNK), keep_records, backend) for k in range(n_chunks)]
    if workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return _aggregate(config, parts, keep_records, kind)


def _aggregate(config, parts, keep_records, kind) -> TrialStats:
    pol = config.policy
    first = np.concatenate([p.first for p in parts])
    done = np.concatenate([p.done for p in parts])
    rounds = np.concatenate([p.rounds for p in parts])
    n = first.size
    if kind == "bond":
        headline = first
        metric = "first-attempt" if pol.mode == "adaptive" else "post-selected"
    else:
        headline = done
        metric = "completed-within-budget"
    succ = int(headline.sum())
    rate, se, half = normal_ci(succ, n)
    retry = int(done.sum())
    hist: dict[str, int] = {}
    for r, c in zip(*np.unique(rounds[done], return_counts=True)):
        hist[str(int(r))] = int(c)
    hist["failed"] = int(n - retry)
    counts: dict[str, int] = {}
    for p in parts:
        for k, v in p.counts.items():
            counts[k] = counts.get(k, 0) + v
    ra = np.concatenate([p.rec_angle for p in parts])
    rp = np.concatenate([p.rec_p for p in parts])
    rh = np.concatenate([p.rec_hit for p in parts])
    expected = None
    if kind == "bond":
        if pol.mode == "adaptive":
            expected = adaptive_expected_success(config.model)
        else:
            expected = naive_window_mass(config.model, pol.epsilon)[2]
    stats = TrialStats(
        trials=n,
        successes=succ,
        rate=rate,
        ci95=(max(0.0, rate - half), min(1.0, rate + half)),
        histogram=hist,
        mode=pol.mode,
        target=config.target,
        metric=metric,
        standard_error=se,
        expected_rate=expected,
        retry_successes=retry,
        retry_rate=retry / n,
        mean_recycled_angle=float(ra.mean()) if ra.size else 0.0,
        recycled_attempts=int(ra.size),
        recycled_successes=int(rh.sum()),
        recycled_expected=float(rp.sum()),
        recycled_variance=float((rp * (1 - rp)).sum()),
        action_counts=counts,
    )
    if keep_records:
        labels = np.array(["failure", "success", "retry_success"])
        oc = np.concatenate([p.outcome_codes for p in parts])
        stats.records = TrialRecords(
            np.concatenate([p.t_click for p in parts]),
            np.concatenate([p.alpha for p in parts]),
            [a for p in parts for a in p.actions],
            labels[oc].tolist(),
        )
    return stats


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_stats_json(stats: TrialStats, path) -> None:
    Path(path).write_text(stats.to_json())


def write_trials_csv(stats: TrialStats, path) -> None:
    if stats.records is None:
        raise ValueError("run_experiment(keep_records=True) is required for per-trial output")
    rec = stats.records
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "t_click", "alpha", "action_sequence", "outcome"])
        for i in range(stats.trials):
            w.writerow([i, _fmt(rec.t_click[i]), _fmt(rec.alpha[i]), rec.actions[i], rec.outcome[i]])


def record_growth(config: ExperimentConfig) -> list[GeneralizedGraphState]:
    """Ledger after every step of the first trial (reproduces trial 0 of the experiment)."""
    rng = _chunk_rng(config.seed, 0)
    return run_ledger_trial(config, rng, record=True).snapshots
