"""Serializations: strict orders over feature valuations, the subproblems
they induce, serialized and sketch width, and the SIW_Phi / SIW_R drivers."""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import CapExceeded, EpisodeFailed, IllFormedSketch, NonDecreasing, Unsolvable, ValuationSetMissing
from .graph import build_policy_graph, goal_nodes_where, sieve_terminates
from .model import Feature, GroundProblem, is_goal, successor_states
from .oracle import DEFAULT_STATE_CAP, StateSpace
from .rules import RuleSet, compile_rules
from .search import bfs, iw
from .width import NotWithin, subproblem_width


class PrecedenceOracle:
    """``test(f, g)`` is true iff f precedes g (f is closer to the goal).

    Test calls are counted and timed so the cost of the order can be
    reported rather than assumed.
    """

    def __init__(self, kind: str, test: Callable, description: str = ""):
        self.kind = kind
        self._test = test
        self.description = description or kind
        self.calls = 0
        self.seconds = 0.0

    def __call__(self, f, g) -> bool:
        t0 = time.perf_counter()
        r = self._test(f, g)
        self.seconds += time.perf_counter() - t0
        self.calls += 1
        return r

    test = __call__

    def __repr__(self):
        return f"PrecedenceOracle({self.description})"

    @classmethod
    def empty(cls):
        return cls("empty", lambda f, g: False, "empty")

    @classmethod
    def lex(cls, positions: Sequence[int], names: Sequence[str] = ()):
        """Lexicographic ``<`` on the valuation restricted to ``positions``."""
        pos = tuple(positions)
        label = ",".join(names) if names else ",".join(map(str, pos))
        return cls("lex", lambda f, g: tuple(f[i] for i in pos) < tuple(g[i] for i in pos), f"lex({label})")

    @classmethod
    def goal_counter(cls, position: int = 0):
        """Fewer unachieved goal atoms; the feature at ``position`` is #g."""
        return cls("goal_counter", lambda f, g: f[position] < g[position], "goal_counter")

    @classmethod
    def rule_direct(cls, rules: RuleSet, goal_nodes=()):
        """f precedes g iff (g, f) is compatible with a rule and g is not a
        goal valuation."""
        compiled = compile_rules(rules)
        goals = {tuple(b) for b in goal_nodes}

        def test(f, g):
            if _bool(g) in goals:
                return False
            return any(cr.compatible(g, f) for cr in compiled)

        return cls("rule_direct", test, f"rule_direct({rules.name})")

    @classmethod
    def rule_closure(cls, rules: RuleSet, valuations, goal_nodes=()):
        """Transitive closure of :meth:`rule_direct` over a finite valuation
        set; a strict partial order when the rules pass Sieve."""
        if not valuations:
            raise ValuationSetMissing("rule_closure needs the reachable valuations")
        vals = list(dict.fromkeys(tuple(v) for v in valuations))
        compiled = compile_rules(rules)
        goals = {tuple(b) for b in goal_nodes}
        adj = {}
        for u in vals:
            if _bool(u) in goals:
                adj[u] = []
                continue
            adj[u] = [v for v in vals if any(cr.compatible(u, v) for cr in compiled)]
        below = {}
        for u in vals:
            seen = set()
            queue = deque(adj[u])
            while queue:
                v = queue.popleft()
                if v in seen:
                    continue
                seen.add(v)
                queue.extend(adj[v])
            below[u] = seen

        def test(f, g):
            f, g = tuple(f), tuple(g)
            for v in (f, g):
                if v not in below:
                    raise ValuationSetMissing(f"valuation {v} is outside the enumerated set")
            return f in below[g]

        return cls("rule_closure", test, f"rule_closure({rules.name})")


def _bool(v):
    return tuple(1 if x else 0 for x in v)


class _Valuer:
    def __init__(self, features):
        self.features = list(features)
        self._cache = {}

    def __call__(self, s):
        v = self._cache.get(s)
        if v is None:
            v = self._cache[s] = tuple(f(s) for f in self.features)
        return v


@dataclass
class SubproblemReport:
    start: int
    achieved: int
    k: int
    length: int
    expanded: int
    generated: int
    goal: bool  # achieved state is a goal of the problem
    witness: str = ""  # rule id for sketches, order description otherwise

    @property
    def width_bound(self) -> int:
        """Upper bound on the episode's width: 0 for one-step episodes, else k."""
        return 0 if self.length <= 1 else self.k


@dataclass
class SIWResult:
    plan: list
    episodes: list
    seconds: float = 0.0
    order_calls: int = 0
    order_seconds: float = 0.0

    @property
    def max_k(self) -> int:
        return max((e.k for e in self.episodes), default=0)

    def plan_names(self) -> list[str]:
        return [a.name for a in self.plan]


def _siw(problem, qualifies, witness, k_cap, max_episodes):
    t0 = time.perf_counter()
    s = problem.init
    plan, episodes = [], []
    while not is_goal(problem, s):
        if len(episodes) >= max_episodes:
            raise EpisodeFailed(k_cap, s, plan)
        start = s
        accept = lambda t, start=start: is_goal(problem, t) or qualifies(start, t)
        if accept(start):
            raise NonDecreasing(f"state {start} precedes itself")
        try:
            k, res = iw(problem, start, accept, k_max=k_cap, k_min=1)
        except Unsolvable:
            raise EpisodeFailed(k_cap, start, plan) from None
        if k is None or not res.solved:
            raise EpisodeFailed(k_cap, start, plan)
        t = res.goal_state
        g = is_goal(problem, t)
        w = "" if g else witness(start, t)
        if not g and w is None:
            raise NonDecreasing(f"episode from {start} ended in a non-qualifying state")
        episodes.append(SubproblemReport(start, t, k, len(res.plan), res.expanded, res.generated, g, w or ""))
        plan.extend(res.plan)
        s = t
    return SIWResult(plan, episodes, time.perf_counter() - t0)


def siw_phi(problem: GroundProblem, features: Sequence[Feature], order: PrecedenceOracle,
            k_cap: int = 2, max_episodes: int = 100_000) -> SIWResult:
    """IW episodes, each ending in the first goal state or state whose
    valuation precedes the episode start's valuation."""
    val = _Valuer(features)
    res = _siw(problem, lambda s, t: order(val(t), val(s)),
               lambda s, t: order.description if order(val(t), val(s)) else None, k_cap, max_episodes)
    res.order_calls, res.order_seconds = order.calls, order.seconds
    return res


def sketch_goal_nodes(rules: RuleSet, condition: dict | None):
    """Goal valuations for the termination test; none when ``condition`` is None."""
    if condition is None:
        return ()
    return goal_nodes_where(rules, condition)


def check_sketch(rules: RuleSet, goal_nodes=()):
    """Sieve verdict of the sketch read as a policy."""
    return sieve_terminates(build_policy_graph(rules, goal_nodes))


def siw_r(problem: GroundProblem, sketch: RuleSet, features: Sequence[Feature], k_cap: int = 2,
          goal_nodes=(), max_episodes: int = 100_000) -> SIWResult:
    """SIW with the order test replaced by rule compatibility of
    (f(s), f(s')).  Ill-formed (non-terminating) sketches are refused."""
    cert = check_sketch(sketch, goal_nodes)
    if not cert.verdict:
        raise IllFormedSketch(f"sketch {sketch.name} is not terminating")
    compiled = compile_rules(sketch, [f.name for f in features])
    val = _Valuer(features)

    def fired(s, t):
        f, g = val(s), val(t)
        for cr in compiled:
            if cr.compatible(f, g):
                return cr.id
        return None

    return _siw(problem, lambda s, t: fired(s, t) is not None, fired, k_cap, max_episodes)


def episode_distance(problem: GroundProblem, start, accept) -> int | None:
    """Oracle: length of a shortest path from ``start`` to an accepted state."""
    res = bfs(problem, start, accept)
    return len(res.plan) if res.solved else None


# ---------------------------------------------------------------- decomposition

def _local_bfs(problem, start, qualifies, cap):
    """States at the least distance from ``start`` where a goal or a
    qualifying state appears, as (distance, goal states, qualifying states)."""
    frontier = [start]
    seen = {start}
    d = 0
    while frontier:
        goals = [t for t in frontier if is_goal(problem, t)]
        quals = [t for t in frontier if not is_goal(problem, t) and qualifies(t)]
        if d > 0 and (goals or quals):
            return d, goals, quals
        nxt = []
        for s in frontier:
            for _, t in successor_states(problem, s):
                if t not in seen:
                    seen.add(t)
                    if len(seen) > cap:
                        raise CapExceeded(cap)
                    nxt.append(t)
        frontier = nxt
        d += 1
    return None, [], []


def decompose(problem: GroundProblem, features: Sequence[Feature], order: PrecedenceOracle,
              cap: int = DEFAULT_STATE_CAP) -> list:
    """Start states of the subproblems P[s] in P[order], in discovery order.

    A state s' joins when it is a non-goal state at the least distance from
    a member s among the states preceding s, with no goal strictly closer.
    """
    if is_goal(problem, problem.init):
        return []
    val = _Valuer(features)
    members = [problem.init]
    known = {problem.init}
    i = 0
    while i < len(members):
        s = members[i]
        i += 1
        fs = val(s)
        d, goals, quals = _local_bfs(problem, s, lambda t: order(val(t), fs), cap)
        for t in quals:
            if t not in known:
                known.add(t)
                members.append(t)
    return members


def _succ_cache(problem):
    cache = {}

    def succ(s):
        r = cache.get(s)
        if r is None:
            r = cache[s] = [t for _, t in successor_states(problem, s)]
        return r

    return succ


def serialized_width(problem: GroundProblem, features: Sequence[Feature], order: PrecedenceOracle,
                     k_max: int = 2, cap: int = DEFAULT_STATE_CAP):
    """Largest exact width among the subproblems of the decomposition; 0 for
    a problem solved at the initial state."""
    members = decompose(problem, features, order, cap)
    val = _Valuer(features)
    succ = _succ_cache(problem)
    caches = {}
    free = ~problem.static_mask
    best = 0
    for s in members:
        fs = val(s)
        w = subproblem_width(s, succ, lambda t: is_goal(problem, t) or order(val(t), fs), free, k_max, caches)
        if isinstance(w, NotWithin):
            return w
        best = max(best, w)
    return best


@dataclass
class SketchWidth:
    width: object  # int or NotWithin
    states: int  # subproblems measured
    argmax: int | None = None  # a state attaining the width
    lower_bound: bool = False  # only a subset of reachable states measured

    def __str__(self):
        return str(self.width)


def sketch_width(problem: GroundProblem, sketch: RuleSet, features: Sequence[Feature], k_max: int = 2,
                 cap: int = DEFAULT_STATE_CAP, space: StateSpace | None = None, only=None) -> SketchWidth:
    """Max over reachable non-goal states s of the exact width of P[s], whose
    goals are the goals of P plus the states s' with (f(s), f(s'))
    compatible with a sketch rule.  ``only`` restricts the states (the result
    is then a lower bound)."""
    space = space or StateSpace(problem, cap=cap)
    compiled = compile_rules(sketch, [f.name for f in features])
    val = _Valuer(features)
    caches = {}
    free = ~problem.static_mask
    best, arg, n = 0, None, 0
    pool = space.states if only is None else list(only)
    for s in pool:
        if is_goal(problem, s):
            continue
        n += 1
        fs = val(s)
        target = lambda t: is_goal(problem, t) or any(cr.compatible(fs, val(t)) for cr in compiled)
        w = subproblem_width(s, space.succ_states, target, free, k_max, caches)
        if isinstance(w, NotWithin):
            return SketchWidth(w, n, s, only is not None)
        if arg is None or w > best:
            best, arg = w, s
    return SketchWidth(best, n, arg, only is not None)
