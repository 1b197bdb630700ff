"""Exact width, admissible and feasible chains, effective width.

The exact width of a (sub)problem rooted at ``start`` is computed over the
layers of a breadth-first search that stops at the optimal goal depth D.
For every tuple t (at most k non-static atoms) let d(t) be the first layer
containing it and S_t the states of that layer containing it.  A chain is
admissible iff it can be threaded through the sets

    L_0     = {()}
    L_{i+1} = U_{t in L_i}  n_{s in S_t} {t' in succ(s) : d(t') = i+1}

and ends in a tuple of L_D whose S_t holds goal states only.  The empty tuple
stands in for any t_0 contained in the start, since S_t = {start} for all of
them.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

from .errors import TupleBudgetExceeded
from .model import GroundProblem, bits, is_goal
from .oracle import DEFAULT_STATE_CAP, StateSpace
from .search import iw_k

DEFAULT_TUPLE_BUDGET = 5_000_000


@dataclass(frozen=True)
class NotWithin:
    """Width larger than ``k_max`` (or no plan at all when ``unsolvable``)."""

    k_max: int
    unsolvable: bool = False

    def __str__(self):
        return "unsolvable" if self.unsolvable else f">{self.k_max}"


@dataclass(frozen=True)
class Chain:
    tuples: tuple  # of tuples of atom ids

    @property
    def size(self) -> int:
        return max((len(t) for t in self.tuples), default=0)

    @classmethod
    def from_names(cls, problem: GroundProblem, chain: Iterable[Iterable[str]]) -> "Chain":
        idx = problem.universe.index
        return cls(tuple(tuple(sorted(idx[a] for a in t)) for t in chain))


class TupleCache:
    """Per-state tuple lists, shareable across subproblems of one problem."""

    def __init__(self, free_mask: int, k: int):
        self.free = free_mask
        self.k = k
        self._cache = {}

    def __call__(self, s):
        ts = self._cache.get(s)
        if ts is None:
            ids = bits(s & self.free)
            ts = [t for size in range(1, min(self.k, len(ids)) + 1) for t in combinations(ids, size)]
            self._cache[s] = ts
        return ts


def _layers(start, succ, is_target):
    """BFS layers from ``start`` up to the first layer holding a target."""
    layers = [[start]]
    seen = {start}
    while True:
        nxt = []
        for s in layers[-1]:
            for t in succ(s):
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        if not nxt:
            return layers, None
        layers.append(nxt)
        if any(is_target(t) for t in nxt):
            return layers, len(layers) - 1


def _chain_exists(layers, D, succ, is_target, tuples, budget):
    seen = set()
    for s in layers[0]:
        seen.update(tuples(s))
    level = {(): [layers[0][0]]}  # tuple -> S_t
    for i in range(D):
        # tuples first reached in layer i+1, with their state sets
        occ = {}
        for s in layers[i + 1]:
            for t in tuples(s):
                if t not in seen:
                    lst = occ.get(t)
                    if lst is None:
                        occ[t] = [s]
                    else:
                        lst.append(s)
        seen.update(occ)
        if len(seen) > budget:
            raise TupleBudgetExceeded(f"more than {budget} tuples")
        nxt = set()
        for t, S in level.items():
            common = None
            for s in S:
                reach = set()
                for s2 in succ(s):
                    for t2 in tuples(s2):
                        if t2 in occ:
                            reach.add(t2)
                common = reach if common is None else common & reach
                if not common:
                    break
            if common:
                nxt |= common
        if not nxt:
            return False
        level = {t: occ[t] for t in nxt}
    return any(all(is_target(s) for s in S) for S in level.values())


def subproblem_width(start, succ: Callable, is_target: Callable, free_mask: int, k_max: int,
                     caches: dict | None = None, budget: int = DEFAULT_TUPLE_BUDGET):
    """Exact width of reaching a state accepted by ``is_target`` from ``start``.

    ``succ(s)`` yields successor states.  Returns an int in ``0..k_max`` or
    :class:`NotWithin`.  ``caches`` maps k to a :class:`TupleCache` and may be
    shared between calls over the same problem.
    """
    if is_target(start):
        return 0
    layers, D = _layers(start, succ, is_target)
    if D is None:
        return NotWithin(k_max, unsolvable=True)
    if D <= 1:
        return 0
    caches = {} if caches is None else caches
    for k in range(1, k_max + 1):
        cache = caches.get(k)
        if cache is None:
            cache = caches[k] = TupleCache(free_mask, k)
        if _chain_exists(layers, D, succ, is_target, cache, budget):
            return k
    return NotWithin(k_max)


def exact_width(problem: GroundProblem, k_max: int = 2, cap: int = DEFAULT_STATE_CAP,
                budget: int = DEFAULT_TUPLE_BUDGET, space: StateSpace | None = None):
    """Least k <= k_max admitting an admissible chain, else NotWithin(k_max)."""
    space = space or StateSpace(problem, cap=cap)
    return subproblem_width(problem.init, space.succ_states, lambda s: is_goal(problem, s),
                            ~problem.static_mask, k_max, budget=budget)


# ---------------------------------------------------------------- chains

@dataclass
class ChainVerdict:
    ok: bool
    reason: str = ""
    index: int | None = None  # offending tuple position
    state: int | None = None  # counterexample state

    def __bool__(self):
        return self.ok


def _mask(t):
    m = 0
    for a in t:
        m |= 1 << a
    return m


def _depth_states(space: StateSpace, t):
    d = space.tuple_depth(t)
    if d is None:
        return None, []
    return d, space.states_with(t, d)


def check_admissible(problem: GroundProblem, chain, space: StateSpace | None = None) -> ChainVerdict:
    """Conditions: t_0 in the initial state; each optimal plan for t_i extends
    by one action into an optimal plan for t_{i+1}; optimal plans for t_m are
    optimal plans for the problem."""
    if not isinstance(chain, Chain):
        chain = Chain(tuple(tuple(sorted(t)) for t in chain))
    space = space or StateSpace(problem)
    ts = chain.tuples
    if not ts:
        return ChainVerdict(False, "empty chain")
    m0 = _mask(ts[0])
    if problem.init & m0 != m0:
        return ChainVerdict(False, "t_0 is not contained in the initial state", 0, problem.init)
    for i in range(len(ts) - 1):
        d, S = _depth_states(space, ts[i])
        d2 = space.tuple_depth(ts[i + 1])
        if d2 is None or d2 != d + 1:
            return ChainVerdict(False, f"d(t_{i + 1}) = {d2}, expected {d + 1}", i + 1)
        m2 = _mask(ts[i + 1])
        for j in S:
            if not any(space.states[k] & m2 == m2 and space.depth[k] == d + 1 for _, k in space.succ[j]):
                return ChainVerdict(False, f"an optimal state for t_{i} has no successor with t_{i + 1}",
                                    i, space.states[j])
    d, S = _depth_states(space, ts[-1])
    if d is None or d != space.optimal_cost:
        return ChainVerdict(False, f"d(t_m) = {d} but the optimal cost is {space.optimal_cost}", len(ts) - 1)
    for j in S:
        if not space.goal[j]:
            return ChainVerdict(False, "an optimal state for t_m is not a goal", len(ts) - 1, space.states[j])
    return ChainVerdict(True)


def check_feasible(problem: GroundProblem, chain, space: StateSpace | None = None) -> ChainVerdict:
    """t_0 in the initial state, d(t_n) = n, and every optimal state for t_n
    is a goal at the optimal cost."""
    if not isinstance(chain, Chain):
        chain = Chain(tuple(tuple(sorted(t)) for t in chain))
    space = space or StateSpace(problem)
    ts = chain.tuples
    if not ts:
        return ChainVerdict(False, "empty chain")
    n = len(ts) - 1
    m0 = _mask(ts[0])
    if problem.init & m0 != m0:
        return ChainVerdict(False, "t_0 is not contained in the initial state", 0, problem.init)
    d, S = _depth_states(space, ts[-1])
    if d != n:
        return ChainVerdict(False, f"d(t_n) = {d}, expected {n}", n)
    if space.optimal_cost != n:
        return ChainVerdict(False, f"optimal cost is {space.optimal_cost}, expected {n}", n)
    for j in S:
        if not space.goal[j]:
            return ChainVerdict(False, "an optimal state for t_n is not a goal", n, space.states[j])
    return ChainVerdict(True)


def effective_width(problem: GroundProblem, k_max: int | None = None, cap: int = DEFAULT_STATE_CAP,
                    space: StateSpace | None = None):
    """Least k such that IW(k) returns a plan of optimal length (0 when the
    optimum is at most one step)."""
    space = space or StateSpace(problem, cap=cap)
    opt = space.optimal_cost
    if opt is None:
        return NotWithin(k_max or problem.num_atoms, unsolvable=True)
    if opt <= 1:
        return 0
    top = problem.num_atoms if k_max is None else k_max
    for k in range(1, top + 1):
        res = iw_k(problem, k)
        if res.solved and len(res.plan) == opt:
            return k
    return NotWithin(top)
