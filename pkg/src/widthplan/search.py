"""Novelty-pruned breadth-first searches: IW(k), IW and IW over feature valuations."""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

from .errors import Unsolvable
from .model import GroundProblem, bits, is_goal, successor_states

SOLVED = "solved"
EXHAUSTED = "exhausted"
PRUNED_OUT = "pruned_out"

# above this many slots the table falls back to a hash set
_FLAT_LIMIT = 50_000_000


class NoveltyTable:
    """Seen-tuple table for tuples of at most ``k`` atoms out of ``n``.

    Sorted tuples are ranked with the combinatorial number system into a flat
    byte table, so a lookup is a handful of additions and one index.
    """

    def __init__(self, n: int, k: int):
        self.n = n
        self.k = k
        self._binom = [[comb(a, j) for a in range(n + 1)] for j in range(k + 1)]
        self._offset = [0] * (k + 2)
        for size in range(1, k + 1):
            self._offset[size + 1] = self._offset[size] + comb(n, size)
        total = self._offset[k + 1]
        self.flat = total <= _FLAT_LIMIT
        self._seen = bytearray(total) if self.flat else set()
        self.marked = 0

    def rank(self, t) -> int:
        r = self._offset[len(t)]
        b = self._binom
        for j, a in enumerate(t, 1):
            r += b[j][a]
        return r

    def _tuples(self, ids):
        for size in range(1, min(self.k, len(ids)) + 1):
            yield from combinations(ids, size)

    def is_novel(self, ids) -> bool:
        seen = self._seen
        for t in self._tuples(ids):
            r = self.rank(t)
            if (not seen[r]) if self.flat else (r not in seen):
                return True
        return False

    def mark(self, ids) -> bool:
        """Mark every tuple of ``ids``; True iff at least one was new."""
        new = False
        seen = self._seen
        for t in self._tuples(ids):
            r = self.rank(t)
            if self.flat:
                if not seen[r]:
                    seen[r] = 1
                    new = True
                    self.marked += 1
            elif r not in seen:
                seen.add(r)
                new = True
                self.marked += 1
        return new


@dataclass
class SearchResult:
    status: str
    plan: list = field(default_factory=list)
    expanded: int = 0
    generated: int = 0
    observed_b: int = 0
    k: int | None = None
    optimal: bool | None = None
    seconds: float = 0.0
    goal_state: int | None = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def plan_names(self) -> list[str]:
        return [a.name for a in self.plan]


def _extract(problem, parent, s):
    plan = []
    while parent[s] is not None:
        s, a = parent[s]
        plan.append(problem.actions[a])
    return plan[::-1]


def _novelty_bfs(problem: GroundProblem, start, is_novel_mark, accept):
    """Shared driver: breadth-first, FIFO ties, action-id order, acceptance
    tested when a state is generated, pruning before enqueue."""
    t0 = time.perf_counter()
    res = SearchResult(EXHAUSTED)
    parent = {start: None}
    if accept(start):
        res.status, res.goal_state = SOLVED, start
        res.seconds = time.perf_counter() - t0
        return res
    is_novel_mark(start)
    queue = deque([start])
    pruned = False
    while queue:
        s = queue.popleft()
        res.expanded += 1
        succ = successor_states(problem, s)
        res.generated += len(succ)
        if len(succ) > res.observed_b:
            res.observed_b = len(succ)
        for a, t in succ:
            if t in parent:
                continue
            if accept(t):
                parent[t] = (s, a)
                res.status, res.goal_state = SOLVED, t
                res.plan = _extract(problem, parent, t)
                res.seconds = time.perf_counter() - t0
                return res
            if is_novel_mark(t):
                parent[t] = (s, a)
                queue.append(t)
            else:
                pruned = True
    res.status = PRUNED_OUT if pruned else EXHAUSTED
    res.seconds = time.perf_counter() - t0
    return res


def iw_k(problem: GroundProblem, k: int, start=None, accept=None) -> SearchResult:
    """IW(k): breadth-first search that prunes states making no tuple of at
    most ``k`` atoms true for the first time.  ``accept`` replaces the goal
    test (SIW episodes use it)."""
    if k < 1:
        raise ValueError("IW(k) needs k >= 1")
    start = problem.init if start is None else start
    accept = accept or (lambda s: is_goal(problem, s))
    free = ~problem.static_mask
    table = NoveltyTable(problem.num_atoms, k)
    res = _novelty_bfs(problem, start, lambda s: table.mark(bits(s & free)), accept)
    res.k = k
    return res


def iw(problem: GroundProblem, start=None, accept=None, k_max: int | None = None, k_min: int = 0):
    """Run IW(0), IW(1), ... until solved; returns ``(k_star, result)``.

    IW(0) is the pre-pass for the width-0 convention: the start is accepted
    or one step reaches an accepted state.  ``k_min=1`` skips it.
    """
    start = problem.init if start is None else start
    accept = accept or (lambda s: is_goal(problem, s))
    t0 = time.perf_counter()
    if k_min < 1:
        succ = successor_states(problem, start)
        if accept(start):
            return 0, SearchResult(SOLVED, [], 0, 0, len(succ), 0, seconds=time.perf_counter() - t0,
                                   goal_state=start)
        for a, t in succ:
            if accept(t):
                return 0, SearchResult(SOLVED, [problem.actions[a]], 1, len(succ), len(succ), 0,
                                       seconds=time.perf_counter() - t0, goal_state=t)
    top = problem.num_atoms if k_max is None else min(k_max, problem.num_atoms)
    last = None
    for k in range(max(k_min, 1), max(top, 1) + 1):
        last = iw_k(problem, k, start, accept)
        if last.solved:
            return k, last
        if last.status == EXHAUSTED:
            break  # nothing was pruned, so a larger k cannot help
    if k_max is not None and (last is None or last.status == PRUNED_OUT):
        return None, last
    raise Unsolvable(f"{problem.name}: no plan found by IW(k) for k <= {top}")


def iw_phi(problem: GroundProblem, features, start=None, accept=None) -> SearchResult:
    """IW over feature valuations: a state is novel iff its full valuation
    has not been seen before."""
    start = problem.init if start is None else start
    accept = accept or (lambda s: is_goal(problem, s))
    seen = set()

    def novel(s):
        v = tuple(f(s) for f in features)
        if v in seen:
            return False
        seen.add(v)
        return True

    res = _novelty_bfs(problem, start, novel, accept)
    res.k = len(features)
    return res


def bfs(problem: GroundProblem, start=None, accept=None) -> SearchResult:
    """Plain breadth-first search with duplicate detection."""
    start = problem.init if start is None else start
    accept = accept or (lambda s: is_goal(problem, s))
    return _novelty_bfs(problem, start, lambda s: True, accept)
