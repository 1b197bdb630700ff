"""Exhaustive breadth-first reachability: the oracle behind every width,
chain and policy verifier."""
from __future__ import annotations

from collections import deque
from itertools import combinations

from .errors import CapExceeded
from .model import GroundProblem, bits, is_goal, successor_states

DEFAULT_STATE_CAP = 2_000_000


class StateSpace:
    """All states reachable from ``start`` with BFS depths and successor lists.

    ``states[i]`` is a state, ``depth[i]`` its distance from ``start`` and
    ``succ[i]`` a list of ``(action index, state index)`` pairs in action order.
    """

    def __init__(self, problem: GroundProblem, start=None, cap: int = DEFAULT_STATE_CAP):
        self.problem = problem
        start = problem.init if start is None else start
        self.states = [start]
        self.index = {start: 0}
        self.depth = [0]
        self.parent = [(-1, -1)]
        self.succ = []
        queue = deque([0])
        while queue:
            i = queue.popleft()
            row = []
            d = self.depth[i] + 1
            for a, t in successor_states(problem, self.states[i]):
                j = self.index.get(t)
                if j is None:
                    j = len(self.states)
                    if j >= cap:
                        raise CapExceeded(cap)
                    self.index[t] = j
                    self.states.append(t)
                    self.depth.append(d)
                    self.parent.append((i, a))
                    queue.append(j)
                row.append((a, j))
            self.succ.append(row)
        self.goal = [is_goal(problem, s) for s in self.states]
        goal_depths = [self.depth[i] for i, g in enumerate(self.goal) if g]
        self.optimal_cost = min(goal_depths) if goal_depths else None
        self._succ_states = None

    def __len__(self):
        return len(self.states)

    @property
    def max_branching(self) -> int:
        return max((len(r) for r in self.succ), default=0)

    def succ_states(self, s):
        """Successor states of state ``s`` (not index), cached."""
        if self._succ_states is None:
            st = self.states
            self._succ_states = {st[i]: [st[j] for _, j in row] for i, row in enumerate(self.succ)}
        return self._succ_states[s]

    def plan_to(self, i: int) -> list[int]:
        """Action indices of a shortest path from the start to state index ``i``."""
        out = []
        while self.parent[i][0] >= 0:
            i, a = self.parent[i]
            out.append(a)
        return out[::-1]

    def tuple_depth(self, t) -> int | None:
        """d(t): least depth of a reachable state containing all atoms of ``t``."""
        m = 0
        for a in t:
            m |= 1 << a
        best = None
        for s, d in zip(self.states, self.depth):
            if s & m == m and (best is None or d < best):
                best = d
        return best

    def states_with(self, t, depth=None) -> list[int]:
        """Indices of reachable states containing ``t`` (optionally at ``depth``)."""
        m = 0
        for a in t:
            m |= 1 << a
        return [i for i, s in enumerate(self.states)
                if s & m == m and (depth is None or self.depth[i] == depth)]

    def tuple_depths(self, k: int) -> dict:
        """d(t) for every tuple of at most ``k`` non-static atoms, keyed by sorted id tuple."""
        free = ~self.problem.static_mask
        out = {(): 0}
        for s, d in sorted(zip(self.states, self.depth), key=lambda x: x[1]):
            ids = bits(s & free)
            for size in range(1, k + 1):
                for t in combinations(ids, size):
                    if t not in out:
                        out[t] = d
        return out


def bfs_oracle(problem: GroundProblem, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """Optimal cost, depth table and per-tuple depths via :class:`StateSpace`."""
    return StateSpace(problem, cap=cap)


def bfs_plan(problem: GroundProblem, cap: int = DEFAULT_STATE_CAP):
    """Shortest plan as a list of actions, or None when unsolvable."""
    if is_goal(problem, problem.init):
        return []
    parent = {problem.init: None}
    queue = deque([problem.init])
    while queue:
        s = queue.popleft()
        for a, t in successor_states(problem, s):
            if t in parent:
                continue
            parent[t] = (s, a)
            if len(parent) > cap:
                raise CapExceeded(cap)
            if is_goal(problem, t):
                plan = []
                while parent[t] is not None:
                    t, a = parent[t]
                    plan.append(problem.actions[a])
                return plan[::-1]
            queue.append(t)
    return None
