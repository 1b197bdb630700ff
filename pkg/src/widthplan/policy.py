"""Rule sets executed as policies over a problem, and brute-force verifiers
for the policy-level properties (solves, Markovian, separation, optimal,
closed, sound, projection)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .domains.features import resolve_features
from .errors import CapExceeded, KindError, NotASolution
from .model import Feature, GroundProblem, boolean_valuation, is_goal, successor_states
from .oracle import DEFAULT_STATE_CAP, StateSpace
from .rules import CompiledRule, FeatureDecl, Rule, RuleSet, Condition, Effect, compile_rules

DEFAULT_POLICY_CAP = 100_000


class PolicyContext:
    """A problem, a feature list aligned with a rule set, and optional goal
    valuations ``kappa`` (boolean valuations)."""

    def __init__(self, problem: GroundProblem, features: Sequence[Feature], rules: RuleSet, kappa=None):
        names = [f.name for f in features]
        if names != list(rules.feature_names):
            raise KindError(f"features {names} do not match the rule set's {list(rules.feature_names)}")
        for f, decl in zip(features, rules.features):
            if f.kind != decl.kind:
                raise KindError(f"feature {f.name} is {f.kind} but declared {decl.kind}")
        self.problem = problem
        self.features = list(features)
        self.rules = rules
        self.compiled: list[CompiledRule] = compile_rules(rules)
        self.kappa = None if kappa is None else frozenset(kappa)
        self._vals = {}

    def val(self, s) -> tuple:
        v = self._vals.get(s)
        if v is None:
            v = self._vals[s] = tuple(f(s) for f in self.features)
        return v

    def bval(self, s) -> tuple:
        return boolean_valuation(self.features, self.val(s))

    def applicable(self, s) -> list[str]:
        f = self.val(s)
        return [r.id for r in self.compiled if r.applicable(f)]

    def compatible_rules(self, s, t) -> list[str]:
        f, g = self.val(s), self.val(t)
        return [r.id for r in self.compiled if r.compatible(f, g)]

    def is_compatible(self, s, t) -> bool:
        f, g = self.val(s), self.val(t)
        return any(r.compatible(f, g) for r in self.compiled)


def make_context(problem: GroundProblem, rules: RuleSet, definitions: dict | None = None,
                 kappa=None) -> PolicyContext:
    """Bind the rule set's features on ``problem``.  ``definitions`` maps a
    feature name to a feature spec string (e.g. ``"count(on,?,x)"``); other
    names resolve to builtin hooks of the problem's domain."""
    definitions = definitions or {}
    specs = [f"{n}={definitions[n]}" if n in definitions else n for n in rules.feature_names]
    return PolicyContext(problem, resolve_features(problem, specs), rules, kappa)


def transition_compatible(ctx: PolicyContext, s, t) -> set:
    """Ids of the rules whose condition holds in ``s`` and whose effect
    (frame included) is satisfied by ``(s, t)``."""
    return set(ctx.compatible_rules(s, t))


# ---------------------------------------------------------------- policy runs

class PolicyRun:
    """States reachable from the initial state along policy transitions.
    Goal states are terminal; ``edges[i]`` lists ``(action, j, rule ids)``."""

    def __init__(self, ctx: PolicyContext, cap: int = DEFAULT_POLICY_CAP, start=None):
        p = ctx.problem
        start = p.init if start is None else start
        self.ctx = ctx
        self.states = [start]
        self.index = {start: 0}
        self.edges = []
        self.goal = []
        i = 0
        while i < len(self.states):
            s = self.states[i]
            g = is_goal(p, s)
            self.goal.append(g)
            row = []
            if not g:
                for a, t in successor_states(p, s):
                    ids = ctx.compatible_rules(s, t)
                    if not ids:
                        continue
                    j = self.index.get(t)
                    if j is None:
                        j = len(self.states)
                        if j >= cap:
                            raise CapExceeded(cap, "policy-reachable states")
                        self.index[t] = j
                        self.states.append(t)
                    row.append((a, j, tuple(ids)))
            self.edges.append(row)
            i += 1
        self.stuck = [i for i, row in enumerate(self.edges) if not row and not self.goal[i]]
        self.cycle = self._find_cycle()

    def __len__(self):
        return len(self.states)

    def _find_cycle(self):
        """State indices of one cycle, or None."""
        color = [0] * len(self.states)
        for root in range(len(self.states)):
            if color[root]:
                continue
            stack = [(root, 0)]
            path = []
            color[root] = 1
            path.append(root)
            while stack:
                u, k = stack[-1]
                if k < len(self.edges[u]):
                    stack[-1] = (u, k + 1)
                    v = self.edges[u][k][1]
                    if color[v] == 1:
                        return path[path.index(v):] + [v]
                    if color[v] == 0:
                        color[v] = 1
                        path.append(v)
                        stack.append((v, 0))
                else:
                    color[u] = 2
                    path.pop()
                    stack.pop()
        return None

    @property
    def solves(self) -> bool:
        return not self.stuck and self.cycle is None

    def goal_path_lengths(self):
        """(shortest, longest) goal-reaching trajectory lengths; needs no cycles."""
        if self.cycle is not None:
            raise NotASolution("policy has infinite trajectories")
        order = self._topo()
        lo = [None] * len(self.states)
        hi = [None] * len(self.states)
        for u in reversed(order):
            if self.goal[u]:
                lo[u] = hi[u] = 0
                continue
            for _, v, _ in self.edges[u]:
                if lo[v] is not None:
                    lo[u] = lo[v] + 1 if lo[u] is None else min(lo[u], lo[v] + 1)
                    hi[u] = hi[v] + 1 if hi[u] is None else max(hi[u], hi[v] + 1)
        return lo[0], hi[0]

    def _topo(self):
        seen = [False] * len(self.states)
        order = []
        for root in range(len(self.states)):
            if seen[root]:
                continue
            seen[root] = True
            stack = [(root, iter(self.edges[root]))]
            while stack:
                u, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    order.append(u)
                    stack.pop()
                elif not seen[nxt[1]]:
                    seen[nxt[1]] = True
                    stack.append((nxt[1], iter(self.edges[nxt[1]])))
        return order[::-1]

    def path_to(self, j):
        """A trajectory (state indices) from the start to ``j`` along policy edges."""
        prev = {0: None}
        queue = [0]
        for u in queue:
            if u == j:
                break
            for _, v, _ in self.edges[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        path = []
        while j is not None:
            path.append(j)
            j = prev[j]
        return path[::-1]


@dataclass
class Trajectory:
    states: list
    transitions: list  # (action name, rule ids)
    maximal_kind: str  # goal_reached | stuck | infinite
    cycle_state: int | None = None


@dataclass
class TrajectoryReport:
    solves: bool
    trajectories: list
    complete: bool  # False when the listing stopped at the limit
    reachable: int
    stuck_states: list = field(default_factory=list)
    cycle: list | None = None


def enumerate_maximal_trajectories(ctx: PolicyContext, cap: int = DEFAULT_POLICY_CAP,
                                   limit: int = 1000) -> TrajectoryReport:
    """Verdict from the policy-reachable graph; up to ``limit`` maximal
    trajectories listed by depth-first search (a revisit along the current
    path is reported as an infinite trajectory)."""
    run = PolicyRun(ctx, cap)
    out = []
    acts = ctx.problem.actions
    path = [0]
    trans = []
    on_path = {0}

    def emit(kind, cyc=None):
        out.append(Trajectory([run.states[i] for i in path], list(trans), kind, cyc))

    stack = [iter(run.edges[0])]
    if run.goal[0]:
        emit("goal_reached")
        stack = []
    elif not run.edges[0]:
        emit("stuck")
        stack = []
    while stack and len(out) < limit:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            on_path.discard(path.pop())
            if trans:
                trans.pop()
            continue
        a, v, ids = nxt
        if v in on_path:
            trans.append((acts[a].name, ids))
            path.append(v)
            emit("infinite", run.states[v])
            path.pop()
            trans.pop()
            continue
        path.append(v)
        trans.append((acts[a].name, ids))
        if run.goal[v]:
            emit("goal_reached")
        elif not run.edges[v]:
            emit("stuck")
        else:
            on_path.add(v)
            stack.append(iter(run.edges[v]))
            continue
        path.pop()
        trans.pop()
    return TrajectoryReport(run.solves, out, not stack, len(run),
                            [run.states[i] for i in run.stuck],
                            None if run.cycle is None else [run.states[i] for i in run.cycle])


# ---------------------------------------------------------------- verifiers

@dataclass
class Verdict:
    ok: bool
    reason: str = ""
    witness: tuple = ()

    def __bool__(self):
        return self.ok


@dataclass
class SeparationResult:
    ok: bool
    kappa: frozenset
    counterexample: tuple | None = None  # (problem name, state, boolean valuation)

    def __bool__(self):
        return self.ok


def check_goal_separation(problems: Iterable[GroundProblem], features,
                          cap: int = DEFAULT_STATE_CAP) -> SeparationResult:
    """kappa = boolean valuations of reachable goal states across ``problems``;
    fails when a reachable non-goal state has a valuation in kappa.

    ``features`` is a list of feature specs resolved per problem, or a
    callable ``problem -> list[Feature]``.
    """
    problems = list(problems)
    bound = []
    for p in problems:
        feats = features(p) if callable(features) else resolve_features(p, list(features))
        space = StateSpace(p, cap=cap)
        bound.append((p, feats, space))
    kappa = set()
    for p, feats, space in bound:
        for s, g in zip(space.states, space.goal):
            if g:
                kappa.add(boolean_valuation(feats, tuple(f(s) for f in feats)))
    for p, feats, space in bound:
        for s, g in zip(space.states, space.goal):
            if not g:
                b = boolean_valuation(feats, tuple(f(s) for f in feats))
                if b in kappa:
                    return SeparationResult(False, frozenset(kappa), (p.name, s, b))
    return SeparationResult(True, frozenset(kappa))


def _next_valuations(ctx, space, i):
    s = space.states[i]
    return {ctx.val(space.states[j]) for _, j in space.succ[i] if ctx.is_compatible(s, space.states[j])}


def check_markovian(problem: GroundProblem, ctx: PolicyContext, cap: int = DEFAULT_STATE_CAP,
                    space: StateSpace | None = None) -> Verdict:
    """For every policy transition (s, s') out of a reachable non-goal state,
    every reachable state s1 that is optimal for f(s) must have a policy
    transition (s1, s1') with f(s1') = f(s').

    Goal states are skipped: trajectories end there, and the policy graph has
    no edges out of goal valuations.
    """
    space = space or StateSpace(problem, cap=cap)
    by_val = {}
    for i, s in enumerate(space.states):
        if space.goal[i]:
            continue
        by_val.setdefault(ctx.val(s), []).append(i)
    for f, idx in by_val.items():
        best = min(space.depth[i] for i in idx)
        optimal = [i for i in idx if space.depth[i] == best]
        required = {}
        for i in idx:
            for g in _next_valuations(ctx, space, i):
                required.setdefault(g, i)
        if not required:
            continue
        for i1 in optimal:
            have = _next_valuations(ctx, space, i1)
            for g, i in required.items():
                if g not in have:
                    return Verdict(False, f"valuation {f} -> {g} is not available in an optimal state",
                                   (space.states[i], space.states[i1], g))
    # optimal states of goal valuations never matter: no policy transitions leave goals
    return Verdict(True)


def check_policy_optimal(problem: GroundProblem, ctx: PolicyContext, cap: int = DEFAULT_POLICY_CAP,
                         space: StateSpace | None = None) -> Verdict:
    """Every plan induced by the policy is optimal; the policy must solve the
    problem first."""
    run = PolicyRun(ctx, cap)
    if not run.solves:
        raise NotASolution(f"policy {ctx.rules.name} does not solve {problem.name}")
    space = space or StateSpace(problem)
    lo, hi = run.goal_path_lengths()
    opt = space.optimal_cost
    if hi != opt:
        return Verdict(False, f"a policy plan has length {hi}, optimum is {opt}", (hi, opt))
    return Verdict(True)


def check_closed(problem: GroundProblem, ctx: PolicyContext, cap: int = DEFAULT_POLICY_CAP) -> Verdict:
    run = PolicyRun(ctx, cap)
    if run.stuck:
        return Verdict(False, "a policy-reachable non-goal state has no policy transition",
                       (run.states[run.stuck[0]],))
    return Verdict(True)


def check_sound(problem: GroundProblem, ctx: PolicyContext, cap: int = DEFAULT_STATE_CAP,
                space: StateSpace | None = None) -> Verdict:
    space = space or StateSpace(problem, cap=cap)
    for i, s in enumerate(space.states):
        if space.goal[i] or not ctx.applicable(s):
            continue
        if not any(ctx.is_compatible(s, space.states[j]) for _, j in space.succ[i]):
            return Verdict(False, "a reachable non-goal state with an applicable rule has no policy transition",
                           (s, tuple(ctx.applicable(s))))
    return Verdict(True)


def check_projection(problem: GroundProblem, sub: PolicyContext, sup: PolicyContext,
                     cap: int = DEFAULT_POLICY_CAP) -> Verdict:
    """Every maximal ``sub`` trajectory is a maximal ``sup`` trajectory: each
    ``sub`` step is a ``sup`` transition and each final non-goal ``sub`` state
    has no ``sup`` transition."""
    run = PolicyRun(sub, cap)
    for i, row in enumerate(run.edges):
        s = run.states[i]
        for a, j, _ in row:
            if not sup.is_compatible(s, run.states[j]):
                return Verdict(False, "a sub-policy step is not compatible with the super-policy",
                               (s, run.states[j]))
        if not row and not run.goal[i]:
            for a, t in successor_states(problem, s):
                if sup.is_compatible(s, t):
                    return Verdict(False, "a final sub-policy state admits a super-policy step", (s, t))
    return Verdict(True)


# ---------------------------------------------------------------- chains

def chain_to_policy(problem: GroundProblem, chain) -> PolicyContext:
    """Features t_i~ (t_i holds and no later tuple holds) and rules
    ``t_i~ -> t_{i+1}~, -t_i~``."""
    tuples = getattr(chain, "tuples", chain)
    masks = []
    for t in tuples:
        m = 0
        for a in t:
            m |= 1 << a
        masks.append(m)
    n = len(masks) - 1

    def make(i):
        mi, later = masks[i], masks[i + 1:]
        return lambda s: 1 if s & mi == mi and not any(s & mj == mj for mj in later) else 0

    features = [Feature(f"t{i}", "bool", make(i)) for i in range(n + 1)]
    decls = tuple(FeatureDecl(f.name, "bool") for f in features)
    rules = tuple(Rule(f"r{i}", (Condition(f"t{i}", "true"),),
                       (Effect(f"t{i}", "clear"), Effect(f"t{i + 1}", "set")))
                  for i in range(n))
    return PolicyContext(problem, features, RuleSet("chain", decls, rules, "policy"))


def solves_optimally(problem: GroundProblem, ctx: PolicyContext, space: StateSpace | None = None,
                     cap: int = DEFAULT_POLICY_CAP) -> bool:
    run = PolicyRun(ctx, cap)
    if not run.solves:
        return False
    return bool(check_policy_optimal(problem, ctx, cap, space))
