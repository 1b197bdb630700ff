"""Policy graphs over boolean feature valuations and the structural checks
run on them: Sieve termination, goal connectedness, regularity and the
order a rule set induces on concrete feature valuations."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product

import networkx as nx

from .errors import ValuationSetMissing
from .rules import RuleSet, compile_rules, effect_text

REGULAR = "regular"
WEAKLY_REGULAR = "weakly_regular"
NEITHER = "neither"

_INCREASES = ("inc", "unknown_num")


@dataclass(frozen=True)
class Edge:
    src: tuple
    dst: tuple
    rule: str
    effects: tuple  # (feature index, change) pairs of the rule
    label: str


@dataclass
class PolicyGraph:
    """Nodes are all 0/1 tuples over the features (1 = true / n>0)."""

    features: tuple  # of FeatureDecl
    nodes: list
    goal_nodes: frozenset
    edges: list
    alive: list = field(default_factory=list)

    def __post_init__(self):
        if not self.alive:
            self.alive = [True] * len(self.edges)

    @property
    def feature_names(self) -> tuple:
        return tuple(f.name for f in self.features)

    def numeric(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.kind == "num"]

    def successors(self, b) -> list:
        return [e.dst for e in self.edges if e.src == b]

    def node_label(self, b) -> str:
        return "".join(str(x) for x in b)

    def describe(self, b) -> str:
        out = []
        for f, x in zip(self.features, b):
            if f.kind == "bool":
                out.append(f.name if x else f"-{f.name}")
            else:
                out.append(f"{f.name}>0" if x else f"{f.name}=0")
        return ",".join(out)

    def reachable(self, initial) -> set:
        adj = {}
        for e in self.edges:
            adj.setdefault(e.src, []).append(e.dst)
        seen = set(initial)
        queue = deque(seen)
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    def restrict(self, initial) -> "PolicyGraph":
        """Subgraph induced by the nodes reachable from ``initial``."""
        keep = self.reachable(initial)
        edges = [e for e in self.edges if e.src in keep]
        return PolicyGraph(self.features, [b for b in self.nodes if b in keep],
                           frozenset(self.goal_nodes & keep), edges)


def _target_options(b, cr, nfeat, kinds):
    """Per-feature admissible values of b' for rule ``cr`` applied at b."""
    opts = [(b[i],) for i in range(nfeat)]
    for i, ch in cr.effects:
        if ch == "set":
            opts[i] = (1,)
        elif ch == "clear":
            opts[i] = (0,)
        elif ch == "inc":
            opts[i] = (1,)
        else:  # dec leaves n=0 open; ? leaves everything open
            opts[i] = (0, 1)
    return opts


def build_policy_graph(rules: RuleSet, goal_nodes) -> PolicyGraph:
    """Edges (b, b', rule) for every rule whose condition holds at the
    non-goal node b and whose effects are compatible with (b, b')."""
    feats = rules.features
    n = len(feats)
    kinds = [f.kind for f in feats]
    compiled = compile_rules(rules)
    nodes = list(product((0, 1), repeat=n))
    goals = frozenset(tuple(g) for g in goal_nodes)
    edges = []
    for b in nodes:
        if b in goals:
            continue
        for cr, r in zip(compiled, rules.rules):
            if not cr.applicable(b):
                continue
            label = ", ".join(effect_text(e) for e in r.effects)
            for b2 in product(*_target_options(b, cr, n, kinds)):
                edges.append(Edge(b, b2, cr.id, cr.effects, label))
    return PolicyGraph(feats, nodes, goals, edges)


def goal_nodes_where(rules: RuleSet, condition: dict) -> list[tuple]:
    """Boolean valuations satisfying ``condition`` (feature name -> 0/1)."""
    names = rules.feature_names
    for k in condition:
        if k not in names:
            raise ValueError(f"unknown feature {k}")
    return [b for b in product((0, 1), repeat=len(names))
            if all(b[names.index(k)] == v for k, v in condition.items())]


# ---------------------------------------------------------------- Sieve

@dataclass
class Elimination:
    feature: str
    scc: int
    removed: tuple  # edge indices


@dataclass
class TerminationCertificate:
    verdict: bool
    eliminations: list
    cycle: list | None = None  # edge indices of a shortest surviving cycle
    summary: dict | None = None  # feature -> sorted changes along the cycle

    def __bool__(self):
        return self.verdict


def _sccs(graph: PolicyGraph, alive):
    g = nx.MultiDiGraph()
    g.add_nodes_from(graph.nodes)
    for k, e in enumerate(graph.edges):
        if alive[k]:
            g.add_edge(e.src, e.dst)
    comp = {}
    for cid, scc in enumerate(sorted(nx.strongly_connected_components(g), key=min)):
        for v in scc:
            comp[v] = cid
    return comp


def _internal(graph, alive, comp):
    """Alive edges grouped by the SCC holding both endpoints."""
    out = {}
    for k, e in enumerate(graph.edges):
        if alive[k] and comp[e.src] == comp[e.dst]:
            out.setdefault(comp[e.src], []).append(k)
    return out


def sieve_terminates(graph: PolicyGraph) -> TerminationCertificate:
    """Remove the dec(n) edges of an SCC when no edge of that SCC can
    increase n, until nothing changes; terminating iff no cycle survives."""
    alive = list(graph.alive)
    nums = graph.numeric()
    names = graph.feature_names
    elims = []
    while True:
        comp = _sccs(graph, alive)
        groups = _internal(graph, alive, comp)
        changed = False
        for cid in sorted(groups):
            ks = groups[cid]
            for i in nums:
                decs = [k for k in ks if (i, "dec") in graph.edges[k].effects]
                if not decs:
                    continue
                if any((i, ch) in graph.edges[k].effects for k in ks for ch in _INCREASES):
                    continue
                for k in decs:
                    alive[k] = False
                elims.append(Elimination(names[i], cid, tuple(decs)))
                changed = True
                break
        if not changed:
            break
    comp = _sccs(graph, alive)
    groups = _internal(graph, alive, comp)
    if not groups:
        return TerminationCertificate(True, elims)
    cycle = _shortest_cycle(graph, alive, groups)
    summary = {}
    for k in cycle:
        for i, ch in graph.edges[k].effects:
            summary.setdefault(names[i], set()).add(ch)
    return TerminationCertificate(False, elims, cycle, {f: sorted(v) for f, v in summary.items()})


def _shortest_cycle(graph, alive, groups):
    best = None
    for ks in groups.values():
        out = {}
        for k in ks:
            out.setdefault(graph.edges[k].src, []).append(k)
        for root in sorted(out):
            prev = {}
            queue = deque([root])
            found = None
            while queue and found is None:
                u = queue.popleft()
                for k in out.get(u, ()):
                    v = graph.edges[k].dst
                    if v == root:
                        found = k
                        break
                    if v not in prev:
                        prev[v] = k
                        queue.append(v)
            if found is None:
                continue
            path = [found]
            u = graph.edges[found].src
            while u != root:
                k = prev[u]
                path.append(k)
                u = graph.edges[k].src
            path.reverse()
            if best is None or len(path) < len(best):
                best = path
    return best


def replay_eliminations(graph: PolicyGraph, cert: TerminationCertificate) -> bool:
    """True iff removing the certificate's edges leaves an acyclic graph."""
    alive = list(graph.alive)
    for el in cert.eliminations:
        for k in el.removed:
            alive[k] = False
    comp = _sccs(graph, alive)
    return not _internal(graph, alive, comp)


def brute_force_terminates(graph: PolicyGraph, max_edges: int = 12) -> bool:
    """Termination checked directly on every edge set a closed walk can
    traverse (strongly connected edge subsets); exponential in edges."""
    m = len(graph.edges)
    if m > max_edges:
        raise ValueError(f"{m} edges exceed the brute-force limit {max_edges}")
    nums = graph.numeric()
    for mask in range(1, 1 << m):
        ks = [k for k in range(m) if mask >> k & 1]
        if not _strongly_connected(graph, ks):
            continue
        ok = False
        for i in nums:
            effs = [graph.edges[k].effects for k in ks]
            if any((i, "dec") in e for e in effs) and not any((i, c) in e for e in effs for c in _INCREASES):
                ok = True
                break
        if not ok:
            return False
    return True


def _strongly_connected(graph, ks) -> bool:
    fwd, bwd = {}, {}
    for k in ks:
        e = graph.edges[k]
        fwd.setdefault(e.src, set()).add(e.dst)
        bwd.setdefault(e.dst, set()).add(e.src)
    verts = set(fwd) | set(bwd)
    root = graph.edges[ks[0]].src

    def reach(adj):
        seen = {root}
        stack = [root]
        while stack:
            for v in adj.get(stack.pop(), ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    return reach(fwd) == verts and reach(bwd) == verts


# ---------------------------------------------------------------- other checks

def check_goal_connected(graph: PolicyGraph, initial_nodes) -> bool:
    """Every node reachable from an initial node reaches a goal node."""
    rev = {}
    for e in graph.edges:
        rev.setdefault(e.dst, []).append(e.src)
    good = set(graph.goal_nodes)
    queue = deque(good)
    while queue:
        v = queue.popleft()
        for u in rev.get(v, ()):
            if u not in good:
                good.add(u)
                queue.append(u)
    return graph.reachable([tuple(b) for b in initial_nodes]) <= good


def _numeric_order(rules, nums) -> list | None:
    """An ordering of the numerical features in which every rule decreases
    some feature placed before all the features it may increase."""
    pending = []
    for r in rules:
        dec = {e.feature for e in r.effects if e.change == "dec"}
        inc = {e.feature for e in r.effects if e.change in _INCREASES}
        pending.append((dec, inc))
    order = []
    left = list(nums)
    while pending:
        blocked = set().union(*(inc for _, inc in pending))
        pick = next((n for n in left if n not in blocked), None)
        if pick is None:
            return None
        order.append(pick)
        left.remove(pick)
        pending = [(d, i) for d, i in pending if pick not in d]
        if not left and pending:
            return None
    return order + left


def check_regular(rules: RuleSet) -> str:
    """``regular`` when the numerical features can be ordered so each rule
    decreases one of them while possibly increasing only later ones;
    ``weakly_regular`` when that holds for the rules with numerical effects
    and the boolean-only rules cannot cycle over the booleans by themselves."""
    nums = [f.name for f in rules.features if f.kind == "num"]
    if _numeric_order(rules.rules, nums) is not None:
        return REGULAR
    numeric_rules = [r for r in rules.rules if any(e.feature in nums for e in r.effects)]
    bool_rules = [r for r in rules.rules if r not in numeric_rules]
    if not bool_rules or _numeric_order(numeric_rules, nums) is None:
        return NEITHER
    bools = [f for f in rules.features if f.kind == "bool"]
    sub = RuleSet(rules.name, tuple(bools), tuple(
        type(r)(r.id, tuple(c for c in r.conditions if c.feature not in nums), r.effects)
        for r in bool_rules))
    g = build_policy_graph(sub, ())
    dg = nx.DiGraph()
    dg.add_edges_from((e.src, e.dst) for e in g.edges)
    return NEITHER if not nx.is_directed_acyclic_graph(dg) else WEAKLY_REGULAR


def induced_precedes(rules: RuleSet, f, f2, valuations, goal_nodes=()) -> bool:
    """True iff ``f2`` precedes ``f`` in the order the rules induce on
    ``valuations``: ``f2`` is reachable from ``f`` through rule-compatible
    pairs whose source is not a goal valuation (boolean projection in
    ``goal_nodes``)."""
    if not valuations:
        raise ValuationSetMissing("induced_precedes needs a finite valuation set")
    vals = list(dict.fromkeys(tuple(v) for v in valuations))
    f, f2 = tuple(f), tuple(f2)
    if f not in vals or f2 not in vals:
        raise ValuationSetMissing("both valuations must belong to the valuation set")
    compiled = compile_rules(rules)
    goals = {tuple(g) for g in goal_nodes}
    bool_of = lambda v: tuple(1 if x else 0 for x in v)

    def succ(u):
        if bool_of(u) in goals:
            return []
        return [v for v in vals if any(cr.compatible(u, v) for cr in compiled)]

    seen = set()
    queue = deque(succ(f))
    while queue:
        u = queue.popleft()
        if u == f2:
            return True
        if u in seen:
            continue
        seen.add(u)
        queue.extend(succ(u))
    return False


def to_dot(graph: PolicyGraph, initial_nodes=(), name: str = "policy") -> str:
    """Graphviz text; node ids are valuation bitstrings in feature order."""
    init = {tuple(b) for b in initial_nodes}
    keep = graph.reachable(init) if init else set(graph.nodes)
    lines = [f'digraph "{name}" {{', f'  // features: {" ".join(graph.feature_names)}']
    for b in graph.nodes:
        if b not in keep:
            continue
        attrs = [f'label="{graph.describe(b)}"']
        if b in graph.goal_nodes:
            attrs.append("peripheries=2")
        if b in init:
            attrs.append('style=filled, fillcolor="yellow"')
        lines.append(f'  "{graph.node_label(b)}" [{", ".join(attrs)}];')
    for e in graph.edges:
        if e.src in keep:
            lines.append(f'  "{graph.node_label(e.src)}" -> "{graph.node_label(e.dst)}" '
                         f'[rule="{e.rule}", label="{e.label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
