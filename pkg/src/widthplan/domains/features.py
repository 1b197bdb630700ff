"""Feature registry: goal counter, pattern counts and per-domain hooks.

Hooks read everything they need from the atoms of the problem (static atoms,
goal atoms, movement actions), so they work for parsed problems as well as
for generated ones.  Every evaluator is O(bN) or better.
"""
from __future__ import annotations

import re
import weakref
from collections import deque
from dataclasses import dataclass
from typing import Callable

from ..errors import ArityMismatch, EvaluatorUnbound, UnknownHook
from ..model import Feature, GroundProblem, bits, split_atom


@dataclass(frozen=True)
class FeatureSpec:
    """``definition`` is ``("builtin", hook)``, ``("count", pred, pattern)``
    or ``("goal_count",)``."""

    name: str
    definition: tuple

    @property
    def kind(self) -> str | None:
        if self.definition[0] in ("count", "goal_count"):
            return "num"
        return None  # decided by the hook


_COUNT_RE = re.compile(r"^count\(\s*([A-Za-z_][\w\-]*)\s*((?:,\s*[^,()\s]+\s*)*)\)$")


def parse_feature_spec(text: str) -> FeatureSpec:
    """Parse ``name``, ``#g``, ``count(pred,?,x)`` or ``alias=<definition>``."""
    text = text.strip()
    if "=" in text and not text.startswith("count("):
        name, _, body = text.partition("=")
        inner = parse_feature_spec(body)
        return FeatureSpec(name.strip(), inner.definition)
    if text == "#g":
        return FeatureSpec("#g", ("goal_count",))
    m = _COUNT_RE.match(text)
    if m:
        args = tuple(a.strip() for a in m.group(2).split(",")[1:]) if m.group(2) else ()
        return FeatureSpec(text.replace(" ", ""), ("count", m.group(1), args))
    if text.startswith("count"):
        raise ArityMismatch(f"malformed count pattern {text!r}")
    return FeatureSpec(text, ("builtin", text))


# ---------------------------------------------------------------- helpers

def _atoms_by_pred(problem: GroundProblem, pred: str) -> list[tuple[int, tuple]]:
    out = []
    for i, name in enumerate(problem.universe.atoms):
        p, args = split_atom(name)
        if p == pred:
            out.append((i, args))
    return out


def _mask(ids) -> int:
    m = 0
    for i in ids:
        m |= 1 << i
    return m


def _bfs_all(adj: dict) -> dict:
    dist = {}
    for src in adj:
        d = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if v not in d:
                    d[v] = d[u] + 1
                    q.append(v)
        dist[src] = d
    return dist


def _movement_graph(problem: GroundProblem, pred: str = "at") -> dict:
    """Cell adjacency from actions that delete one ``at`` atom and add another."""
    at_ids = {i: args[0] for i, args in _atoms_by_pred(problem, pred)}
    adj = {c: set() for c in at_ids.values()}
    for a in problem.actions:
        src = [at_ids[i] for i in a.delete if i in at_ids]
        dst = [at_ids[i] for i in a.add if i in at_ids]
        if len(src) == 1 and len(dst) == 1:
            adj[src[0]].add(dst[0])
    return {c: sorted(v) for c, v in adj.items()}


def _single(s: int, mask: int, lookup: dict):
    hit = s & mask
    if not hit:
        return None
    return lookup[(hit & -hit).bit_length() - 1]


# ---------------------------------------------------------------- blocks

def _blocks_support(problem):
    on = _atoms_by_pred(problem, "on")
    ontable = _atoms_by_pred(problem, "ontable")
    hold = _atoms_by_pred(problem, "hold")
    blocks = sorted({a[0] for _, a in ontable} | {a[0] for _, a in hold})
    on_map = {i: (a[0], a[1]) for i, a in on}
    tab_map = {i: a[0] for i, a in ontable}
    hold_map = {i: a[0] for i, a in hold}
    on_mask, tab_mask, hold_mask = _mask(on_map), _mask(tab_map), _mask(hold_map)

    def support(s):
        sup = {}
        for i in bits(s & on_mask):
            b, c = on_map[i]
            sup[b] = c
        for i in bits(s & tab_mask):
            sup[tab_map[i]] = "table"
        for i in bits(s & hold_mask):
            sup[hold_map[i]] = "held"
        return sup

    return blocks, support, hold_mask, on_map


def _hook_blocks_H(problem):
    _, _, hold_mask, _ = _blocks_support(problem)
    return "bool", lambda s: 1 if s & hold_mask else 0


def _hook_blocks_n(problem):
    """Blocks above ``x`` in its tower."""
    x = problem.meta.get("x", "x")
    _, _, _, on_map = _blocks_support(problem)
    if not any(c == x for _, c in on_map.values()):
        raise EvaluatorUnbound(f"no block named {x!r} for feature n")
    below = {}
    for i, (b, c) in on_map.items():
        below.setdefault(c, []).append((i, b))
    on_mask = _mask(on_map)

    def n(s):
        count, cur = 0, x
        present = s & on_mask
        while True:
            for i, b in below.get(cur, ()):
                if (present >> i) & 1:
                    count += 1
                    cur = b
                    break
            else:
                return count
    return "num", n


def _hook_blocks_misplaced(problem):
    """#m: blocks with a wrong support (per goal on/ontable atoms), held
    constrained blocks, and blocks above a misplaced block."""
    blocks, support, _, _ = _blocks_support(problem)
    target = {}
    for g in problem.goal:
        p, args = split_atom(problem.universe.atoms[g])
        if p == "on":
            target[args[0]] = args[1]
        elif p == "ontable":
            target[args[0]] = "table"

    def misplaced(s):
        sup = support(s)
        memo = {}

        def bad(b):
            if b in memo:
                return memo[b]
            under = sup.get(b)
            wrong = b in target and under != target[b]
            if not wrong and under not in (None, "table", "held"):
                wrong = bad(under)
            memo[b] = wrong
            return wrong

        return sum(1 for b in blocks if bad(b))
    return "num", misplaced


# ---------------------------------------------------------------- boxes

def _hook_boxes(problem):
    ontable = {i: a[0] for i, a in _atoms_by_pred(problem, "ontable")}
    inside = {}
    for i, (ma, bx) in _atoms_by_pred(problem, "in"):
        inside.setdefault(bx, []).append(i)
    box_masks = [(i, _mask(inside.get(bx, ()))) for i, bx in ontable.items()]
    return box_masks


def _hook_boxes_m(problem):
    box_masks = _hook_boxes(problem)

    def m(s):
        counts = [(s & mk).bit_count() for i, mk in box_masks if (s >> i) & 1]
        return min(counts) if counts else 0
    return "num", m


def _hook_boxes_n(problem):
    tab_mask = _mask(i for i, _ in _hook_boxes(problem))
    return "num", lambda s: (s & tab_mask).bit_count()


# ---------------------------------------------------------------- delivery

class _DeliveryIndex:
    def __init__(self, problem):
        at = _atoms_by_pred(problem, "at")
        self.at_cell = {i: a[0] for i, a in at}
        self.at_mask = _mask(self.at_cell)
        targets = [a[0] for i, a in _atoms_by_pred(problem, "target") if (problem.init >> i) & 1]
        if len(targets) != 1:
            raise EvaluatorUnbound("delivery features need exactly one target(c) atom")
        self.target = targets[0]
        self.dist = _bfs_all(_movement_graph(problem))
        hold = _atoms_by_pred(problem, "hold")
        self.hold_mask = _mask(i for i, _ in hold)
        self.pkgs = sorted({a[0] for _, a in hold})
        # atp atoms away from the target, keyed to their cell
        self.away = {i: a[1] for i, a in _atoms_by_pred(problem, "atp") if a[1] != self.target}
        self.away_mask = _mask(self.away)
        self.at_target_mask = _mask(i for i, a in _atoms_by_pred(problem, "atp") if a[1] == self.target)

    def agent(self, s):
        return _single(s, self.at_mask, self.at_cell)


_DELIVERY_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _delivery(problem):
    cached = _DELIVERY_CACHE.get(problem)
    if cached is None:
        cached = _DELIVERY_CACHE[problem] = _DeliveryIndex(problem)
    return cached


def _hook_delivery_H(problem):
    ix = _delivery(problem)
    return "bool", lambda s: 1 if s & ix.hold_mask else 0


def _hook_delivery_p(problem):
    """Distance to the nearest undelivered package lying on the grid; 0 when
    holding a package or when none is left."""
    ix = _delivery(problem)

    def p(s):
        if s & ix.hold_mask:
            return 0
        away = s & ix.away_mask
        if not away:
            return 0
        d = ix.dist[ix.agent(s)]
        return min(d[ix.away[i]] for i in bits(away))
    return "num", p


def _hook_delivery_t(problem):
    ix = _delivery(problem)
    return "num", lambda s: ix.dist[ix.agent(s)][ix.target]


def _hook_delivery_n(problem):
    ix = _delivery(problem)
    total = len(ix.pkgs)
    return "num", lambda s: total - (s & ix.at_target_mask).bit_count()


# ---------------------------------------------------------------- grid

def _hook_grid_d(problem):
    """Distance to the target cell; on an obstacle-free 4-connected grid the
    BFS distance is the Manhattan distance."""
    xs = {i: int(a[0]) for i, a in _atoms_by_pred(problem, "x")}
    ys = {i: int(a[0]) for i, a in _atoms_by_pred(problem, "y")}
    tx = next(xs[g] for g in problem.goal if g in xs)
    ty = next(ys[g] for g in problem.goal if g in ys)
    xm, ym = _mask(xs), _mask(ys)

    def d(s):
        return abs(_single(s, xm, xs) - tx) + abs(_single(s, ym, ys) - ty)
    return "num", d


Hook = Callable[[GroundProblem], tuple]

_HOOKS: dict[str, dict[str, Hook]] = {
    "blocks": {"H": _hook_blocks_H, "n": _hook_blocks_n, "#m": _hook_blocks_misplaced},
    "boxes": {"m": _hook_boxes_m, "n": _hook_boxes_n},
    "delivery": {"H": _hook_delivery_H, "p": _hook_delivery_p,
                 "t": _hook_delivery_t, "n": _hook_delivery_n},
    "grid": {"d": _hook_grid_d},
    "visitall": {},
}


def builtin_hooks(domain: str | None) -> list[str]:
    return sorted(_HOOKS.get(domain or "", {}))


def _goal_count(problem):
    gm = problem.goal_mask
    return lambda s: (gm & ~s).bit_count()


def _count(problem, pred, pattern):
    matches = []
    arity = None
    for i, name in enumerate(problem.universe.atoms):
        p, args = split_atom(name)
        if p != pred:
            continue
        arity = len(args)
        if len(args) != len(pattern):
            raise ArityMismatch(f"{pred} has arity {len(args)}, pattern has {len(pattern)}")
        if all(q == "?" or q == a for q, a in zip(pattern, args)):
            matches.append(i)
    if arity is None:
        raise EvaluatorUnbound(f"no atoms with predicate {pred!r}")
    mask = _mask(matches)
    return lambda s: (s & mask).bit_count()


def resolve_features(problem: GroundProblem, specs) -> list[Feature]:
    """Bind evaluators for ``specs`` (FeatureSpec objects or spec strings)."""
    out = []
    for spec in specs:
        if isinstance(spec, str):
            spec = parse_feature_spec(spec)
        kind, *rest = spec.definition
        if kind == "goal_count":
            out.append(Feature(spec.name, "num", _goal_count(problem)))
        elif kind == "count":
            out.append(Feature(spec.name, "num", _count(problem, *rest)))
        elif kind == "builtin":
            hooks = _HOOKS.get(problem.domain or "", {})
            if rest[0] not in hooks:
                raise UnknownHook(f"no builtin feature {rest[0]!r} for domain {problem.domain!r}")
            fkind, fn = hooks[rest[0]](problem)
            out.append(Feature(spec.name, fkind, fn))
        else:
            raise UnknownHook(f"unknown feature definition {spec.definition!r}")
    return out
