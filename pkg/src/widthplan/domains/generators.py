"""Procedural generators for the bundled domains.

Every generator returns a :class:`GroundProblem` with canonical atom names and
a deterministic atom/action order, so two calls with the same parameters
(and seed) produce equal problems.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from ..errors import InvalidParams
from ..model import AtomUniverse, GroundAction, GroundProblem, atom_name, bits


@dataclass(frozen=True)
class DomainSpec:
    name: str
    params: dict = field(default_factory=dict)

    def descriptor(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}[{inner}]"


class _Builder:
    def __init__(self):
        self.atoms: list[str] = []
        self.index: dict[str, int] = {}
        self.actions: list[GroundAction] = []

    def atom(self, pred, *objs) -> int:
        name = atom_name(pred, *objs)
        if name not in self.index:
            self.index[name] = len(self.atoms)
            self.atoms.append(name)
        return self.index[name]

    def ids(self, names):
        return [self.index[n] for n in names]

    def action(self, name, pre=(), add=(), delete=()):
        self.actions.append(GroundAction(name, frozenset(pre), frozenset(add), frozenset(delete)))

    def problem(self, name, init_ids, goal_ids, domain, meta=None) -> GroundProblem:
        init = 0
        for i in init_ids:
            init |= 1 << i
        return GroundProblem(name, AtomUniverse(self.atoms), init, frozenset(goal_ids),
                             tuple(self.actions), domain, dict(meta or {}))


def _require(params, key, default=None, minimum=1):
    if key not in params:
        if default is None:
            raise InvalidParams(key, "missing")
        return default
    value = params[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvalidParams(key, f"expected an integer, got {value!r}")
    if value < minimum:
        raise InvalidParams(key, f"must be >= {minimum}")
    return value


# ---------------------------------------------------------------- blocksworld

def _blocks_builder(blocks):
    """Four-predicate stack/unstack encoding plus the ``armempty`` atom."""
    b = _Builder()
    for x in blocks:
        b.atom("clear", x)
    for x in blocks:
        b.atom("ontable", x)
    for x in blocks:
        b.atom("hold", x)
    for x in blocks:
        for y in blocks:
            if x != y:
                b.atom("on", x, y)
    ae = b.atom("armempty")
    for x in blocks:
        b.action(f"pickup({x})",
                 pre=[b.atom("clear", x), b.atom("ontable", x), ae],
                 add=[b.atom("hold", x)],
                 delete=[b.atom("clear", x), b.atom("ontable", x), ae])
        b.action(f"putdown({x})",
                 pre=[b.atom("hold", x)],
                 add=[b.atom("ontable", x), b.atom("clear", x), ae],
                 delete=[b.atom("hold", x)])
    for x in blocks:
        for y in blocks:
            if x == y:
                continue
            b.action(f"unstack({x},{y})",
                     pre=[b.atom("on", x, y), b.atom("clear", x), ae],
                     add=[b.atom("hold", x), b.atom("clear", y)],
                     delete=[b.atom("on", x, y), b.atom("clear", x), ae])
            b.action(f"stack({x},{y})",
                     pre=[b.atom("hold", x), b.atom("clear", y)],
                     add=[b.atom("on", x, y), b.atom("clear", x), ae],
                     delete=[b.atom("hold", x), b.atom("clear", y)])
    return b


def _tower_atoms(b, towers):
    """Atoms for towers given bottom-to-top, with an empty gripper."""
    ids = [b.atom("armempty")]
    for tower in towers:
        if not tower:
            continue
        ids.append(b.atom("ontable", tower[0]))
        for lower, upper in zip(tower, tower[1:]):
            ids.append(b.atom("on", upper, lower))
        ids.append(b.atom("clear", tower[-1]))
    return ids


def blocks_clear(params) -> GroundProblem:
    m = _require(params, "blocks_above_x")
    above = [f"b{i}" for i in range(1, m + 1)]  # b1 is the top block
    blocks = ["x"] + above
    b = _blocks_builder(blocks)
    init = _tower_atoms(b, [["x"] + above[::-1]])
    goal = [b.atom("clear", "x"), b.atom("armempty")]
    return b.problem(f"blocks_clear_{m}", init, goal, "blocks", {"x": "x"})


def blocks_on(params) -> GroundProblem:
    height = _require(params, "height", minimum=1)
    towers = _require(params, "towers", default=2, minimum=2)
    t1 = ["x"] + [f"b{i}" for i in range(height - 1, 0, -1)]
    t2 = ["y"] + [f"d{i}" for i in range(height - 1, 0, -1)]
    extra = [[f"e{j}_{i}" for i in range(1, height + 1)] for j in range(1, towers - 1)]
    all_towers = [t1, t2] + extra
    blocks = [x for t in all_towers for x in t]
    b = _blocks_builder(blocks)
    init = _tower_atoms(b, all_towers)
    goal = [b.atom("on", "x", "y")]
    return b.problem(f"blocks_on_{towers}x{height}", init, goal, "blocks", {"x": "x", "y": "y"})


def _random_towers(rng, blocks):
    order = list(blocks)
    rng.shuffle(order)
    towers, cur = [], []
    for x in order:
        cur.append(x)
        if rng.random() < 0.4:
            towers.append(cur)
            cur = []
    if cur:
        towers.append(cur)
    return towers


def blocks_random(params) -> GroundProblem:
    n = _require(params, "blocks")
    seed = _require(params, "seed", default=0, minimum=0)
    rng = random.Random(seed)
    names = [f"b{i}" for i in range(1, n + 1)]
    init_towers = _random_towers(rng, names)
    goal_towers = _random_towers(rng, names)
    b = _blocks_builder(names)
    init = _tower_atoms(b, init_towers)
    goal = []
    for tower in goal_towers:
        goal.append(b.atom("ontable", tower[0]))
        for lower, upper in zip(tower, tower[1:]):
            goal.append(b.atom("on", upper, lower))
    return b.problem(f"blocks_{n}_s{seed}", init, goal, "blocks",
                     {"goal_towers": [list(t) for t in goal_towers]})


# ---------------------------------------------------------------------- boxes

def _boxes_l1(nboxes, nmarbles):
    b = _Builder()
    boxes = [f"b{i}" for i in range(1, nboxes + 1)]
    contents = {bx: [f"m{i}_{j}" for j in range(1, nmarbles + 1)] for i, bx in enumerate(boxes, 1)}
    for bx in boxes:
        b.atom("ontable", bx)
    for bx in boxes:
        for ma in contents[bx]:
            b.atom("in", ma, bx)
    for bx in boxes:
        b.atom("removed", bx)
    for bx in boxes:
        for ma in contents[bx]:
            b.atom("out", ma)
    for bx in boxes:
        for ma in contents[bx]:
            b.action(f"remove_marble({ma},{bx})",
                     pre=[b.atom("ontable", bx), b.atom("in", ma, bx)],
                     add=[b.atom("out", ma)],
                     delete=[b.atom("in", ma, bx)])
        b.action(f"remove_box({bx})",
                 pre=[b.atom("ontable", bx)] + [b.atom("out", ma) for ma in contents[bx]],
                 add=[b.atom("removed", bx)],
                 delete=[b.atom("ontable", bx)])
    init = [b.atom("ontable", bx) for bx in boxes]
    init += [b.atom("in", ma, bx) for bx in boxes for ma in contents[bx]]
    goal = [b.atom("removed", bx) for bx in boxes]
    return b, boxes, contents, init, goal


def _boxes_counts(b, boxes, contents, s):
    on = [bx for bx in boxes if (s >> b.index[atom_name("ontable", bx)]) & 1]
    counts = [sum((s >> b.index[atom_name("in", ma, bx)]) & 1 for ma in contents[bx]) for bx in on]
    return (min(counts) if counts else 0), len(on)


def boxes(params) -> GroundProblem:
    nboxes = _require(params, "boxes")
    nmarbles = _require(params, "marbles")
    encoding = _require(params, "encoding", default=1)
    if encoding not in (1, 4):
        raise InvalidParams("encoding", "only encodings 1 and 4 are bundled")
    b, boxes_, contents, init, goal = _boxes_l1(nboxes, nmarbles)
    name = f"boxes_l{encoding}_{nboxes}x{nmarbles}"
    meta = {"contents": contents}
    if encoding == 1:
        return b.problem(name, init, goal, "boxes", meta)

    # L4: add explicit m(k)/n(k) atoms; the dynamics are re-grounded one
    # action per reachable transition because m depends on every box
    base = b.problem(name, init, goal, "boxes", meta)
    from ..model import successor_states
    l4 = _Builder()
    for a in base.universe.atoms:
        l4.atom(a)
    for k in range(nmarbles + 1):
        l4.atom("m", k)
    for k in range(nboxes + 1):
        l4.atom("n", k)

    def lift(s):
        m, n = _boxes_counts(b, boxes_, contents, s)
        return s | (1 << l4.index[atom_name("m", m)]) | (1 << l4.index[atom_name("n", n)])

    seen = {base.init}
    queue = deque([base.init])
    while queue:
        s = queue.popleft()
        ls = lift(s)
        for ai, t in successor_states(base, s):
            lt = lift(t)
            l4.action(base.actions[ai].name, pre=bits(ls), add=bits(lt & ~ls), delete=bits(ls & ~lt))
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return l4.problem(name, bits(lift(base.init)), goal, "boxes", meta)


# ------------------------------------------------------------------- grids

def _cell(x, y):
    return f"c{x}_{y}"


def _grid_cells(w, h):
    return [(x, y) for y in range(h) for x in range(w)]


def _neighbours(x, y, w, h):
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nx, ny = x + dx, y + dy
        if 0 <= nx < w and 0 <= ny < h:
            yield nx, ny


def delivery(params) -> GroundProblem:
    w = _require(params, "w")
    h = _require(params, "h")
    npk = _require(params, "packages", default=1)
    seed = _require(params, "seed", default=0, minimum=0)
    cells = _grid_cells(w, h)
    if npk + 1 > len(cells):
        raise InvalidParams("packages", "more packages than free cells")
    rng = random.Random(seed)
    chosen = rng.sample(cells, npk + 1)
    target, pkg_cells = chosen[0], chosen[1:]
    free = [c for c in cells if c not in pkg_cells]
    agent = free[rng.randrange(len(free))]
    pkgs = [f"p{i}" for i in range(1, npk + 1)]

    b = _Builder()
    for x, y in cells:
        b.atom("at", _cell(x, y))
    for p in pkgs:
        for x, y in cells:
            b.atom("atp", p, _cell(x, y))
    for p in pkgs:
        b.atom("hold", p)
    empty = b.atom("empty")
    b.atom("target", _cell(*target))
    for x, y in cells:
        for nx, ny in _neighbours(x, y, w, h):
            b.action(f"move({_cell(x, y)},{_cell(nx, ny)})",
                     pre=[b.atom("at", _cell(x, y))],
                     add=[b.atom("at", _cell(nx, ny))],
                     delete=[b.atom("at", _cell(x, y))])
    for p in pkgs:
        for x, y in cells:
            c = _cell(x, y)
            b.action(f"pick({p},{c})",
                     pre=[b.atom("at", c), b.atom("atp", p, c), empty],
                     add=[b.atom("hold", p)],
                     delete=[b.atom("atp", p, c), empty])
            b.action(f"drop({p},{c})",
                     pre=[b.atom("at", c), b.atom("hold", p)],
                     add=[b.atom("atp", p, c), empty],
                     delete=[b.atom("hold", p)])
    init = [b.atom("at", _cell(*agent)), empty, b.atom("target", _cell(*target))]
    init += [b.atom("atp", p, _cell(*c)) for p, c in zip(pkgs, pkg_cells)]
    goal = [b.atom("atp", p, _cell(*target)) for p in pkgs]
    meta = {"w": w, "h": h, "target": _cell(*target), "agent": _cell(*agent),
            "packages": {p: _cell(*c) for p, c in zip(pkgs, pkg_cells)}}
    return b.problem(f"delivery_{w}x{h}_p{npk}_s{seed}", init, goal, "delivery", meta)


def visitall(params) -> GroundProblem:
    w = _require(params, "w")
    h = _require(params, "h")
    cells = _grid_cells(w, h)
    b = _Builder()
    for x, y in cells:
        b.atom("at", _cell(x, y))
    for x, y in cells:
        b.atom("visited", _cell(x, y))
    for x, y in cells:
        for nx, ny in _neighbours(x, y, w, h):
            b.action(f"move({_cell(x, y)},{_cell(nx, ny)})",
                     pre=[b.atom("at", _cell(x, y))],
                     add=[b.atom("at", _cell(nx, ny)), b.atom("visited", _cell(nx, ny))],
                     delete=[b.atom("at", _cell(x, y))])
    start = _cell(0, 0)
    init = [b.atom("at", start), b.atom("visited", start)]
    goal = [b.atom("visited", _cell(x, y)) for x, y in cells]
    return b.problem(f"visitall_{w}x{h}", init, goal, "visitall", {"w": w, "h": h})


def grid(params) -> GroundProblem:
    w = _require(params, "w")
    h = _require(params, "h")
    sx = _require(params, "sx", default=0, minimum=0)
    sy = _require(params, "sy", default=0, minimum=0)
    tx = _require(params, "tx", default=w - 1, minimum=0)
    ty = _require(params, "ty", default=h - 1, minimum=0)
    for key, v, lim in (("sx", sx, w), ("tx", tx, w), ("sy", sy, h), ("ty", ty, h)):
        if v >= lim:
            raise InvalidParams(key, "outside the grid")
    b = _Builder()
    for i in range(w):
        b.atom("x", i)
    for j in range(h):
        b.atom("y", j)
    for i in range(w - 1):
        b.action(f"right({i})", pre=[b.atom("x", i)], add=[b.atom("x", i + 1)], delete=[b.atom("x", i)])
        b.action(f"left({i + 1})", pre=[b.atom("x", i + 1)], add=[b.atom("x", i)], delete=[b.atom("x", i + 1)])
    for j in range(h - 1):
        b.action(f"up({j})", pre=[b.atom("y", j)], add=[b.atom("y", j + 1)], delete=[b.atom("y", j)])
        b.action(f"down({j + 1})", pre=[b.atom("y", j + 1)], add=[b.atom("y", j)], delete=[b.atom("y", j + 1)])
    init = [b.atom("x", sx), b.atom("y", sy)]
    goal = [b.atom("x", tx), b.atom("y", ty)]
    return b.problem(f"grid_{w}x{h}", init, goal, "grid", {"w": w, "h": h, "target": (tx, ty)})


DOMAINS = {
    "blocks_clear": blocks_clear,
    "blocks_on": blocks_on,
    "blocks": blocks_random,
    "boxes": boxes,
    "delivery": delivery,
    "visitall": visitall,
    "grid": grid,
}


def generate(spec: DomainSpec) -> GroundProblem:
    try:
        gen = DOMAINS[spec.name]
    except KeyError:
        raise InvalidParams("name", f"unknown domain {spec.name!r}") from None
    return gen(dict(spec.params))


def _bundled():
    specs = [DomainSpec("blocks_clear", {"blocks_above_x": m}) for m in (1, 2, 3, 4)]
    specs += [DomainSpec("blocks_on", {"height": h}) for h in (1, 2, 3)]
    specs += [DomainSpec("blocks", {"blocks": n, "seed": s}) for n in (3, 4, 5) for s in (0, 1, 2)]
    specs += [DomainSpec("boxes", {"boxes": 1, "marbles": m, "encoding": e}) for e in (1, 4) for m in (2, 3, 4)]
    specs += [DomainSpec("boxes", {"boxes": b, "marbles": m, "encoding": 4}) for b, m in ((2, 1), (2, 2))]
    specs += [DomainSpec("delivery", {"w": n, "h": n, "packages": k, "seed": 0}) for n in (2, 3, 4) for k in (1, 2)]
    specs += [DomainSpec("visitall", {"w": n, "h": n}) for n in (2, 3)]
    specs += [DomainSpec("grid", {"w": n, "h": n}) for n in (2, 3, 4)]
    return tuple(specs)


# desk-scale instances used by the test and acceptance suites
BUNDLED = _bundled()
