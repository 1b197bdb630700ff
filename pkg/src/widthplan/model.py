"""Grounded state model: atoms, states, actions, problems and features.

States are Python ints used as bitsets over atom ids, so membership is a
mask test and two states are equal iff the ints are equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import EvaluatorUnbound

State = int
FeatureValuation = tuple  # tuple of ints aligned with a feature list


def bits(mask: int) -> list[int]:
    """Ids of the set bits of ``mask`` in increasing order."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def mask_of(ids: Iterable[int]) -> int:
    m = 0
    for i in ids:
        m |= 1 << i
    return m


def atom_name(pred: str, *objs) -> str:
    """Canonical spelling ``pred(o1,o2)``; 0-ary atoms are just ``pred``."""
    if not objs:
        return pred
    return f"{pred}({','.join(str(o) for o in objs)})"


def split_atom(name: str) -> tuple[str, tuple[str, ...]]:
    if "(" not in name:
        return name, ()
    pred, rest = name.split("(", 1)
    inner = rest[:-1]
    return pred, tuple(inner.split(",")) if inner else ()


class AtomUniverse:
    """Ordered atom names with a dense name -> id index."""

    __slots__ = ("atoms", "index")

    def __init__(self, atoms: Sequence[str]):
        self.atoms = tuple(atoms)
        self.index = {a: i for i, a in enumerate(self.atoms)}
        if len(self.index) != len(self.atoms):
            seen = set()
            dup = next(a for a in self.atoms if a in seen or seen.add(a))
            raise ValueError(f"duplicate atom {dup!r}")

    def __len__(self):
        return len(self.atoms)

    def __eq__(self, other):
        return isinstance(other, AtomUniverse) and self.atoms == other.atoms

    def __hash__(self):
        return hash(self.atoms)

    def __repr__(self):
        return f"AtomUniverse({len(self.atoms)} atoms)"

    def id(self, name: str) -> int:
        return self.index[name]

    def state(self, names: Iterable[str]) -> State:
        return mask_of(self.index[n] for n in names)

    def names(self, s: State) -> list[str]:
        return [self.atoms[i] for i in bits(s)]


@dataclass(frozen=True)
class GroundAction:
    name: str
    pre: frozenset
    add: frozenset
    delete: frozenset
    pre_mask: int = field(init=False, repr=False, compare=False)
    add_mask: int = field(init=False, repr=False, compare=False)
    keep_mask: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for attr in ("pre", "add", "delete"):
            object.__setattr__(self, attr, frozenset(getattr(self, attr)))
        if self.add & self.delete:
            raise ValueError(f"action {self.name}: add and del overlap")
        object.__setattr__(self, "pre_mask", mask_of(self.pre))
        object.__setattr__(self, "add_mask", mask_of(self.add))
        object.__setattr__(self, "keep_mask", ~mask_of(self.delete))

    def applicable(self, s: State) -> bool:
        return s & self.pre_mask == self.pre_mask

    def apply(self, s: State) -> State:
        return (s & self.keep_mask) | self.add_mask


@dataclass(frozen=True, eq=False)
class GroundProblem:
    """Immutable grounded instance.  ``meta`` holds generator facts used by
    builtin feature hooks (e.g. which block is ``x``)."""

    name: str
    universe: AtomUniverse
    init: State
    goal: frozenset
    actions: tuple
    domain: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "goal", frozenset(self.goal))
        object.__setattr__(self, "actions", tuple(self.actions))
        n = len(self.universe)
        for g in self.goal:
            if not 0 <= g < n:
                raise ValueError(f"goal atom id {g} outside universe")
        touched = 0
        for a in self.actions:
            for i in a.pre | a.add | a.delete:
                if not 0 <= i < n:
                    raise ValueError(f"action {a.name} uses atom id {i} outside universe")
            touched |= a.add_mask | mask_of(a.delete)
        object.__setattr__(self, "goal_mask", mask_of(self.goal))
        object.__setattr__(self, "_touched", touched)
        object.__setattr__(self, "_buckets", _bucket_actions(self.actions))

    def __eq__(self, other):
        if not isinstance(other, GroundProblem):
            return NotImplemented
        return (self.name == other.name and self.universe == other.universe
                and self.init == other.init and self.goal == other.goal
                and self.actions == other.actions and self.domain == other.domain)

    __hash__ = object.__hash__

    @property
    def num_atoms(self) -> int:
        return len(self.universe)

    @property
    def static_atoms(self) -> frozenset:
        return frozenset(i for i in range(len(self.universe)) if not (self._touched >> i) & 1)

    @property
    def static_mask(self) -> int:
        full = (1 << len(self.universe)) - 1
        return full & ~self._touched

    def with_init(self, s: State) -> "GroundProblem":
        return GroundProblem(self.name, self.universe, s, self.goal, self.actions,
                             self.domain, self.meta)


def _bucket_actions(actions):
    # index each action under one precondition atom; actions with empty pre
    # are always candidates
    always = []
    buckets: dict[int, list] = {}
    for idx, a in enumerate(actions):
        if a.pre:
            buckets.setdefault(min(a.pre), []).append((idx, a))
        else:
            always.append((idx, a))
    return always, buckets


def successors(problem: GroundProblem, s: State) -> list[tuple[GroundAction, State]]:
    """Applicable actions paired with successor states, in action-id order."""
    always, buckets = problem._buckets
    cands = list(always)
    m = s
    while m:
        low = m & -m
        b = buckets.get(low.bit_length() - 1)
        if b:
            cands.extend(b)
        m ^= low
    cands.sort(key=lambda t: t[0])
    return [(a, (s & a.keep_mask) | a.add_mask) for _, a in cands if s & a.pre_mask == a.pre_mask]


def successor_states(problem: GroundProblem, s: State) -> list[tuple[int, State]]:
    """Like :func:`successors` but with action indices; the hot path of searches."""
    always, buckets = problem._buckets
    cands = list(always)
    m = s
    while m:
        low = m & -m
        b = buckets.get(low.bit_length() - 1)
        if b:
            cands.extend(b)
        m ^= low
    cands.sort(key=lambda t: t[0])
    return [(i, (s & a.keep_mask) | a.add_mask) for i, a in cands if s & a.pre_mask == a.pre_mask]


def is_goal(problem: GroundProblem, s: State) -> bool:
    return s & problem.goal_mask == problem.goal_mask


def apply_plan(problem: GroundProblem, plan: Sequence[GroundAction], s: State | None = None) -> State:
    s = problem.init if s is None else s
    for a in plan:
        if not a.applicable(s):
            raise ValueError(f"action {a.name} not applicable")
        s = a.apply(s)
    return s


@dataclass(frozen=True)
class Feature:
    """Boolean or numerical state function; numerical values lie in [0, N]."""

    name: str
    kind: str  # "bool" | "num"
    evaluator: Callable[[State], int] | None = field(compare=False, default=None)

    def __post_init__(self):
        if self.kind not in ("bool", "num"):
            raise ValueError(f"feature kind must be bool or num, got {self.kind!r}")

    @property
    def is_bool(self) -> bool:
        return self.kind == "bool"

    def __call__(self, s: State) -> int:
        if self.evaluator is None:
            raise EvaluatorUnbound(f"feature {self.name!r} has no evaluator")
        return int(self.evaluator(s))


def evaluate(features: Sequence[Feature], s: State) -> FeatureValuation:
    return tuple(f(s) for f in features)


# the module-level name the rest of the package and the docs use
eval_features = evaluate


def boolean_valuation(features: Sequence[Feature], values: FeatureValuation) -> tuple:
    """Project a valuation onto booleans: each entry is the truth of ``p`` for
    boolean features and the truth of ``n > 0`` for numerical ones."""
    return tuple(1 if v else 0 for v in values)
