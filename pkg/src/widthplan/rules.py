"""Rule language shared by general policies and policy sketches.

Grammar (``//`` starts a comment)::

    rules NAME [policy|sketch] {
      features { H: bool; n: num; }
      rule r1: -H, n>0 -> H, dec(n);
      rule r2: H, n>0 -> -H;
    }

Conditions are ``f``, ``-f`` (boolean) and ``f=0``, ``f>0`` (numerical);
``true`` stands for the empty condition list.  Effects are ``f``, ``-f``,
``?f``, ``dec(f)``, ``inc(f)``; ``?f`` on a numerical feature is the
unknown numerical change.  ``dec(n)`` carries the condition ``n>0``
implicitly; it is added at parse time.  ``?n`` adds no condition: the
bundled Delivery policy applies ``?t`` at t=0 and ``?p`` at p=0, and the
Boxes policy pairs ``?m`` with ``m=0``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import KindError, ParseError, UnknownFeature

BOOL_TESTS = ("true", "false")
NUM_TESTS = ("gt0", "eq0")
BOOL_CHANGES = ("set", "clear", "unknown_bool")
NUM_CHANGES = ("dec", "inc", "unknown_num")


@dataclass(frozen=True)
class Condition:
    feature: str
    test: str


@dataclass(frozen=True)
class Effect:
    feature: str
    change: str


@dataclass(frozen=True)
class FeatureDecl:
    name: str
    kind: str  # "bool" | "num"


@dataclass(frozen=True)
class Rule:
    id: str
    conditions: tuple  # of Condition, in feature declaration order
    effects: tuple  # of Effect, in feature declaration order

    def condition(self, feature):
        for c in self.conditions:
            if c.feature == feature:
                return c.test
        return None

    def effect(self, feature):
        for e in self.effects:
            if e.feature == feature:
                return e.change
        return None


@dataclass(frozen=True)
class RuleSet:
    name: str
    features: tuple  # of FeatureDecl
    rules: tuple  # of Rule
    intended_use: str | None = None  # "policy" | "sketch"; annotation only

    @property
    def feature_names(self) -> tuple:
        return tuple(f.name for f in self.features)

    def kind_of(self, name) -> str:
        for f in self.features:
            if f.name == name:
                return f.kind
        raise UnknownFeature(name)

    def union(self, other: "RuleSet", name: str | None = None) -> "RuleSet":
        """Rules of both sets; features merged in first-seen order."""
        feats = list(self.features)
        for f in other.features:
            known = [g for g in feats if g.name == f.name]
            if known and known[0].kind != f.kind:
                raise KindError(f"feature {f.name} declared with two kinds")
            if not known:
                feats.append(f)
        return RuleSet(name or f"{self.name}+{other.name}", tuple(feats),
                       self.rules + other.rules, self.intended_use or other.intended_use)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<arrow>->)
  | (?P<cmp>[=>]0)
  | (?P<name>[A-Za-z_#][\w#]*)
  | (?P<punct>[{}();:,\-?])
  | (?P<bad>.)
""", re.VERBOSE)


class _Lexer:
    def __init__(self, text):
        self.toks = []
        line, line_start = 1, 0
        for m in _TOKEN.finditer(text):
            kind = m.lastgroup
            col = m.start() - line_start + 1
            if kind == "bad":
                raise ParseError(f"unexpected character {m.group()!r}", line, col)
            if kind != "ws":
                self.toks.append((kind, m.group(), line, col))
            nl = m.group().count("\n")
            if nl:
                line += nl
                line_start = m.start() + m.group().rindex("\n") + 1
        self.toks.append(("eof", "", line, len(text) - line_start + 1))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value=None, kind=None):
        tok = self.next()
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2], tok[3])
        return tok

    def accept(self, value):
        if self.peek()[1] == value:
            return self.next()
        return None


def parse_rules(text: str) -> RuleSet:
    lx = _Lexer(text)
    lx.expect("rules")
    name = lx.expect(kind="name")[1]
    use = None
    if lx.peek()[1] in ("policy", "sketch"):
        use = lx.next()[1]
    lx.expect("{")
    features = []
    kinds = {}
    if lx.accept("features"):
        lx.expect("{")
        while not lx.accept("}"):
            tok = lx.expect(kind="name")
            lx.expect(":")
            kind_tok = lx.expect(kind="name")
            if kind_tok[1] not in ("bool", "num"):
                raise ParseError("feature kind must be 'bool' or 'num'", kind_tok[2], kind_tok[3])
            if tok[1] in kinds:
                raise ParseError(f"feature {tok[1]!r} declared twice", tok[2], tok[3])
            kinds[tok[1]] = kind_tok[1]
            features.append(FeatureDecl(tok[1], kind_tok[1]))
            lx.expect(";")
    order = {f.name: i for i, f in enumerate(features)}
    rules = []
    ids = set()
    while not lx.accept("}"):
        lx.expect("rule")
        rid_tok = lx.expect(kind="name")
        if rid_tok[1] in ids:
            raise ParseError(f"rule id {rid_tok[1]!r} used twice", rid_tok[2], rid_tok[3])
        ids.add(rid_tok[1])
        lx.expect(":")
        conds = _parse_conditions(lx, kinds)
        lx.expect(kind="arrow")
        effs = _parse_effects(lx, kinds)
        lx.expect(";")
        rules.append(_make_rule(rid_tok, conds, effs, order))
    lx.expect(kind="eof")
    return RuleSet(name, tuple(features), tuple(rules), use)


def _feature(lx, kinds, tok):
    if tok[0] != "name":
        raise ParseError(f"expected a feature name, found {tok[1]!r}", tok[2], tok[3])
    if tok[1] not in kinds:
        raise UnknownFeature(f"{tok[2]}:{tok[3]}: undeclared feature {tok[1]!r}")
    return tok[1], kinds[tok[1]]


def _parse_conditions(lx, kinds):
    if lx.peek()[1] == "true":
        lx.next()
        return []
    out = []
    while True:
        neg = lx.accept("-")
        tok = lx.next()
        name, kind = _feature(lx, kinds, tok)
        if lx.peek()[0] == "cmp":
            cmp = lx.next()
            if neg or kind != "num":
                raise KindError(f"{cmp[2]}:{cmp[3]}: '{cmp[1]}' needs a numerical feature, {name} is {kind}")
            test = "eq0" if cmp[1] == "=0" else "gt0"
        else:
            if kind != "bool":
                raise KindError(f"{tok[2]}:{tok[3]}: numerical feature {name} needs '=0' or '>0'")
            test = "false" if neg else "true"
        out.append((tok, Condition(name, test)))
        if not lx.accept(","):
            return out


def _parse_effects(lx, kinds):
    out = []
    while True:
        tok = lx.peek()
        if tok[1] in ("dec", "inc") and lx.toks[lx.i + 1][1] == "(":
            lx.next()
            lx.expect("(")
            ftok = lx.next()
            name, kind = _feature(lx, kinds, ftok)
            lx.expect(")")
            if kind != "num":
                raise KindError(f"{tok[2]}:{tok[3]}: {tok[1]}() needs a numerical feature, {name} is bool")
            out.append((ftok, Effect(name, tok[1])))
        elif lx.accept("?"):
            ftok = lx.next()
            name, kind = _feature(lx, kinds, ftok)
            out.append((ftok, Effect(name, "unknown_bool" if kind == "bool" else "unknown_num")))
        else:
            neg = lx.accept("-")
            ftok = lx.next()
            name, kind = _feature(lx, kinds, ftok)
            if kind != "bool":
                raise KindError(f"{ftok[2]}:{ftok[3]}: numerical feature {name} needs dec(), inc() or ?")
            out.append((ftok, Effect(name, "clear" if neg else "set")))
        if not lx.accept(","):
            return out


def _make_rule(rid_tok, conds, effs, order):
    cmap = {}
    for tok, c in conds:
        if c.feature in cmap:
            raise ParseError(f"two conditions on {c.feature!r}", tok[2], tok[3])
        cmap[c.feature] = c
    emap = {}
    for tok, e in effs:
        if e.feature in emap:
            raise ParseError(f"two effects on {e.feature!r}", tok[2], tok[3])
        emap[e.feature] = e
        if e.change == "dec":
            have = cmap.get(e.feature)
            if have is not None and have.test != "gt0":
                raise ParseError(f"dec({e.feature}) cannot apply when {e.feature}=0", tok[2], tok[3])
            cmap[e.feature] = Condition(e.feature, "gt0")
    key = lambda x: order[x.feature]
    return Rule(rid_tok[1], tuple(sorted(cmap.values(), key=key)), tuple(sorted(emap.values(), key=key)))


# ---------------------------------------------------------------- emitting

def condition_text(c: Condition) -> str:
    return {"true": c.feature, "false": f"-{c.feature}",
            "gt0": f"{c.feature}>0", "eq0": f"{c.feature}=0"}[c.test]


def effect_text(e: Effect) -> str:
    return {"set": e.feature, "clear": f"-{e.feature}", "unknown_bool": f"?{e.feature}",
            "unknown_num": f"?{e.feature}", "dec": f"dec({e.feature})",
            "inc": f"inc({e.feature})"}[e.change]


def rule_text(r: Rule) -> str:
    conds = ", ".join(condition_text(c) for c in r.conditions) or "true"
    effs = ", ".join(effect_text(e) for e in r.effects)
    return f"{conds} -> {effs}"


def emit_rules(rs: RuleSet) -> str:
    head = f"rules {rs.name}" + (f" {rs.intended_use}" if rs.intended_use else "") + " {"
    lines = [head]
    feats = " ".join(f"{f.name}: {f.kind};" for f in rs.features)
    lines.append(f"  features {{ {feats} }}" if feats else "  features { }")
    for r in rs.rules:
        lines.append(f"  rule {r.id}: {rule_text(r)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- semantics

@dataclass(frozen=True)
class CompiledRule:
    """A rule over valuation tuples aligned with a feature list."""

    id: str
    conds: tuple  # (index, test)
    effects: tuple  # (index, change)
    frame: tuple  # indices not mentioned in the effects
    rule: Rule = field(compare=False)

    def applicable(self, f) -> bool:
        for i, test in self.conds:
            v = f[i]
            if test == "true" or test == "gt0":
                if not v:
                    return False
            elif v:
                return False
        return True

    def effects_ok(self, f, g) -> bool:
        for i, ch in self.effects:
            if ch == "set":
                if not g[i]:
                    return False
            elif ch == "clear":
                if g[i]:
                    return False
            elif ch == "dec":
                if not g[i] < f[i]:
                    return False
            elif ch == "inc":
                if not g[i] > f[i]:
                    return False
        for i in self.frame:
            if f[i] != g[i]:
                return False
        return True

    def compatible(self, f, g) -> bool:
        return self.applicable(f) and self.effects_ok(f, g)


def compile_rules(rs: RuleSet, feature_names=None) -> list[CompiledRule]:
    names = list(feature_names) if feature_names is not None else list(rs.feature_names)
    pos = {n: i for i, n in enumerate(names)}
    out = []
    for r in rs.rules:
        try:
            conds = tuple((pos[c.feature], c.test) for c in r.conditions)
            effs = tuple((pos[e.feature], e.change) for e in r.effects)
        except KeyError as e:
            raise UnknownFeature(str(e)) from None
        mentioned = {i for i, _ in effs}
        frame = tuple(i for i in range(len(names)) if i not in mentioned)
        out.append(CompiledRule(r.id, conds, effs, frame, r))
    return out


def pair_compatible(rule: CompiledRule, f, g) -> bool:
    """True iff ``f`` satisfies the rule's conditions and ``f -> g`` its effects."""
    return rule.compatible(f, g)
