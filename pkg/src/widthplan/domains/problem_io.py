"""Line-oriented grounded problem format.

::

    # comment
    problem blocks_clear_2
    domain blocks
    atoms: clear(x) on(b1,x) ...
    init: on(b1,x) ...
    goal: clear(x) armempty
    action unstack(b1,x) pre: on(b1,x) clear(b1) armempty add: hold(b1) clear(x) del: ...

The ``domain`` line is optional; it lets builtin feature hooks bind.
"""
from __future__ import annotations

import re

from ..errors import ParseError, SemanticError
from ..model import AtomUniverse, GroundAction, GroundProblem

_SECTIONS = ("pre:", "add:", "del:")
# '#' opens a comment only at the start of a token
_COMMENT = re.compile(r"(?:^|(?<=\s))#")


def _tokens(line: str, lineno: int):
    """Whitespace tokens with their 1-based column."""
    col = 0
    out = []
    for part in line.split():
        col = line.index(part, col)
        out.append((part, col + 1))
        col += len(part)
    return out


def parse_problem(text: str) -> GroundProblem:
    name = None
    domain = None
    atoms = None
    init = goal = None
    actions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _COMMENT.split(raw, 1)[0]
        if not line.strip():
            continue
        toks = _tokens(line, lineno)
        head, col = toks[0]
        if head == "problem":
            if len(toks) != 2:
                raise ParseError("expected 'problem <name>'", lineno, col)
            if name is not None:
                raise ParseError("duplicate problem line", lineno, col)
            name = toks[1][0]
        elif head == "domain":
            if len(toks) != 2:
                raise ParseError("expected 'domain <name>'", lineno, col)
            domain = toks[1][0]
        elif head in ("atoms:", "init:", "goal:"):
            values = [t for t, _ in toks[1:]]
            if head == "atoms:":
                if atoms is not None:
                    raise ParseError("duplicate atoms section", lineno, col)
                try:
                    atoms = AtomUniverse(values)
                except ValueError as e:
                    raise ParseError(str(e), lineno, col) from None
            else:
                if atoms is None:
                    raise ParseError(f"'{head}' before 'atoms:'", lineno, col)
                ids = _resolve(atoms, toks[1:], lineno, head[:-1])
                if head == "init:":
                    init = ids
                else:
                    goal = ids
        elif head == "action":
            if atoms is None:
                raise ParseError("action before 'atoms:'", lineno, col)
            actions.append(_parse_action(atoms, toks, lineno))
        else:
            raise ParseError(f"unexpected token {head!r}", lineno, col)
    if name is None:
        raise ParseError("missing 'problem <name>' line", 1, 1)
    if atoms is None or init is None or goal is None:
        raise ParseError("file needs atoms:, init: and goal: sections", 1, 1)
    s0 = 0
    for i in init:
        s0 |= 1 << i
    return GroundProblem(name, atoms, s0, frozenset(goal), tuple(actions), domain)


def _resolve(atoms: AtomUniverse, toks, lineno, where):
    ids = []
    for tok, col in toks:
        if tok not in atoms.index:
            raise SemanticError(f"line {lineno}, column {col}: {where} atom {tok!r} not declared")
        ids.append(atoms.index[tok])
    return ids


def _parse_action(atoms, toks, lineno):
    if len(toks) < 2:
        raise ParseError("expected action name", lineno, toks[0][1])
    name = toks[1][0]
    parts = {k: [] for k in _SECTIONS}
    current = None
    seen = set()
    for tok, col in toks[2:]:
        if tok in _SECTIONS:
            if tok in seen:
                raise ParseError(f"duplicate {tok}", lineno, col)
            seen.add(tok)
            current = tok
            continue
        if current is None:
            raise ParseError("expected 'pre:', 'add:' or 'del:'", lineno, col)
        parts[current].append((tok, col))
    pre = _resolve(atoms, parts["pre:"], lineno, "pre")
    add = _resolve(atoms, parts["add:"], lineno, "add")
    dele = _resolve(atoms, parts["del:"], lineno, "del")
    try:
        return GroundAction(name, frozenset(pre), frozenset(add), frozenset(dele))
    except ValueError as e:
        raise SemanticError(f"line {lineno}: {e}") from None


def emit_problem(problem: GroundProblem) -> str:
    """Canonical text: atoms in universe order, sets sorted by atom id."""
    names = problem.universe.atoms

    def seq(ids):
        return " ".join(names[i] for i in sorted(ids))

    lines = [f"problem {problem.name}"]
    if problem.domain:
        lines.append(f"domain {problem.domain}")
    lines.append("atoms: " + " ".join(names))
    lines.append("init: " + " ".join(problem.universe.names(problem.init)))
    lines.append("goal: " + seq(problem.goal))
    for a in problem.actions:
        lines.append(f"action {a.name} pre: {seq(a.pre)} add: {seq(a.add)} del: {seq(a.delete)}")
    return "\n".join(line.rstrip() for line in lines) + "\n"
