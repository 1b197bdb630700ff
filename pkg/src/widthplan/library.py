"""Bundled rule sets: the Delivery sketches sigma0..sigma8 and the policies
for Q_clear, Boxes, Delivery and grid navigation."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .rules import RuleSet, parse_rules

SKETCHES = tuple(f"sigma{i}" for i in range(9))
POLICIES = ("qclear", "boxes", "delivery", "grid")


def bundled_names() -> list[str]:
    return sorted(p.name[:-6] for p in resources.files(__package__).joinpath("rulesets").iterdir()
                  if p.name.endswith(".rules"))


def bundled_text(name: str) -> str:
    name = name[:-6] if name.endswith(".rules") else name
    path = resources.files(__package__).joinpath("rulesets").joinpath(f"{name}.rules")
    if not path.is_file():
        raise FileNotFoundError(f"no bundled rule set {name!r}")
    return path.read_text(encoding="utf-8")


def load_rules(name_or_path: str) -> RuleSet:
    """Parse a rule file; a bare bundled name (``sigma3`` or ``sigma3.rules``)
    works when no such file exists on disk."""
    p = Path(name_or_path)
    if p.is_file():
        return parse_rules(p.read_text(encoding="utf-8"))
    return parse_rules(bundled_text(p.name))
