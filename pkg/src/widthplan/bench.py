"""Sketch-width sweep over Delivery instances for the bundled sketches
sigma0..sigma8, side by side with the published upper bounds."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .domains import DomainSpec, generate, resolve_features
from .graph import goal_nodes_where
from .library import SKETCHES, load_rules
from .oracle import StateSpace
from .serialization import check_sketch, sketch_width
from .width import NotWithin

UNB = "unb"
ILL = "ill-formed"

# published bounds per sketch: (one package, any number of packages)
PUBLISHED = {
    "sigma0": (2, UNB), "sigma1": (2, UNB), "sigma2": (1, UNB), "sigma3": (ILL, ILL),
    "sigma4": (2, 2), "sigma5": (1, 1), "sigma6": (2, UNB), "sigma7": (2, UNB), "sigma8": (0, 0),
}
CLASSES = ("D1", "D")


@dataclass
class Cell:
    value: object  # int, ">k" or ILL
    per_instance: dict = field(default_factory=dict)  # descriptor -> str(width)

    def __str__(self):
        return str(self.value)


@dataclass
class BenchRow:
    sketch: str
    cells: dict  # class -> Cell
    published: tuple

    def matches(self) -> bool:
        for cls, pub in zip(CLASSES, self.published):
            got = self.cells[cls].value
            if pub == ILL:
                if got != ILL:
                    return False
            elif pub == UNB:
                if not (isinstance(got, str) and got.startswith(">")) and not _grows(self.cells[cls]):
                    return False
            elif got != pub:
                return False
        return True


def _grows(cell: Cell) -> bool:
    vals = [v for v in cell.per_instance.values()]
    nums = [int(v) for v in vals if v.isdigit()]
    return len(nums) >= 2 and nums[-1] > nums[0]


def delivery_instances(sizes=(2, 3, 4), packages=(1, 2), seeds=(0,)):
    """(class, problem) pairs: one package is class D1, more is D; a
    one-package instance also belongs to D."""
    out = []
    for n in sizes:
        for k in packages:
            for seed in seeds:
                p = generate(DomainSpec("delivery", {"w": n, "h": n, "packages": k, "seed": seed}))
                out.append(("D1" if k == 1 else "D", p))
    return out


def bench_table1(sizes=(2, 3, 4), packages=(1, 2), seeds=(0,), k_cap: int = 2, sketches=SKETCHES):
    """Measured max sketch width per sketch and class."""
    t0 = time.perf_counter()
    instances = delivery_instances(sizes, packages, seeds)
    spaces = {id(p): StateSpace(p) for _, p in instances}
    feats = {id(p): resolve_features(p, ["H", "p", "t", "n"]) for _, p in instances}
    rows = []
    for name in sketches:
        rs = load_rules(name)
        well_formed = check_sketch(rs, goal_nodes_where(rs, {"n": 0})).verdict
        cells = {}
        for cls in CLASSES:
            members = [p for c, p in instances if c == cls or (cls == "D" and c == "D1")]
            if not well_formed:
                cells[cls] = Cell(ILL)
                continue
            best, per = 0, {}
            for p in members:
                r = sketch_width(p, rs, feats[id(p)], k_cap, space=spaces[id(p)])
                per[p.name] = str(r.width)
                if isinstance(r.width, NotWithin):
                    best = f">{k_cap}"
                elif not isinstance(best, str):
                    best = max(best, r.width)
            cells[cls] = Cell(best, per)
        rows.append(BenchRow(name, cells, PUBLISHED.get(name, ("?", "?"))))
    return rows, time.perf_counter() - t0


def format_table(rows) -> str:
    head = f"{'sketch':<8} {'Q_D1':>10} {'published':>10} {'Q_D':>10} {'published':>10}  match"
    lines = [head, "-" * len(head)]
    for r in rows:
        d1, d = r.cells["D1"], r.cells["D"]
        lines.append(f"{r.sketch:<8} {str(d1):>10} {str(r.published[0]):>10} "
                     f"{str(d):>10} {str(r.published[1]):>10}  {'yes' if r.matches() else 'NO'}")
    return "\n".join(lines)
