"""Run reports: one versioned document per command, rendered as JSON or text."""
from __future__ import annotations

import json

SCHEMA = "widthplan.report/1"


def make_report(command: list[str], instance: dict | None, results: dict) -> dict:
    return {"schema": SCHEMA, "command": list(command), "instance": instance, "results": results}


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=str) + "\n"


def to_text(report: dict) -> str:
    lines = [f"# {' '.join(report['command'])}"]
    if report.get("instance"):
        inst = report["instance"]
        lines.append(f"instance: {inst.get('name')} ({inst.get('atoms')} atoms, {inst.get('actions')} actions)")
    _lines(report["results"], 0, lines)
    return "\n".join(lines) + "\n"


def _lines(obj, depth, out):
    pad = "  " * depth
    for k, v in obj.items():
        if isinstance(v, dict):
            out.append(f"{pad}{k}:")
            _lines(v, depth + 1, out)
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            out.append(f"{pad}{k}:")
            for i, item in enumerate(v):
                out.append(f"{pad}  [{i}]")
                _lines(item, depth + 2, out)
        elif isinstance(v, list):
            out.append(f"{pad}{k}: {' '.join(map(str, v))}")
        else:
            out.append(f"{pad}{k}: {v}")


def strip_timing(obj):
    """Copy without wall-clock fields, for golden comparisons."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj
