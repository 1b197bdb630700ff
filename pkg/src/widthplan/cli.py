"""Command-line interface: solve, measure widths, verify policies, sketches,
chains and policy graphs, and run the sketch-width benchmark.

Exit codes: 0 success or verdict true, 1 verdict false or unsolved,
2 usage, parse or capacity errors.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .domains import DomainSpec, generate, parse_problem, resolve_features
from .errors import EpisodeFailed, IllFormedSketch, NotASolution, Unsolvable, WidthPlanError
from .graph import (build_policy_graph, check_goal_connected, check_regular, goal_nodes_where,
                    sieve_terminates, to_dot)
from .library import load_rules
from .oracle import DEFAULT_STATE_CAP, StateSpace
from .policy import (PolicyRun, check_closed, check_goal_separation, check_markovian,
                     check_policy_optimal, check_sound, make_context)
from .report import make_report, to_json, to_text
from .search import bfs, iw, iw_k, iw_phi
from .serialization import PrecedenceOracle, serialized_width, siw_phi, siw_r, sketch_width
from .width import Chain, check_admissible, check_feasible, effective_width, exact_width


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- argument helpers

def split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    last = "".join(cur).strip()
    if last:
        out.append(last)
    return [x for x in out if x]


def parse_params(text: str | None) -> dict:
    params = {}
    for item in split_top(text or ""):
        if "=" not in item:
            raise UsageError(f"bad parameter {item!r}, expected key=value")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = int(v)
        except ValueError:
            raise UsageError(f"parameter {k.strip()} must be an integer") from None
    return params


def parse_condition(text: str) -> dict:
    """``n=0,-H`` -> {"n": 0, "H": 0}."""
    cond = {}
    for item in split_top(text):
        if item.endswith("=0"):
            cond[item[:-2]] = 0
        elif item.endswith(">0"):
            cond[item[:-2]] = 1
        elif item.startswith("-"):
            cond[item[1:]] = 0
        else:
            cond[item] = 1
    return cond


def parse_nodes(text: str) -> list[tuple]:
    """Bitstrings separated by commas, e.g. ``0101,0111``."""
    nodes = []
    for item in split_top(text):
        if not set(item) <= {"0", "1"}:
            raise UsageError(f"bad node {item!r}, expected a bitstring")
        nodes.append(tuple(int(c) for c in item))
    return nodes


def load_problem(args):
    if args.file and args.domain:
        raise UsageError("give either --domain or --file, not both")
    if args.file:
        return parse_problem(Path(args.file).read_text(encoding="utf-8")), {"file": args.file}
    if not args.domain:
        raise UsageError("an instance is required: --domain NAME [--params k=v,...] or --file PATH")
    params = parse_params(args.params)
    if args.seed is not None and args.domain in ("blocks", "delivery"):
        params.setdefault("seed", args.seed)
    spec = DomainSpec(args.domain, params)
    return generate(spec), {"domain": args.domain, "params": params}


def instance_info(problem, extra) -> dict:
    return {"name": problem.name, "atoms": problem.num_atoms, "actions": len(problem.actions), **extra}


def feature_specs(args, default=None) -> list[str]:
    if args.features:
        return split_top(args.features)
    if default is None:
        raise UsageError("--features is required")
    return list(default)


def rules_arg(args, required=True):
    src = args.rules or (args.file if args.command == "check" and args.what in ("sketch", "graph") else None)
    if not src:
        if required:
            raise UsageError("--rules NAME|PATH is required")
        return None
    return load_rules(src)


def definitions(args) -> dict:
    """``--features`` entries of the form name=def override builtin hooks."""
    out = {}
    if args.features:
        for item in split_top(args.features):
            if "=" in item:
                k, v = item.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def build_order(args, problem, features, specs):
    spec = args.order or "goal_counter"
    if spec == "goal_counter":
        return PrecedenceOracle.goal_counter(0)
    if spec.startswith("lex:"):
        names = [f.name for f in features]
        wanted = split_top(spec[4:])
        try:
            pos = [names.index(w) for w in wanted]
        except ValueError as e:
            raise UsageError(f"--order names a feature not in --features: {e}") from None
        return PrecedenceOracle.lex(pos, wanted)
    if spec in ("closure", "direct"):
        rs = rules_arg(args)
        ctx = make_context(problem, rs, definitions(args))
        goals = goal_nodes(args, rs, [problem])
        if spec == "direct":
            return PrecedenceOracle.rule_direct(rs, goals)
        space = StateSpace(problem, cap=args.state_cap)
        return PrecedenceOracle.rule_closure(rs, {ctx.val(s) for s in space.states}, goals)
    raise UsageError(f"unknown order {spec!r}")


def goal_nodes(args, rs, problems):
    if args.goal:
        return goal_nodes_where(rs, parse_condition(args.goal))
    if problems:
        defs = definitions(args)
        sep = check_goal_separation(problems, lambda p: make_context(p, rs, defs).features, args.state_cap)
        if not sep.ok:
            raise UsageError("the features do not separate goals; declare goal valuations with --goal")
        return sorted(sep.kappa)
    return []


# ---------------------------------------------------------------- commands

def cmd_solve(args):
    problem, extra = load_problem(args)
    algo = args.algo or "iw"
    t0 = time.perf_counter()
    res = {"algo": algo}
    if algo in ("bfs", "iw", "iw_k", "iw_phi"):
        if algo == "bfs":
            r = bfs(problem)
        elif algo == "iw":
            k, r = iw(problem, k_max=args.k_cap)
            res["k_star"] = k
        elif algo == "iw_k":
            r = iw_k(problem, args.k or args.k_cap or 1)
        else:
            feats = resolve_features(problem, feature_specs(args))
            r = iw_phi(problem, feats)
        solved = r is not None and r.solved
        res.update(status=r.status if r else "pruned_out", plan=r.plan_names() if solved else [],
                   plan_length=len(r.plan) if solved else None, expanded=r.expanded if r else 0,
                   generated=r.generated if r else 0, observed_b=r.observed_b if r else 0)
    else:
        if algo == "siw_phi":
            specs = feature_specs(args, ["#g"])
            feats = resolve_features(problem, specs)
            order = build_order(args, problem, feats, specs)
            r = siw_phi(problem, feats, order, k_cap=args.k_cap or 2)
        elif algo == "siw_r":
            rs = rules_arg(args)
            ctx = make_context(problem, rs, definitions(args))
            goals = goal_nodes(args, rs, []) if args.goal else ()
            r = siw_r(problem, rs, ctx.features, k_cap=args.k_cap or 2, goal_nodes=goals)
        else:
            raise UsageError(f"unknown algorithm {algo!r}")
        solved = True
        res.update(status="solved", plan=r.plan_names(), plan_length=len(r.plan), max_k=r.max_k,
                   episodes=[{"k": e.k, "length": e.length, "expanded": e.expanded,
                              "generated": e.generated, "goal": e.goal, "witness": e.witness}
                             for e in r.episodes])
    if args.check_optimal and solved:
        space = StateSpace(problem, cap=args.state_cap)
        res["optimal_cost"] = space.optimal_cost
        res["optimal"] = res["plan_length"] == space.optimal_cost
    res["seconds"] = round(time.perf_counter() - t0, 4)
    return (0 if solved else 1), instance_info(problem, extra), res


def cmd_width(args):
    problem, extra = load_problem(args)
    k_max = args.k_cap or 2
    t0 = time.perf_counter()
    space = StateSpace(problem, cap=args.state_cap)
    w = exact_width(problem, k_max, space=space)
    k_star, _ = iw(problem, k_max=k_max) if space.optimal_cost is not None else (None, None)
    res = {"states": len(space), "optimal_cost": space.optimal_cost, "exact_width": str(w),
           "iw_k_star": k_star, "effective_width": str(effective_width(problem, k_max, space=space)),
           "seconds": round(time.perf_counter() - t0, 4)}
    return 0, instance_info(problem, extra), res


def cmd_swidth(args):
    problem, extra = load_problem(args)
    t0 = time.perf_counter()
    if args.order in ("closure", "direct"):
        rs = rules_arg(args)
        feats = make_context(problem, rs, definitions(args)).features
        specs = list(rs.feature_names)
    else:
        specs = feature_specs(args, ["#g"])
        feats = resolve_features(problem, specs)
    order = build_order(args, problem, feats, specs)
    w = serialized_width(problem, feats, order, args.k_cap or 2, cap=args.state_cap)
    res = {"features": [f.name for f in feats], "order": order.description, "serialized_width": str(w),
           "order_tests": order.calls, "seconds": round(time.perf_counter() - t0, 4)}
    return 0, instance_info(problem, extra), res


def cmd_sketchwidth(args):
    problem, extra = load_problem(args)
    rs = rules_arg(args)
    t0 = time.perf_counter()
    goals = goal_nodes(args, rs, []) if args.goal else ()
    cert = sieve_terminates(build_policy_graph(rs, goals))
    res = {"sketch": rs.name, "well_formed": cert.verdict}
    if not cert.verdict:
        res["seconds"] = round(time.perf_counter() - t0, 4)
        return 1, instance_info(problem, extra), res
    ctx = make_context(problem, rs, definitions(args))
    sw = sketch_width(problem, rs, ctx.features, args.k_cap or 2, cap=args.state_cap)
    res.update(sketch_width=str(sw.width), subproblems=sw.states, seconds=round(time.perf_counter() - t0, 4))
    return 0, instance_info(problem, extra), res


def _certificate(graph, cert) -> dict:
    out = {"terminating": cert.verdict,
           "eliminations": [{"feature": e.feature, "scc": e.scc, "removed": len(e.removed)}
                            for e in cert.eliminations]}
    if cert.cycle:
        out["cycle"] = [f"{graph.describe(graph.edges[k].src)} -[{graph.edges[k].rule}]-> "
                        f"{graph.describe(graph.edges[k].dst)}" for k in cert.cycle]
        out["cycle_changes"] = cert.summary
    return out


def cmd_check(args):
    what = args.what
    t0 = time.perf_counter()
    if what == "sketch":
        rs = rules_arg(args)
        goals = goal_nodes(args, rs, []) if args.goal else ()
        g = build_policy_graph(rs, goals)
        cert = sieve_terminates(g)
        res = {"sketch": rs.name, "rules": len(rs.rules), **_certificate(g, cert),
               "seconds": round(time.perf_counter() - t0, 4)}
        return (0 if cert.verdict else 1), None, res
    if what == "graph":
        rs = rules_arg(args)
        problem, info = None, None
        if args.domain or (args.file and args.rules):
            problem, extra = load_problem(args)
            info = instance_info(problem, extra)
        goals = goal_nodes(args, rs, [problem] if problem else [])
        g = build_policy_graph(rs, goals)
        cert = sieve_terminates(g)
        init = parse_nodes(args.init) if args.init else []
        if problem is not None and not init:
            ctx = make_context(problem, rs, definitions(args))
            init = [ctx.bval(problem.init)]
        res = {"rules": rs.name, "nodes": len(g.nodes), "edges": len(g.edges), **_certificate(g, cert),
               "regularity": check_regular(rs)}
        ok = cert.verdict
        if init:
            res["initial_nodes"] = [g.node_label(b) for b in init]
            res["reachable_nodes"] = len(g.reachable(init))
            res["goal_connected"] = check_goal_connected(g, init)
            ok = ok and res["goal_connected"]
        res["seconds"] = round(time.perf_counter() - t0, 4)
        return (0 if ok else 1), info, res
    problem, extra = load_problem(args)
    info = instance_info(problem, extra)
    if what == "chain":
        if not args.chain:
            raise UsageError("--chain 'a1 a2; a3; ...' is required")
        tuples = [t.split() for t in args.chain.split(";")]
        chain = Chain.from_names(problem, tuples)
        space = StateSpace(problem, cap=args.state_cap)
        adm = check_admissible(problem, chain, space)
        fea = check_feasible(problem, chain, space)
        res = {"size": chain.size, "length": len(chain.tuples), "admissible": adm.ok, "feasible": fea.ok}
        if not adm.ok:
            res["reason"] = adm.reason
            if adm.state is not None:
                res["counterexample"] = problem.universe.names(adm.state)
        res["seconds"] = round(time.perf_counter() - t0, 4)
        return (0 if adm.ok else 1), info, res
    if what == "policy":
        rs = rules_arg(args)
        defs = definitions(args)
        ctx = make_context(problem, rs, defs)
        space = StateSpace(problem, cap=args.state_cap)
        run = PolicyRun(ctx)
        sep = check_goal_separation([problem], lambda p: make_context(p, rs, defs).features, args.state_cap)
        goals = goal_nodes_where(rs, parse_condition(args.goal)) if args.goal else sorted(sep.kappa)
        g = build_policy_graph(rs, goals)
        res = {"policy": rs.name, "solves": run.solves, "closed": check_closed(problem, ctx).ok,
               "sound": check_sound(problem, ctx, space=space).ok,
               "optimal": check_policy_optimal(problem, ctx, space=space).ok if run.solves else None,
               "markovian": check_markovian(problem, ctx, space=space).ok,
               "goal_separation": sep.ok, "kappa": [g.node_label(b) for b in sorted(sep.kappa)],
               "terminating": sieve_terminates(g).verdict,
               "goal_connected": check_goal_connected(g, [ctx.bval(problem.init)]),
               "regularity": check_regular(rs)}
        if run.stuck:
            res["stuck_state"] = problem.universe.names(run.states[run.stuck[0]])
        res["seconds"] = round(time.perf_counter() - t0, 4)
        return (0 if run.solves else 1), info, res
    raise UsageError(f"unknown check {what!r}")


def cmd_bench(args):
    from .bench import bench_table1, format_table
    sizes = [int(x) for x in split_top(args.sizes)]
    packages = [int(x) for x in split_top(args.packages)]
    seeds = [int(x) for x in split_top(args.seeds)] if args.seeds else [args.seed or 0]
    rows, secs = bench_table1(sizes, packages, seeds, args.k_cap or 2)
    res = {"table": [{"sketch": r.sketch, "D1": str(r.cells["D1"]), "D": str(r.cells["D"]),
                      "published_D1": str(r.published[0]), "published_D": str(r.published[1]),
                      "match": r.matches(), "per_instance": {c: r.cells[c].per_instance for c in r.cells}}
                     for r in rows],
           "seconds": round(secs, 4)}
    if args.report == "text":
        res = {"table_text": "\n" + format_table(rows), "seconds": round(secs, 4)}
    return (0 if all(r.matches() for r in rows) else 1), None, res


def cmd_export_graph(args):
    rs = rules_arg(args)
    problem = None
    if args.domain:
        problem, _ = load_problem(args)
    goals = goal_nodes(args, rs, [problem] if problem else [])
    g = build_policy_graph(rs, goals)
    init = parse_nodes(args.init) if args.init else []
    if problem is not None and not init:
        init = [make_context(problem, rs, definitions(args)).bval(problem.init)]
    text = to_dot(g, init, rs.name)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        args.stream.write(text)
    return 0, None, None


COMMANDS = {"solve": cmd_solve, "width": cmd_width, "swidth": cmd_swidth, "sketchwidth": cmd_sketchwidth,
            "check": cmd_check, "bench": cmd_bench, "export-graph": cmd_export_graph}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", help="builtin domain: blocks_clear, blocks_on, blocks, boxes, delivery, visitall, grid")
    common.add_argument("--params", help="domain parameters k=v[,k=v]")
    common.add_argument("--file", help="problem file (rules file for check sketch/graph)")
    common.add_argument("--features", help="feature specs, comma separated (#g, #m, count(pred,?,x), name=def)")
    common.add_argument("--rules", help="bundled rule set name or rules file")
    common.add_argument("--order", help="goal_counter | lex:<f1,f2> | closure | direct")
    common.add_argument("--goal", help="goal valuations as a condition, e.g. n=0")
    common.add_argument("--k-cap", type=int, dest="k_cap", help="largest k tried (default 2)")
    common.add_argument("--state-cap", type=int, dest="state_cap", default=DEFAULT_STATE_CAP)
    common.add_argument("--seed", type=int)
    common.add_argument("--report", choices=("text", "structured"), default="text")

    p = argparse.ArgumentParser(prog="widthplan", description="Width-based planning toolkit.")
    p.add_argument("--version", action="version", version=f"widthplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="solve an instance")
    s.add_argument("--algo", choices=("bfs", "iw", "iw_k", "iw_phi", "siw_phi", "siw_r"))
    s.add_argument("--k", type=int, help="k for iw_k")
    s.add_argument("--check-optimal", action="store_true", dest="check_optimal")
    sub.add_parser("width", parents=[common], help="exact, IW and effective width")
    sub.add_parser("swidth", parents=[common], help="serialized width")
    sub.add_parser("sketchwidth", parents=[common], help="sketch width")
    c = sub.add_parser("check", parents=[common], help="verify a policy, sketch, chain or policy graph")
    c.add_argument("what", choices=("policy", "sketch", "chain", "graph"))
    c.add_argument("--chain", help="tuples separated by ';', atoms by spaces")
    c.add_argument("--init", help="initial graph nodes as bitstrings, comma separated")
    b = sub.add_parser("bench", parents=[common], help="sketch widths over the Delivery sweep")
    b.add_argument("--sizes", default="2,3,4")
    b.add_argument("--packages", default="1,2")
    b.add_argument("--seeds")
    e = sub.add_parser("export-graph", parents=[common], help="policy graph in DOT format")
    e.add_argument("--init", help="initial nodes as bitstrings, comma separated")
    e.add_argument("--out", help="write to a file instead of standard output")
    return p


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # usage errors, --help and --version
        return 0 if e.code is None else int(e.code)
    args.stream = out
    try:
        code, info, results = COMMANDS[args.command](args)
    except (Unsolvable, EpisodeFailed, IllFormedSketch, NotASolution) as e:
        print(f"widthplan: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (UsageError, WidthPlanError, OSError) as e:
        print(f"widthplan: error: {e}", file=sys.stderr)
        if isinstance(e, UsageError):
            parser.print_usage(sys.stderr)
        return 2
    if results is not None:
        report = make_report(["widthplan", *argv], info, results)
        out.write(to_json(report) if args.report == "structured" else to_text(report))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
