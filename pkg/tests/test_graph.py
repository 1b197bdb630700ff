from itertools import product

import networkx as nx
import pytest
from hypothesis import assume, given, settings, strategies as st

from widthplan.errors import ValuationSetMissing
from widthplan.graph import (NEITHER, REGULAR, WEAKLY_REGULAR, brute_force_terminates, build_policy_graph,
                             check_goal_connected, check_regular, goal_nodes_where, induced_precedes,
                             replay_eliminations, sieve_terminates, to_dot)
from widthplan.library import bundled_names, load_rules
from widthplan.rules import parse_rules

from test_rules import FEATS, rule_text

DELIVERY_INIT = [(0, 1, 0, 1), (0, 1, 1, 1)]


def rules(body, feats="H: bool; n: num;"):
    return parse_rules(f"rules g {{ features {{ {feats} }} {body} }}")


def qclear_graph():
    rs = load_rules("qclear")
    return build_policy_graph(rs, goal_nodes_where(rs, {"H": 0, "n": 0}))


def delivery_graph():
    rs = load_rules("delivery")
    return build_policy_graph(rs, goal_nodes_where(rs, {"n": 0}))


# ---------------------------------------------------------------- construction

def test_qclear_graph_edges():
    g = qclear_graph()
    assert len(g.nodes) == 4
    got = sorted((e.src, e.dst, e.rule) for e in g.edges)
    assert got == [((0, 1), (1, 0), "r1"), ((0, 1), (1, 1), "r1"), ((1, 1), (0, 1), "r2")]


def test_empty_rule_set_gives_isolated_nodes():
    g = build_policy_graph(rules(""), ())
    assert len(g.nodes) == 4 and g.edges == []


def test_delivery_graph_reachable_part():
    # [DERIVED] the nodes drawn in the Delivery policy graph figure
    g = delivery_graph().restrict(DELIVERY_INIT)
    assert len(g.nodes) == 8
    assert len(g.edges) == 16
    assert {g.describe(b) for b in g.goal_nodes} == {"-H,p=0,t=0,n=0", "-H,p>0,t=0,n=0", "-H,p=0,t>0,n=0",
                                                    "-H,p>0,t>0,n=0"} & {g.describe(b) for b in g.nodes}
    rules_used = {e.rule for e in g.edges}
    assert rules_used == {"to_pkg", "pick", "to_target", "drop"}


def test_no_edges_leave_goal_nodes():
    for name in bundled_names():
        rs = load_rules(name)
        for cond in ({"n": 0}, {}):
            if any(k not in rs.feature_names for k in cond):
                continue
            g = build_policy_graph(rs, goal_nodes_where(rs, cond) if cond else ())
            assert not any(e.src in g.goal_nodes for e in g.edges)


def test_dec_leaves_the_bit_open_and_inc_sets_it():
    g = build_policy_graph(rules("rule d: n>0 -> dec(n); rule i: -H -> inc(n), H;"), ())
    assert {e.dst for e in g.edges if e.rule == "d" and e.src == (0, 1)} == {(0, 0), (0, 1)}
    assert {e.dst for e in g.edges if e.rule == "i"} == {(1, 1)}


# ---------------------------------------------------------------- Sieve

def test_delivery_terminates():
    g = delivery_graph()
    cert = sieve_terminates(g)
    assert cert and cert.cycle is None
    assert replay_eliminations(g, cert)


def test_sigma3_cycles_on_h():
    rs = load_rules("sigma3")
    g = build_policy_graph(rs, goal_nodes_where(rs, {"n": 0}))
    cert = sieve_terminates(g)
    assert not cert and cert.cycle
    assert cert.summary["H"] == ["clear", "set"]
    assert "n" not in cert.summary
    edges = [g.edges[k] for k in cert.cycle]
    assert edges[0].src == edges[-1].dst
    assert all(a.dst == b.src for a, b in zip(edges, edges[1:]))


def test_single_dec_terminates():
    assert sieve_terminates(build_policy_graph(rules("rule d: n>0 -> dec(n);"), ()))


def test_dec_with_unknown_does_not_terminate():
    cert = sieve_terminates(build_policy_graph(rules("rule d: n>0 -> dec(n); rule u: -H -> ?n, H; rule v: H -> -H;"), ()))
    assert not cert


def test_brute_force_matches_on_qclear():
    g = qclear_graph()
    assert brute_force_terminates(g) == bool(sieve_terminates(g)) is True


def test_brute_force_refuses_large_graphs():
    with pytest.raises(ValueError):
        brute_force_terminates(delivery_graph())


def small_bundled_graphs():
    out = []
    for name in bundled_names():
        rs = load_rules(name)
        for goals in (goal_nodes_where(rs, {"n": 0}) if "n" in rs.feature_names else [], []):
            g = build_policy_graph(rs, goals)
            if len(g.edges) <= 12:
                out.append((name, g))
    return out


def test_sieve_matches_brute_force_on_bundled_graphs():
    graphs = small_bundled_graphs()
    assert len(graphs) >= 4
    for name, g in graphs:
        assert bool(sieve_terminates(g)) == brute_force_terminates(g), name


@st.composite
def random_rules(draw):
    k = draw(st.integers(1, 3))
    texts = [draw(rule_text(i)) for i in range(k)]
    feats = " ".join(f"{n}: {kind};" for n, kind in FEATS)
    rs = parse_rules(f"rules g {{ features {{ {feats} }} {' '.join(texts)} }}")
    goals = draw(st.sets(st.tuples(*[st.integers(0, 1)] * len(FEATS)), max_size=6))
    return rs, sorted(goals)


@given(random_rules())
@settings(max_examples=300, deadline=None)
def test_sieve_matches_brute_force_on_random_graphs(arg):
    rs, goals = arg
    g = build_policy_graph(rs, goals)
    assume(len(g.edges) <= 12)
    cert = sieve_terminates(g)
    assert bool(cert) == brute_force_terminates(g)
    if cert:
        assert replay_eliminations(g, cert)


@given(random_rules())
@settings(max_examples=150, deadline=None)
def test_sieve_certificate_is_consistent(arg):
    rs, goals = arg
    g = build_policy_graph(rs, goals)
    cert = sieve_terminates(g)
    if cert:
        assert replay_eliminations(g, cert)
    else:
        edges = [g.edges[k] for k in cert.cycle]
        assert edges[0].src == edges[-1].dst
        assert all(a.dst == b.src for a, b in zip(edges, edges[1:]))


# ---------------------------------------------------------------- goal connectedness

def test_delivery_goal_connected():
    assert check_goal_connected(delivery_graph(), DELIVERY_INIT)


def test_qclear_goal_connected():
    rs = load_rules("qclear")
    assert check_goal_connected(build_policy_graph(rs, goal_nodes_where(rs, {"n": 0})), [(0, 1)])
    # with the separated goal (no block held) the literal rules dead-end at (H, n=0)
    assert not check_goal_connected(qclear_graph(), [(0, 1)])
    rs = load_rules("qclear_h")
    assert check_goal_connected(build_policy_graph(rs, goal_nodes_where(rs, {"H": 0, "n": 0})), [(0, 1)])


def test_sink_node_is_not_goal_connected():
    rs = rules("rule a: -H -> H;")
    assert not check_goal_connected(build_policy_graph(rs, [(0, 0)]), [(0, 1)])


# ---------------------------------------------------------------- regularity

def test_regularity_verdicts():
    assert check_regular(load_rules("boxes")) == REGULAR
    assert check_regular(load_rules("sigma3")) == NEITHER
    assert check_regular(rules("rule d: n>0 -> dec(n);")) == REGULAR
    assert check_regular(load_rules("qclear")) == WEAKLY_REGULAR
    assert check_regular(load_rules("delivery")) == WEAKLY_REGULAR


def test_ordered_increase_is_regular():
    rs = rules("rule a: n>0 -> dec(n), inc(m); rule b: m>0 -> dec(m);", "n: num; m: num;")
    assert check_regular(rs) == REGULAR
    rs = rules("rule a: n>0 -> dec(n), inc(m); rule b: m>0 -> dec(m), inc(n);", "n: num; m: num;")
    assert check_regular(rs) == NEITHER


def test_regular_rule_sets_terminate():
    for name in bundled_names():
        rs = load_rules(name)
        if check_regular(rs) == REGULAR:
            assert sieve_terminates(build_policy_graph(rs, ())), name


@given(random_rules())
@settings(max_examples=200, deadline=None)
def test_regular_implies_terminating_on_random_rules(arg):
    rs, _ = arg
    if check_regular(rs) == REGULAR:
        assert sieve_terminates(build_policy_graph(rs, ()))


# ---------------------------------------------------------------- induced order

BOX_VALS = list(product(range(3), range(3)))  # (m, n)


def test_boxes_induced_order():
    rs = load_rules("boxes")
    goals = goal_nodes_where(rs, {"n": 0})
    assert induced_precedes(rs, (1, 2), (0, 2), BOX_VALS, goals)
    for k in range(3):
        assert induced_precedes(rs, (0, 2), (k, 1), BOX_VALS, goals)
    assert not induced_precedes(rs, (0, 1), (0, 2), BOX_VALS, goals)


def test_induced_order_is_irreflexive():
    rs = load_rules("boxes")
    assert not any(induced_precedes(rs, f, f, BOX_VALS, goal_nodes_where(rs, {"n": 0})) for f in BOX_VALS)


def test_sigma4_orders_by_packages_left():
    rs = load_rules("sigma4")
    vals = [(h, p, t, n) for h in (0, 1) for p in (0, 2) for t in (0, 1) for n in (1, 2)]
    goals = goal_nodes_where(rs, {"n": 0})
    for f in vals:
        for f2 in vals:
            if f[3] == 2 and f2[3] == 1:
                assert induced_precedes(rs, f, f2, vals, goals)


def test_induced_order_needs_valuations():
    rs = load_rules("boxes")
    with pytest.raises(ValuationSetMissing):
        induced_precedes(rs, (0, 1), (0, 0), [])
    with pytest.raises(ValuationSetMissing):
        induced_precedes(rs, (0, 1), (0, 9), BOX_VALS)


@given(random_rules(), st.sets(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 2), st.integers(0, 2)),
                               min_size=1, max_size=8))
@settings(max_examples=120, deadline=None)
def test_terminating_rules_induce_an_acyclic_order(arg, vals):
    rs, goals = arg
    assume(sieve_terminates(build_policy_graph(rs, goals)))
    vals = sorted(vals)
    dg = nx.DiGraph()
    dg.add_nodes_from(vals)
    for f in vals:
        assert not induced_precedes(rs, f, f, vals, goals)
        for f2 in vals:
            if induced_precedes(rs, f, f2, vals, goals):
                dg.add_edge(f, f2)
    assert nx.is_directed_acyclic_graph(dg)


# ---------------------------------------------------------------- DOT

def test_dot_export():
    g = delivery_graph()
    dot = to_dot(g, DELIVERY_INIT, "delivery")
    assert dot.startswith('digraph "delivery" {')
    assert dot.count('fillcolor="yellow"') == 2
    assert dot.count("->") == 16
    assert "peripheries=2" in dot
    assert 'rule="drop"' in dot


def test_dot_export_without_initial_nodes_shows_everything():
    g = qclear_graph()
    dot = to_dot(g)
    assert dot.count("label=") == 4 + 3
