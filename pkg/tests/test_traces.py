import random

import pytest
from hypothesis import given, settings, strategies as st

from cocheck.compiler import compile_contract, default_horizon
from cocheck.diagram import parse_diagram
from cocheck.nta import Network, Node, TimedAutomaton, TRUE_CLOCK
from cocheck.traces import (
    Engine, HorizonTooSmall, TimedTrace, TraceNotInNetwork, TraceSyntaxError, UnknownAction,
    classify_trace, concat, enumerate_maximal_traces, hide_trace, run_trace,
)

import net_sim
from ast_oracle import Oracle
from conftest import T
from net_gen import random_network


def single(x):
    return frozenset([frozenset(x)])


EMPTY = single(())


# -- the trace type ----------------------------------------------------------

def test_parse_forms_agree():
    a = T("[a1 3 a3 8]")
    assert a == T("a1 3 a3 8") == T("a1 3\na3 8\n") == T("# comment\na1 3  # pay\na3 8\n")
    assert a == TimedTrace.of(("a1", 3), ("a3", 8))
    assert str(a) == "[a1 3 a3 8]"
    assert T(a.to_file()) == a
    assert T("[]") == TimedTrace()


@pytest.mark.parametrize("bad", ["[a1]", "[a1 x]", "[a1 -1]", "a b c"])
def test_parse_errors(bad):
    with pytest.raises(TraceSyntaxError):
        T(bad)


def test_prefixes_and_concat():
    t = T("[a1 3 !a3 15 a4 0]")
    ps = t.prefixes()
    assert len(ps) == 4 and ps[0] == TimedTrace() and ps[-1] == t
    assert all(p <= t for p in ps)
    assert not T("[a1 2]") <= t
    assert concat(t, TimedTrace()) == t == concat(TimedTrace(), t)
    assert concat(T("[a 1]"), T("[b 2]")) == T("[a 1 b 2]")
    assert t.duration == 18


# -- hide --------------------------------------------------------------------

def test_hide_folds_internal_delays():
    t6 = T("[a1 3 a3' 2 a3'' 2 a3 4]")
    assert hide_trace(t6, {"a1", "a2", "a3", "a4", "a5"}) == T("[a1 3 a3 8]")


def test_hide_identity_cases():
    assert hide_trace(TimedTrace(), {"a"}) == TimedTrace()
    t = T("[a 1 b 0 a 4]")
    assert hide_trace(t, {"a", "b"}) == t


def test_hide_drops_trailing_hidden_events():
    assert hide_trace(T("[a 1 x 5 y 2]"), {"a"}) == T("[a 1]")
    assert hide_trace(T("[tau 2 a 1]"), {"a", "tau"}) == T("[a 3]")


def _hide_by_formula(events, visible):
    # hide([a d] t) = [a d] hide(t) if a visible, else d + hide(t); d + [] = []
    if not events:
        return ()
    (a, d), rest = events[0], _hide_by_formula(events[1:], visible)
    if a in visible and a != "tau":
        return ((a, d),) + rest
    if not rest:
        return ()
    (b, d1), tail = rest[0], rest[1:]
    return ((b, d1 + d),) + tail


events = st.lists(st.tuples(st.sampled_from(["a", "b", "c", "x", "tau"]), st.integers(0, 6)), max_size=8)


@settings(max_examples=1000, deadline=None)
@given(events, st.sets(st.sampled_from(["a", "b", "c", "x"])))
def test_hide_matches_recursive_definition(evs, visible):
    t = TimedTrace(tuple(evs))
    h = hide_trace(t, visible)
    assert h.events == _hide_by_formula(tuple(evs), visible)
    assert hide_trace(h, visible) == h
    assert h.duration <= t.duration
    assert all(a in visible for a, _ in h.events)


@settings(max_examples=200, deadline=None)
@given(events, st.sets(st.sampled_from(["a", "b", "c", "x"])))
def test_hide_is_monotone_on_prefixes(evs, visible):
    t = TimedTrace(tuple(evs))
    for p in t.prefixes():
        assert hide_trace(p, visible) <= hide_trace(t, visible)


# -- run_trace ---------------------------------------------------------------

def test_table_row_t1(ps_net, table):
    r = run_trace(ps_net, table["t1"])
    assert r.member
    assert r.V == EMPTY
    assert r.S == single({"Clause_3", "Send_Item"})
    assert r.P == EMPTY


def test_empty_trace_gives_initial_decorations(ps_net):
    r = run_trace(ps_net, TimedTrace())
    assert r.member
    assert r.V == r.S == r.P == EMPTY


def test_unknown_action(ps_net):
    with pytest.raises(UnknownAction):
        run_trace(ps_net, T("[a9 1]"))


def test_non_member_has_no_end_states(ps_net):
    r = run_trace(ps_net, T("[a3 1]"))
    assert not r.member and not r.end_states


def _sim_traces(net):
    # all traces of length <= 4 with delays <= 3, generated independently
    labels = sorted(net.alphabet())
    out = [()]
    frontier = [()]
    for _ in range(4):
        frontier = [t + ((a, d),) for t in frontier for a in labels for d in range(4)
                    if net_sim.after(net, t + ((a, d),))]
        out.extend(frontier)
    return out


@pytest.mark.parametrize("seed", range(60))
def test_run_trace_agrees_with_interleaving_simulator(seed):
    rng = random.Random(seed)
    if seed % 2:
        # no invariants and plenty of urgency, so waiting is decided by urgent steps
        net = random_network(rng, invariants=False, p_urgent=0.6)
    else:
        net = random_network(rng)
    eng = Engine(net)
    sim = _sim_traces(net)
    for ev in sim:
        t = TimedTrace(ev)
        r = eng.evaluate(t)
        states = net_sim.after(net, ev)
        assert r.end_states == frozenset(states), t
        assert (r.V, r.S, r.P) == net_sim.families(net, states), t
        assert eng.is_maximal(t) == net_sim.maximal(net, states), t
    # and nothing the simulator rejects is accepted
    labels = sorted(net.alphabet())
    accepted = set(sim)
    for ev in list(accepted)[:20]:
        if len(ev) < 4:
            for a in labels:
                for d in range(4):
                    nxt = ev + ((a, d),)
                    assert eng.is_member(TimedTrace(nxt)) == (nxt in accepted)


# -- classification ----------------------------------------------------------

def test_table_classification(ps_net, table):
    k1 = classify_trace(ps_net, table["t1"])
    assert k1.maximal and k1.good and k1.clean
    for name in ("t4", "t5"):
        k = classify_trace(ps_net, table[name])
        assert k.maximal and k.good and not k.clean, name
    k0 = classify_trace(ps_net, table["t0"])
    assert k0.maximal and not k0.good and not k0.clean


def test_empty_trace_is_clean_but_not_maximal(ps_net):
    k = classify_trace(ps_net, TimedTrace())
    assert not k.maximal and not k.good and k.clean


def test_classify_rejects_non_members(ps_net):
    with pytest.raises(TraceNotInNetwork):
        classify_trace(ps_net, T("[a3 1]"))


TOY = """
contract toy {
  obligation o by A within x <= 2 do a reparation R
  reparation R = obligation r by A within y <= 3 do b
}
"""


def test_toy_classification_matches_oracle():
    d = parse_diagram(TOY)
    net = compile_contract(d).network
    eng, o = Engine(net), Oracle(d)
    got = eng.enumerate_maximal(8)
    assert [t.events for t in got] == o.maximal_traces(8)
    table = {}
    for t in got:
        k = eng.classify(t)
        fams = [o.families(o.after(p.events)) for p in t.prefixes()]
        V, S, _ = fams[-1]
        truth = (all(S) and not any(V), all(f[0] == EMPTY for f in fams))
        assert (k.good, k.clean) == truth, t
        table[str(t)] = truth
    # in time is good and clean; repaired is good only; the rest is neither
    assert table["[a 0]"] == (True, True)
    assert table["[!a 3 b 0]"] == (True, False)
    assert table["[!a 3 !b 4]"] == (False, False)


# -- enumeration -------------------------------------------------------------

def test_table_traces_are_members(ps_net, table):
    eng = Engine(ps_net)
    h = default_horizon(ps_net)
    found = set(eng.enumerate_maximal(h))
    for name, t in table.items():
        assert eng.is_member(t), name
        assert t in found, name
    # right after the shipment deadline the refund is still open
    assert not eng.is_maximal(T("[a1 3 !a3 15]"))


def test_single_node_network_has_only_the_empty_trace():
    a = TimedAutomaton("A", (Node("q0", TRUE_CLOCK),), "q0", ())
    net = Network((a,), ())
    assert list(enumerate_maximal_traces(net, 5)) == [TimedTrace()]


def test_enumeration_is_deterministic_and_sorted(ps_net):
    a = Engine(ps_net).enumerate_maximal(28)
    b = list(enumerate_maximal_traces(ps_net, 28))
    assert a == b
    assert a == sorted(a, key=TimedTrace.sort_key)
    assert len(set(a)) == len(a)


def test_horizon_too_small():
    # the only action needs x >= 5, so a horizon of 3 strands the empty trace
    from cocheck.nta import ActionLabel, ClockConstraint, Edge
    a = TimedAutomaton("A", (Node("q0", TRUE_CLOCK), Node("q1", TRUE_CLOCK)), "q0", (
        Edge("q0", "q1", ActionLabel.parse("a"), ClockConstraint.parse("x >= 5"), ("const", True), ()),))
    net = Network((a,), ("x",))
    with pytest.raises(HorizonTooSmall):
        Engine(net).enumerate_maximal(3)
    assert Engine(net).enumerate_maximal(3, strict=False) == []
    assert Engine(net).enumerate_maximal(5) == [T("[a 5]")]


def test_lenient_enumeration_respects_the_horizon(ps_net):
    lenient = Engine(ps_net).enumerate_maximal(10, strict=False)
    assert lenient and all(t.duration <= 10 for t in lenient)


def _dfs_oracle(net, horizon):
    return {t for t in net_sim.all_traces(net, horizon)
            if net_sim.maximal(net, net_sim.after(net, t))}


def _toy_networks(count):
    rng = random.Random(1000)
    while count:
        net = random_network(rng, n_automata=rng.randint(1, 2), max_nodes=3, max_c=2)
        every = net_sim.all_traces(net, 3, max_len=4)
        if len(every) <= 20 and all(len(t) < 4 for t in every):
            count -= 1
            yield net, every


@pytest.mark.parametrize("net,every", list(_toy_networks(40)))
def test_enumeration_matches_dfs_oracle_on_toy_networks(net, every):
    got = Engine(net).enumerate_maximal(3, strict=False)
    assert {t.events for t in got} == _dfs_oracle(net, 3)
    assert {t.events for t in Engine(net).enumerate_traces(3)} == set(every)


def test_enumerated_traces_are_prefix_closed(impl_net):
    ts = set(Engine(impl_net).enumerate_traces(12))
    for t in ts:
        assert all(p in ts for p in t.prefixes())


FULL_TABLE = {
    # trace: expected (V, S, P) by alias
    "t0": ((2,), (), ()),
    "t1": ((), (3, 5), ()),
    "t2": ((5,), (3,), ()),
    "t3": ((5,), (3,), (8,)),
    "t4": ((), (4, 7, 5), ()),
    "t5": ((), (4, 7, 5), (8,)),
}


@pytest.mark.parametrize("name", sorted(FULL_TABLE))
def test_every_table_column(ps_net, table, name):
    from cocheck.compiler import norm_index_from_network
    al = norm_index_from_network(ps_net).aliases
    r = run_trace(ps_net, table[name])
    got = tuple(frozenset(frozenset(int(al[n]) for n in s) for s in f) for f in (r.V, r.S, r.P))
    assert got == tuple(single(x) for x in FULL_TABLE[name])
