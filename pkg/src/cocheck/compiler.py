"""Translation of C-O diagrams into networks of decorated timed automata.

Time windows: a clause with bound ``T`` lets its action happen while its
clock is ``<= T``; the window closes with a timeout (complement) edge at
``T + 1``, and the window node carries the invariant ``clock <= T + 1``.

Structural steps (entering a clause, choosing an Or alternative, joining a
sequence) are urgent silent edges.  And-refinements put every branch after
the first into a fresh automaton that starts and stops on silent begin/end
channels.  Declining a permission is a non-urgent silent edge.
"""

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .diagram import (
    Atomic, Composite, ContractDiagram, Norm, NormIndex, NormKind, Refinement, ReparationRef,
    iter_clauses, norm_index,
)
from .guards import TRUE, eval_guard, negate
from .nta import (
    TAU, ClockConstraint, Complement, Edge, Input, Internal, Network, Node, Output,
    TimedAutomaton, TRUE_CLOCK,
)

EMPTY = (frozenset(), frozenset(), frozenset())


class CompileError(Exception):
    pass


class DecorationConflict(CompileError):
    pass


@dataclass
class CompilationUnit:
    network: Network
    clause_to_clock: dict
    channel_map: dict              # channel -> (kind, clause name, automaton name)
    norm_index: object
    deltas: dict = field(default_factory=dict)    # (automaton idx, edge idx) -> delta

    @property
    def default_horizon(self):
        return default_horizon(self.network)


def default_horizon(net):
    """Sum of every distinct window length (bound + 1), plus one."""
    windows = {}
    for a in net.automata:
        for n in a.nodes:
            for clock, op, c in n.invariant.atoms:
                if op == "<=":
                    windows[clock] = max(windows.get(clock, 0), c)
    return sum(windows.values()) + 1


class _Ctx(NamedTuple):
    in_rep: bool
    window: Optional[tuple]       # (clock, bound)
    reps: tuple                   # reparation names being compiled (cycle guard)
    path: tuple = ()              # clause names from the root, through reparations


class _Aut:
    def __init__(self, name):
        self.name = name
        self.nodes = []           # [id, invariant, deco, final]
        self.edges = []           # [Edge, delta]

    def node(self, deco, invariant=TRUE_CLOCK, final=False):
        nid = "n%d" % len(self.nodes)
        self.nodes.append([nid, invariant, deco, final])
        return nid

    def deco(self, nid):
        return self.nodes[int(nid[1:])][2]

    def mark_final(self, nid):
        self.nodes[int(nid[1:])][3] = True

    def edge(self, src, dst, label, clock_guard=TRUE_CLOCK, data_guard=TRUE, resets=(), urgent=False):
        a, b = self.deco(src), self.deco(dst)
        delta = tuple(x for i in range(3) for x in (b[i] - a[i], a[i] - b[i]))
        self.edges.append([Edge(src, dst, label, clock_guard, data_guard, tuple(resets), urgent), delta])


def _alternatives(expr):
    """Flatten an action expression into (action sequence, realised sub-names) options."""
    if isinstance(expr, Atomic):
        return [((expr.action,), ())]
    per_child = []
    for na in expr.children:
        per_child.append([(acts, (na.name,) + names) for acts, names in _alternatives(na.expr)])
    out = []
    if expr.refinement is Refinement.OR:
        for opts in per_child:
            out.extend(opts)
    elif expr.refinement is Refinement.SEQ:
        for combo in itertools.product(*per_child):
            out.append((sum((c[0] for c in combo), ()), sum((c[1] for c in combo), ())))
    else:
        for order in itertools.permutations(range(len(per_child))):
            for combo in itertools.product(*(per_child[i] for i in order)):
                out.append((sum((c[0] for c in combo), ()), sum((c[1] for c in combo), ())))
    seen, uniq = set(), []
    for alt in out:
        if alt not in seen:
            seen.add(alt)
            uniq.append(alt)
    return uniq


def _add(deco, V=(), S=(), P=()):
    return (deco[0] | frozenset(V), deco[1] | frozenset(S), deco[2] | frozenset(P))


class _Compiler:
    def __init__(self, d: ContractDiagram, env):
        self.d = d
        self.env = dict(env or {})
        self.automata = []
        self.channel_map = {}
        self.clock_of = {}
        # And-branch automata by syntactic position; copies of one position made
        # for different exits of an earlier sibling are mutually exclusive, so
        # they can share the branch automaton
        self.spawned = {}
        used = set()
        for c in iter_clauses(d):
            if c.time is None:
                continue
            clock = c.time.clock
            if clock in used:
                clock = "%s_%s" % (clock, c.name)
            used.add(clock)
            self.clock_of[c.name] = clock

    def new_automaton(self):
        a = _Aut("A%d" % len(self.automata))
        self.automata.append(a)
        return a

    def run(self):
        main = self.new_automaton()
        start = main.node(EMPTY)
        exits = self.clause(self.d.root, main, start, EMPTY, _Ctx(False, None, (), ()))
        for n, deco in exits:
            f = main.node(deco, final=True)
            main.edge(n, f, TAU, urgent=True)
        return main

    # clauses

    def clause(self, c, aut, node, deco, ctx):
        ctx = ctx._replace(path=ctx.path + (c.name,))
        val = eval_guard(c.guard, self.env) if c.guard != TRUE else True
        if val is False:
            return [(node, deco)]
        exits = []
        if val is None:
            enter = aut.node(deco)
            aut.edge(node, enter, TAU, data_guard=c.guard, urgent=True)
            skip = aut.node(deco)
            aut.edge(node, skip, TAU, data_guard=negate(c.guard), urgent=True)
            exits.append((skip, deco))
            node = enter
        if c.time is not None:
            clock = self.clock_of[c.name]
            entered = aut.node(deco)
            aut.edge(node, entered, TAU, resets=(clock,), urgent=True)
            node = entered
            ctx = ctx._replace(window=(clock, c.time.bound))
        if isinstance(c, Norm):
            exits.extend(self.norm(c, aut, node, deco, ctx))
        else:
            exits.extend(self.composite(c, aut, node, deco, ctx))
        return exits

    def composite(self, c, aut, node, deco, ctx):
        if c.refinement is Refinement.SEQ:
            exits = [(node, deco)]
            for child in c.children:
                nxt = []
                for n, dc in exits:
                    nxt.extend(self.clause(child, aut, n, dc, ctx))
                exits = nxt
            return exits
        if c.refinement is Refinement.OR:
            exits = []
            for child in c.children:
                w = aut.node(deco)
                aut.edge(node, w, TAU, urgent=True)
                exits.extend(self.clause(child, aut, w, deco, ctx))
            return exits
        # And: first branch inline, the others in fresh automata
        spawned = []
        cur = node
        for i, child in enumerate(c.children[1:], 1):
            key = ctx.path + (i,)
            if key not in self.spawned:
                sub = self.new_automaton()
                k = len(self.channel_map) // 2
                beg, end = "beg%d" % k, "end%d" % k
                self.channel_map[beg] = ("begin", c.name, sub.name)
                self.channel_map[end] = ("end", c.name, sub.name)
                w0 = sub.node(EMPTY)
                w1 = sub.node(EMPTY)
                sub.edge(w0, w1, Input(beg), urgent=True)
                for n, dc in self.clause(child, sub, w1, EMPTY, ctx):
                    f = sub.node(dc, final=True)
                    sub.edge(n, f, Output(end), urgent=True)
                self.spawned[key] = (beg, end)
            beg, end = self.spawned[key]
            nxt = aut.node(deco)
            aut.edge(cur, nxt, Output(beg), urgent=True)
            cur = nxt
            spawned.append(end)
        exits = []
        for n, dc in self.clause(c.children[0], aut, cur, deco, ctx):
            for end in spawned:
                nxt = aut.node(dc)
                aut.edge(n, nxt, Input(end), urgent=True)
                n = nxt
            exits.append((n, dc))
        return exits

    # norms

    def norm(self, c, aut, node, deco, ctx):
        window = ctx.window
        if window is not None:
            clock, bound = window
            invariant = ClockConstraint(((clock, "<=", bound + 1),))
            in_time = ClockConstraint(((clock, "<=", bound),))
            timeout = ClockConstraint(((clock, "==", bound + 1),))
        else:
            invariant = in_time = timeout = TRUE_CLOCK
        exits = []
        # an inherited window may already be over when an earlier sibling ran long
        inherited = window is not None and c.time is None
        for actions, names in _alternatives(c.body):
            judged = frozenset(names) if names else frozenset([c.name])
            cur = aut.node(deco, invariant)
            if inherited:
                aut.edge(node, cur, TAU, clock_guard=invariant, urgent=True)
                late = aut.node(deco)
                aut.edge(node, late, TAU, clock_guard=ClockConstraint(((clock, ">=", bound + 2),)), urgent=True)
                exits.extend(self.late(c, aut, late, deco, actions[0], ctx))
            else:
                aut.edge(node, cur, TAU, urgent=True)
            for i, act in enumerate(actions):
                last = i == len(actions) - 1
                if c.kind is NormKind.P:
                    lapse = aut.node(deco)
                    aut.edge(cur, lapse, TAU)
                    exits.append((lapse, deco))
                if window is not None:
                    if c.kind is NormKind.O:
                        exits.extend(self.violation(c, aut, cur, deco, frozenset([c.name]), timeout, Complement(act), ctx))
                    elif c.kind is NormKind.F:
                        done = aut.node(_add(deco, S=[c.name]))
                        aut.edge(cur, done, Complement(act), clock_guard=timeout)
                        exits.append((done, aut.deco(done)))
                if not last:
                    nxt = aut.node(deco, invariant)
                    aut.edge(cur, nxt, Internal(act), clock_guard=in_time)
                    cur = nxt
                    continue
                if c.kind is NormKind.O:
                    done = aut.node(_add(deco, S=judged))
                    aut.edge(cur, done, Internal(act), clock_guard=in_time)
                    exits.append((done, aut.deco(done)))
                elif c.kind is NormKind.P:
                    done = aut.node(_add(deco, P=judged))
                    aut.edge(cur, done, Internal(act), clock_guard=in_time)
                    exits.append((done, aut.deco(done)))
                else:
                    exits.extend(self.violation(c, aut, cur, deco, judged, in_time, Internal(act), ctx))
        return exits

    def late(self, c, aut, node, deco, act, ctx):
        """Entered after the window closed: the timeout outcome happens at once."""
        if c.kind is NormKind.O:
            return self.violation(c, aut, node, deco, frozenset([c.name]), TRUE_CLOCK, Complement(act), ctx,
                                  urgent=True)
        if c.kind is NormKind.F:
            done = aut.node(_add(deco, S=[c.name]))
            aut.edge(node, done, Complement(act), urgent=True)
            return [(done, aut.deco(done))]
        lapse = aut.node(deco)
        aut.edge(node, lapse, TAU, urgent=True)
        return [(lapse, deco)]

    def violation(self, c, aut, src, deco, blamed, guard, label, ctx, urgent=False):
        """Edge into the violation node of ``c``, then its reparation if any."""
        added = frozenset() if ctx.in_rep else blamed
        vdeco = _add(deco, V=added)
        vnode = aut.node(vdeco)
        aut.edge(src, vnode, label, clock_guard=guard, urgent=urgent)
        if c.reparation is None:
            aut.mark_final(vnode)
            return []
        rep = self.d.resolve(c.reparation)
        key = c.reparation.name if isinstance(c.reparation, ReparationRef) else id(rep)
        if key in ctx.reps:
            raise CompileError("reparation of %r re-enters itself" % c.name)
        rctx = _Ctx(True, None, ctx.reps + (key,), ctx.path + ("reparation",))
        exits = []
        for n, dc in self.clause(rep, aut, vnode, vdeco, rctx):
            repaired = (dc[0] - added, dc[1] | (added or frozenset([c.name])), dc[2])
            r = aut.node(repaired)
            aut.edge(n, r, TAU, urgent=True)
            exits.append((r, repaired))
        return exits


def decorate_nodes(edges, initial):
    """Propagate per-edge set deltas from the initial node.

    ``edges`` is a list of (Edge, delta) with delta = (addV, remV, addS,
    remS, addP, remP).  Returns {node id: (V, S, P)}; raises
    DecorationConflict when two paths reach a node with different sets.
    """
    out_edges = {}
    for e, delta in edges:
        out_edges.setdefault(e.src, []).append((e, delta))
    sets = {initial: EMPTY}
    stack = [initial]
    while stack:
        nid = stack.pop()
        V, S, P = sets[nid]
        for e, (aV, rV, aS, rS, aP, rP) in out_edges.get(nid, ()):
            nd = ((V - rV) | aV, (S - rS) | aS, (P - rP) | aP)
            if e.dst in sets:
                if sets[e.dst] != nd:
                    raise DecorationConflict("node %s reached with %r and %r" % (e.dst, sets[e.dst], nd))
                continue
            sets[e.dst] = nd
            stack.append(e.dst)
    return sets


def compile_contract(d: ContractDiagram, env=None):
    """Compile a well-formed diagram.

    ``env`` binds guard variables; unbound variables stay symbolic, and the
    network then has one initial state per assignment of them.
    """
    comp = _Compiler(d, env)
    comp.run()
    automata = []
    deltas = {}
    for ai, a in enumerate(comp.automata):
        sets = decorate_nodes(a.edges, "n0")
        nodes = []
        for nid, inv, tracked, final in a.nodes:
            V, S, P = sets.get(nid, tracked)
            if (V, S, P) != tracked:
                raise DecorationConflict("node %s of %s: propagated sets differ from construction" % (nid, a.name))
            nodes.append(Node(nid, inv, V, S, P, final))
        for ei, (_, delta) in enumerate(a.edges):
            deltas[(ai, ei)] = delta
        automata.append(TimedAutomaton(a.name, tuple(nodes), "n0", tuple(e for e, _ in a.edges)))
    clocks = tuple(sorted(set(comp.clock_of.values())))
    variables = []
    for name, dom in d.variables:
        variables.append((name, (comp.env[name],) if name in comp.env else tuple(dom)))
    idx = norm_index(d)
    meta = {
        "name": d.name,
        "CN": sorted(idx.CN),
        "CP": sorted(idx.CP),
        "compound": {k: sorted(v) for k, v in sorted(idx.compound.items())},
        "reparation_names": sorted(idx.reparation_names),
        "aliases": dict(sorted(idx.aliases.items())),
    }
    net = Network(tuple(automata), clocks, frozenset(comp.channel_map), frozenset(comp.channel_map),
                  tuple(variables), meta)
    return CompilationUnit(net, dict(comp.clock_of), dict(comp.channel_map), idx, deltas)


def norm_index_from_network(net):
    """Recover the norm index stored in a compiled ``.nta`` file, or infer one from decorations."""
    meta = net.contract
    if meta:
        return NormIndex(frozenset(meta.get("CN", ())), frozenset(meta.get("CP", ())),
                         {k: frozenset(v) for k, v in meta.get("compound", {}).items()},
                         frozenset(meta.get("reparation_names", ())),
                         dict(meta.get("aliases", {})))
    cn, cp = set(), set()
    for a in net.automata:
        for n in a.nodes:
            cn |= n.V | n.S
            cp |= n.P
    return NormIndex(frozenset(cn), frozenset(cp))
