"""Decorated timed automata, networks of them, and their integer-time semantics.

Clock constraints are conjunctions of closed atoms ``x <= c``, ``x >= c`` and
``x == c``.  Concrete states carry integer clock valuations; values above the
largest constant in the network are collapsed to ``max_constant + 1``, which
is exact for closed non-diagonal constraints.
"""

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .guards import GuardSyntaxError, eval_guard, guard_to_str, guard_vars, parse_guard, TRUE


class FormatError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__("%s: %s" % (path or "<root>", message))


# -- clock constraints -------------------------------------------------------

_ATOM = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(<=|>=|==)\s*(\d+)\s*$")


@dataclass(frozen=True)
class ClockConstraint:
    atoms: tuple = ()     # ((clock, op, const), ...)

    @classmethod
    def parse(cls, text):
        if text is None or text.strip() in ("", "true"):
            return cls()
        atoms = []
        for part in text.split("&&"):
            m = _ATOM.match(part)
            if not m:
                raise ValueError("bad clock atom %r" % part.strip())
            atoms.append((m.group(1), m.group(2), int(m.group(3))))
        return cls(tuple(atoms))

    def __str__(self):
        return " && ".join("%s %s %d" % a for a in self.atoms)

    def __bool__(self):
        return bool(self.atoms)

    def clocks(self):
        return {a[0] for a in self.atoms}

    def max_constant(self):
        return max((a[2] for a in self.atoms), default=0)

    def holds(self, val, index):
        for clock, op, c in self.atoms:
            v = val[index[clock]]
            if op == "<=" and v > c:
                return False
            if op == ">=" and v < c:
                return False
            if op == "==" and v != c:
                return False
        return True

    def conj(self, other):
        return ClockConstraint(self.atoms + other.atoms)


TRUE_CLOCK = ClockConstraint()


# -- labels ------------------------------------------------------------------

@dataclass(frozen=True)
class ActionLabel:
    kind: str          # tau | internal | complement | input | output | sync
    name: str = ""

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text in ("tau", "τ"):
            return TAU
        if text.startswith("!") and len(text) > 1:
            return cls("complement", text[1:])
        if text.endswith("?") and len(text) > 1:
            return cls("input", text[:-1])
        if text.endswith("!") and len(text) > 1:
            return cls("output", text[:-1])
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_'\-]*", text):
            raise ValueError("bad label %r" % text)
        return cls("internal", text)

    def __str__(self):
        if self.kind == "tau":
            return "tau"
        if self.kind == "complement":
            return "!" + self.name
        if self.kind == "input":
            return self.name + "?"
        if self.kind == "output":
            return self.name + "!"
        return self.name

    @property
    def is_sync_half(self):
        return self.kind in ("input", "output")


TAU = ActionLabel("tau")


def Internal(name):
    return ActionLabel("internal", name)


def Complement(name):
    return ActionLabel("complement", name)


def Input(name):
    return ActionLabel("input", name)


def Output(name):
    return ActionLabel("output", name)


def Sync(name):
    return ActionLabel("sync", name)


# -- structure ---------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    id: str
    invariant: ClockConstraint = TRUE_CLOCK
    V: frozenset = frozenset()
    S: frozenset = frozenset()
    P: frozenset = frozenset()
    final: bool = False


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: ActionLabel
    clock_guard: ClockConstraint = TRUE_CLOCK
    data_guard: tuple = TRUE
    resets: tuple = ()
    urgent: bool = False


@dataclass(frozen=True)
class TimedAutomaton:
    name: str
    nodes: tuple
    initial: str
    edges: tuple

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("automaton %s: duplicate node ids" % self.name)
        if self.initial not in ids:
            raise ValueError("automaton %s: initial node %r missing" % (self.name, self.initial))
        for e in self.edges:
            if e.src not in ids or e.dst not in ids:
                raise ValueError("automaton %s: edge %s->%s leaves the node set" % (self.name, e.src, e.dst))
        object.__setattr__(self, "_node_map", {n.id: n for n in self.nodes})
        out = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out[e.src].append(e)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})

    def node(self, nid):
        return self._node_map[nid]

    def out_edges(self, nid):
        return self._out[nid]


@dataclass(frozen=True)
class Network:
    automata: tuple
    clocks: tuple
    channels: frozenset = frozenset()
    silent_channels: frozenset = frozenset()
    variables: tuple = ()         # ((name, domain tuple), ...)
    contract: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.automata:
            raise ValueError("a network needs at least one automaton")
        consts = [0]
        for a in self.automata:
            for n in a.nodes:
                consts.append(n.invariant.max_constant())
            for e in a.edges:
                consts.append(e.clock_guard.max_constant())
        object.__setattr__(self, "max_constant", max(consts))
        object.__setattr__(self, "clock_index", {c: i for i, c in enumerate(self.clocks)})
        object.__setattr__(self, "var_index", {v: i for i, (v, _) in enumerate(self.variables)})

    def visible_name(self, label):
        """Trace spelling of a transition label, or None for silent steps."""
        if label.kind == "tau":
            return None
        if label.kind == "sync":
            return None if label.name in self.silent_channels else label.name
        return str(label)

    def alphabet(self):
        """Visible actions any step of the network can produce."""
        out = set()
        for a in self.automata:
            for e in a.edges:
                if e.label.kind in ("internal", "complement"):
                    out.add(str(e.label))
                elif e.label.kind == "output" and e.label.name not in self.silent_channels:
                    out.add(e.label.name)
        return frozenset(out)


@dataclass(frozen=True)
class NetworkState:
    nodes: tuple
    clocks: tuple
    env: tuple = ()

    def __str__(self):
        return "(%s | %s)" % (",".join(self.nodes), ",".join(map(str, self.clocks)))


# -- concrete semantics ------------------------------------------------------

def initial_states(net):
    """One initial state per assignment of the network's data variables."""
    doms = [dom for _, dom in net.variables]
    nodes = tuple(a.initial for a in net.automata)
    zero = tuple(0 for _ in net.clocks)
    out = []
    for combo in itertools.product(*doms):
        s = NetworkState(nodes, zero, tuple(combo))
        if invariants_hold(net, s):
            out.append(s)
    return out


def _env(net, s):
    return {v: s.env[i] for v, i in net.var_index.items()}


def invariants_hold(net, s, clocks=None):
    clocks = s.clocks if clocks is None else clocks
    for a, nid in zip(net.automata, s.nodes):
        if not a.node(nid).invariant.holds(clocks, net.clock_index):
            return False
    return True


def _edge_enabled(net, s, e, env):
    if not e.clock_guard.holds(s.clocks, net.clock_index):
        return False
    if e.data_guard != TRUE and eval_guard(e.data_guard, env) is False:
        return False
    return True


def _fire(net, s, moves):
    nodes = list(s.nodes)
    clocks = list(s.clocks)
    for i, e in moves:
        nodes[i] = e.dst
    for _, e in moves:
        for c in e.resets:
            clocks[net.clock_index[c]] = 0
    t = NetworkState(tuple(nodes), tuple(clocks), s.env)
    return t if invariants_hold(net, t) else None


def _enabled_edges(net, s):
    env = _env(net, s)
    out = []
    for i, (a, nid) in enumerate(zip(net.automata, s.nodes)):
        for e in a.out_edges(nid):
            if _edge_enabled(net, s, e, env):
                out.append((i, e))
    return out


def discrete_successors(net, s):
    """All autonomous and synchronisation steps from ``s`` as (label, state) pairs."""
    enabled = _enabled_edges(net, s)
    out = []
    for i, e in enabled:
        if not e.label.is_sync_half:
            t = _fire(net, s, [(i, e)])
            if t is not None:
                out.append((e.label, t))
    outputs = [(i, e) for i, e in enabled if e.label.kind == "output"]
    inputs = [(j, e) for j, e in enabled if e.label.kind == "input"]
    for i, eo in outputs:
        for j, ei in inputs:
            if i != j and eo.label.name == ei.label.name:
                t = _fire(net, s, [(i, eo), (j, ei)])
                if t is not None:
                    out.append((Sync(eo.label.name), t))
    return out


def urgent_enabled(net, s):
    enabled = _enabled_edges(net, s)
    for i, e in enabled:
        if e.urgent and not e.label.is_sync_half:
            return True
    for i, eo in enabled:
        if eo.label.kind != "output":
            continue
        for j, ei in enabled:
            if (ei.label.kind == "input" and i != j and ei.label.name == eo.label.name
                    and (eo.urgent or ei.urgent)):
                return True
    return False


def delay_successor(net, s, d, cap=True):
    """State after letting ``d`` time units pass, or None if the delay is not allowed.

    Invariants must hold at every integer point on the way and no urgent step
    may be enabled before the last point.
    """
    if d < 0:
        raise ValueError("negative delay")
    limit = net.max_constant + 1
    cur = s
    for _ in range(d):
        if urgent_enabled(net, cur):
            return None
        clocks = tuple(min(v + 1, limit) if cap else v + 1 for v in cur.clocks)
        nxt = NetworkState(cur.nodes, clocks, cur.env)
        if not invariants_hold(net, nxt):
            return None
        cur = nxt
    return cur


def decoration(net, s):
    """Union of the V, S and P sets of the current nodes."""
    V, S, P = set(), set(), set()
    for a, nid in zip(net.automata, s.nodes):
        n = a.node(nid)
        V |= n.V
        S |= n.S
        P |= n.P
    return frozenset(V), frozenset(S), frozenset(P)


# -- .nta interchange --------------------------------------------------------

def _sorted(xs):
    return sorted(xs, key=str)


def network_to_dict(net):
    d = {
        "clocks": list(net.clocks),
        "channels": _sorted(net.channels),
        "silent_channels": _sorted(net.silent_channels),
        "variables": [{"name": v, "domain": list(dom)} for v, dom in net.variables],
        "automata": [],
    }
    for a in net.automata:
        d["automata"].append({
            "name": a.name,
            "initial": a.initial,
            "nodes": [{
                "id": n.id,
                "invariant": str(n.invariant),
                "V": _sorted(n.V),
                "S": _sorted(n.S),
                "P": _sorted(n.P),
                "final": n.final,
            } for n in a.nodes],
            "edges": [{
                "src": e.src,
                "dst": e.dst,
                "clock_guard": str(e.clock_guard),
                "data_guard": "" if e.data_guard == TRUE else guard_to_str(e.data_guard),
                "label": str(e.label),
                "resets": list(e.resets),
                "urgent": e.urgent,
            } for e in a.edges],
        })
    if net.contract is not None:
        d["contract"] = net.contract
    return d


def write_network(net):
    return json.dumps(network_to_dict(net), indent=2, ensure_ascii=False) + "\n"


def _req(obj, key, path, kind):
    if not isinstance(obj, dict):
        raise FormatError(path, "expected an object")
    if key not in obj:
        raise FormatError(path, "missing field %r" % key)
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise FormatError("%s.%s" % (path, key) if path else key, "expected %s" % kind.__name__)
    return v


def _opt(obj, key, default, path, kind):
    if key not in obj:
        return default
    return _req(obj, key, path, kind)


def _names(xs, path):
    if not isinstance(xs, list) or not all(isinstance(x, str) for x in xs):
        raise FormatError(path, "expected a list of names")
    return frozenset(xs)


def network_from_dict(d):
    if not isinstance(d, dict):
        raise FormatError("", "top level must be an object")
    clocks = _req(d, "clocks", "", list)
    if not all(isinstance(c, str) for c in clocks):
        raise FormatError("clocks", "expected a list of names")
    channels = _names(_opt(d, "channels", [], "", list), "channels")
    silent = _names(_opt(d, "silent_channels", [], "", list), "silent_channels")
    variables = []
    for k, v in enumerate(_opt(d, "variables", [], "", list)):
        p = "variables[%d]" % k
        name = _req(v, "name", p, str)
        dom = _req(v, "domain", p, list)
        if not dom:
            raise FormatError(p + ".domain", "empty domain")
        variables.append((name, tuple(dom)))
    autos = _req(d, "automata", "", list)
    if not autos:
        raise FormatError("automata", "a network needs at least one automaton")
    clock_set = set(clocks)
    out = []
    for ai, ad in enumerate(autos):
        ap = "automata[%d]" % ai
        nodes = []
        for ni, nd in enumerate(_req(ad, "nodes", ap, list)):
            np_ = "%s.nodes[%d]" % (ap, ni)
            inv = _constraint(_opt(nd, "invariant", "", np_, str), np_ + ".invariant", clock_set)
            nodes.append(Node(
                _req(nd, "id", np_, str), inv,
                _names(_opt(nd, "V", [], np_, list), np_ + ".V"),
                _names(_opt(nd, "S", [], np_, list), np_ + ".S"),
                _names(_opt(nd, "P", [], np_, list), np_ + ".P"),
                bool(_opt(nd, "final", False, np_, bool)),
            ))
        edges = []
        for ei, ed in enumerate(_req(ad, "edges", ap, list)):
            ep = "%s.edges[%d]" % (ap, ei)
            try:
                label = ActionLabel.parse(_req(ed, "label", ep, str))
            except ValueError as exc:
                raise FormatError(ep + ".label", str(exc)) from None
            if label.kind == "sync":
                raise FormatError(ep + ".label", "sync labels only appear in traces")
            if label.is_sync_half and label.name not in channels:
                raise FormatError(ep + ".label", "undeclared channel %r" % label.name)
            try:
                dg = parse_guard(_opt(ed, "data_guard", "", ep, str))
            except GuardSyntaxError as exc:
                raise FormatError(ep + ".data_guard", str(exc)) from None
            resets = _opt(ed, "resets", [], ep, list)
            for c in resets:
                if c not in clock_set:
                    raise FormatError(ep + ".resets", "unknown clock %r" % c)
            edges.append(Edge(
                _req(ed, "src", ep, str), _req(ed, "dst", ep, str), label,
                _constraint(_opt(ed, "clock_guard", "", ep, str), ep + ".clock_guard", clock_set),
                dg, tuple(resets), bool(_opt(ed, "urgent", False, ep, bool)),
            ))
        try:
            out.append(TimedAutomaton(_opt(ad, "name", "A%d" % ai, ap, str), tuple(nodes),
                                      _req(ad, "initial", ap, str), tuple(edges)))
        except ValueError as exc:
            raise FormatError(ap, str(exc)) from None
    declared = {v for v, _ in variables}
    for ai, a in enumerate(out):
        for ei, e in enumerate(a.edges):
            missing = guard_vars(e.data_guard) - declared
            if missing:
                raise FormatError("automata[%d].edges[%d].data_guard" % (ai, ei),
                                  "undeclared variable %s" % ", ".join(sorted(missing)))
    contract = d.get("contract")
    return Network(tuple(out), tuple(clocks), channels, silent, tuple(variables), contract)


def _constraint(text, path, clocks):
    try:
        cc = ClockConstraint.parse(text)
    except ValueError as exc:
        raise FormatError(path, str(exc)) from None
    unknown = cc.clocks() - clocks
    if unknown:
        raise FormatError(path, "unknown clock %s" % ", ".join(sorted(unknown)))
    return cc


def read_network(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("", "not JSON: %s" % exc) from None
    return network_from_dict(d)


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return read_network(fh.read())
