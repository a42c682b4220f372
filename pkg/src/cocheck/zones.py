"""Difference-bound matrices for closed (non-strict) clock zones.

Entry ``D[i, j]`` bounds ``x_i - x_j <= D[i, j]`` where index 0 is the
constant-zero clock.  Only non-strict bounds occur, so a bound is a plain
integer and ``INF`` stands for "unbounded".
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .guards import TRUE, eval_guard

INF = np.int64(1 << 40)


class Zone:
    """Canonical DBM over ``n`` clocks.  Treat instances as immutable."""

    __slots__ = ("clocks", "D", "_key")

    def __init__(self, clocks, D, canonical=False):
        self.clocks = tuple(clocks)
        D = np.array(D, dtype=np.int64)
        self.D = D if canonical else canonicalize(D)
        self.D.setflags(write=False)
        self._key = None

    @classmethod
    def zero(cls, clocks):
        n = len(clocks) + 1
        return cls(clocks, np.zeros((n, n), dtype=np.int64), canonical=True)

    @classmethod
    def universe(cls, clocks):
        n = len(clocks) + 1
        D = np.full((n, n), INF, dtype=np.int64)
        np.fill_diagonal(D, 0)
        D[0, :] = 0     # every clock is >= 0
        return cls(clocks, D)

    def is_empty(self):
        return bool(self.D[0, 0] < 0)

    def key(self):
        if self._key is None:
            self._key = (self.clocks, self.D.tobytes())
        return self._key

    def __eq__(self, other):
        return isinstance(other, Zone) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        if self.is_empty():
            return "Zone(empty)"
        parts = []
        for i, c in enumerate(self.clocks, 1):
            lo = -int(self.D[0, i])
            hi = self.D[i, 0]
            parts.append("%d<=%s%s" % (lo, c, "" if hi >= INF else "<=%d" % hi))
        return "Zone(%s)" % ", ".join(parts)

    def index(self, clock):
        return self.clocks.index(clock) + 1

    def contains(self, valuation):
        """Membership test for a point given as a tuple aligned with ``clocks``."""
        if self.is_empty():
            return False
        x = np.concatenate(([0], np.asarray(valuation, dtype=np.int64)))
        return bool(np.all(x[:, None] - x[None, :] <= self.D))

    # operations, each returning a new canonical zone

    def up(self):
        if self.is_empty():
            return self
        D = self.D.copy()
        D[1:, 0] = INF
        return Zone(self.clocks, D, canonical=True)

    def constrain(self, constraint):
        """Intersect with a ClockConstraint."""
        if self.is_empty() or not constraint:
            return self
        D = self.D.copy()
        for clock, op, c in constraint.atoms:
            i = self.index(clock)
            if op in ("<=", "=="):
                D[i, 0] = min(D[i, 0], c)
            if op in (">=", "=="):
                D[0, i] = min(D[0, i], -c)
        return Zone(self.clocks, D)

    def reset(self, clocks):
        if self.is_empty() or not clocks:
            return self
        D = self.D.copy()
        for clock in clocks:
            i = self.index(clock)
            D[i, :] = D[0, :]
            D[:, i] = D[:, 0]
            D[i, i] = 0
        return Zone(self.clocks, D, canonical=True)

    def extrapolate(self, m):
        """Classical maximal-constant abstraction with one global bound ``m``."""
        if self.is_empty():
            return self
        D = self.D.copy()
        n = D.shape[0]
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if i != 0 and D[i, j] > m:
                    D[i, j] = INF
                elif D[i, j] < -m:
                    # strict < -m, closed over the integers as <= -(m + 1)
                    D[i, j] = -(m + 1)
        return Zone(self.clocks, D)

    def integer_points(self, limit):
        """Integer valuations of the zone with every clock <= ``limit``."""
        if self.is_empty():
            return []
        ranges = []
        for i in range(1, len(self.clocks) + 1):
            lo = max(0, -int(self.D[0, i]))
            hi = min(limit, int(self.D[i, 0]))
            ranges.append(range(lo, hi + 1))
        return [p for p in itertools.product(*ranges) if self.contains(p)]


def canonicalize(D):
    """Floyd-Warshall closure; an empty zone comes back as the designated empty DBM."""
    D = np.array(D, dtype=np.int64, copy=True)
    n = D.shape[0]
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
        np.minimum(D, INF, out=D)
    if np.any(np.diag(D) < 0):
        return empty_dbm(n)
    return D


def empty_dbm(n):
    D = np.zeros((n, n), dtype=np.int64)
    D[0, 0] = -1
    return D


# -- symbolic network states -------------------------------------------------

@dataclass(frozen=True)
class SymbolicState:
    nodes: tuple
    zone: Zone
    env: tuple = ()


def _invariant(net, nodes):
    inv = None
    for a, nid in zip(net.automata, nodes):
        c = a.node(nid).invariant
        inv = c if inv is None else inv.conj(c)
    return inv


def _urgent_blocks(net, s):
    env = {v: s.env[i] for v, i in net.var_index.items()}
    for a, nid in zip(net.automata, s.nodes):
        for e in a.out_edges(nid):
            if not e.urgent or e.label.is_sync_half:
                continue
            if e.clock_guard:
                raise ValueError("urgent edges with clock guards are not supported symbolically")
            if e.data_guard == TRUE or eval_guard(e.data_guard, env) is not False:
                return True
    return False


def zone_post(net, s, step):
    """Symbolic successor of ``s``.

    ``step`` is ``"delay"`` or a list of (automaton index, Edge) moved
    together (one edge, or an output/input pair).  The result may carry an
    empty zone, which means the step is infeasible.
    """
    if step == "delay":
        if _urgent_blocks(net, s):
            return s
        z = s.zone.up().constrain(_invariant(net, s.nodes))
        return SymbolicState(s.nodes, z, s.env)
    z = s.zone
    nodes = list(s.nodes)
    resets = []
    for i, e in step:
        z = z.constrain(e.clock_guard)
        nodes[i] = e.dst
        resets.extend(e.resets)
    z = z.reset(resets).constrain(_invariant(net, nodes))
    return SymbolicState(tuple(nodes), z, s.env)


def symbolic_moves(net, s):
    env = {v: s.env[i] for v, i in net.var_index.items()}
    enabled = []
    for i, (a, nid) in enumerate(zip(net.automata, s.nodes)):
        for e in a.out_edges(nid):
            if e.data_guard == TRUE or eval_guard(e.data_guard, env) is not False:
                enabled.append((i, e))
    moves = [[(i, e)] for i, e in enabled if not e.label.is_sync_half]
    for i, eo in enabled:
        if eo.label.kind != "output":
            continue
        for j, ei in enabled:
            if ei.label.kind == "input" and i != j and ei.label.name == eo.label.name:
                moves.append([(i, eo), (j, ei)])
    return moves


def reachable_zones(net, extrapolate=True):
    """Zone-graph exploration; returns the set of reachable delay-closed symbolic states."""
    doms = [dom for _, dom in net.variables]
    start = []
    for combo in itertools.product(*doms):
        nodes = tuple(a.initial for a in net.automata)
        z = Zone.zero(net.clocks).constrain(_invariant(net, nodes))
        if not z.is_empty():
            start.append(SymbolicState(nodes, z, tuple(combo)))
    m = net.max_constant
    seen = set()
    stack = []

    def push(s):
        s = zone_post(net, s, "delay")
        if extrapolate:
            s = SymbolicState(s.nodes, s.zone.extrapolate(m), s.env)
        if s.zone.is_empty() or s in seen:
            return
        seen.add(s)
        stack.append(s)

    for s in start:
        push(s)
    while stack:
        s = stack.pop()
        for mv in symbolic_moves(net, s):
            t = zone_post(net, s, mv)
            if not t.zone.is_empty():
                push(t)
    return seen


def concrete_in_zones(net, state, zones):
    """True if the concrete state lies in some symbolic state with the same locations."""
    for z in zones:
        if z.nodes == state.nodes and z.env == state.env and z.zone.contains(state.clocks):
            return True
    return False
