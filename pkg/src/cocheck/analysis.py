"""Consistency, conformance and the permission preorder over a compiled contract."""

import time
from dataclasses import dataclass, field
from typing import Optional

from .compiler import CompilationUnit, default_horizon, norm_index_from_network
from .traces import TimedTrace, engine_for, hide_trace


class ContractInconsistent(RuntimeError):
    def __init__(self, verdict):
        super().__init__("contract is not consistent (missing: %s)" % (", ".join(verdict.missing) or "-"))
        self.verdict = verdict


class NotConformant(RuntimeError):
    def __init__(self, which, verdict):
        super().__init__("implementation %s does not conform to the contract" % which)
        self.which = which
        self.verdict = verdict


# -- implementations ---------------------------------------------------------

@dataclass(frozen=True)
class TraceSet:
    """Implementation given by its maximal traces; its trace set is their prefix closure."""
    traces: tuple
    name: str = "traces"

    def __post_init__(self):
        if not self.traces:
            raise ValueError("a trace-set implementation needs at least one trace")
        object.__setattr__(self, "traces", tuple(self.traces))

    def all_traces(self, horizon=None):
        out = set()
        for t in self.traces:
            out.update(t.prefixes())
        return sorted(out, key=TimedTrace.sort_key)

    def visible(self, contract_alphabet):
        return frozenset(contract_alphabet)


@dataclass(frozen=True)
class NetworkImpl:
    network: object
    visible_actions: frozenset = None
    name: str = "network"

    def all_traces(self, horizon):
        return engine_for(self.network).enumerate_traces(horizon)

    def visible(self, contract_alphabet):
        if self.visible_actions is None:
            return frozenset(contract_alphabet)
        return frozenset(self.visible_actions)


def parse_traces(text):
    """A ``.traces`` file: one trace per line, ``[]`` for the empty trace, ``#`` comments."""
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(TimedTrace.parse(line))
    return out


def format_traces(traces):
    return "".join(str(t) + "\n" for t in traces)


# -- verdicts ----------------------------------------------------------------

@dataclass
class Verdict:
    relation: str
    holds: bool
    witnesses: dict = field(default_factory=dict)       # clause name -> TimedTrace
    counterexamples: list = field(default_factory=list)  # (TimedTrace, clause name)
    horizon: Optional[int] = None
    conditions: dict = field(default_factory=dict)
    missing: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    elapsed_ms: Optional[float] = None
    aliases: dict = field(default_factory=dict, compare=False)

    @property
    def per_cn_evidence(self):
        return self.witnesses

    @property
    def violations_unrepaired(self):
        return self.counterexamples

    def to_dict(self, timing=False):
        return {
            "relation": self.relation,
            "holds": self.holds,
            "witnesses": {k: str(t) for k, t in sorted(self.witnesses.items())},
            "counterexamples": [{"trace": str(t), "clause": cn} for t, cn in self.counterexamples],
            "horizon": self.horizon,
            "conditions": dict(sorted(self.conditions.items())),
            "missing": list(self.missing),
            "notes": list(self.notes),
            "elapsed_ms": round(self.elapsed_ms, 3) if timing and self.elapsed_ms is not None else None,
            "aliases": dict(sorted(self.aliases.items())),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            relation=d["relation"],
            holds=d["holds"],
            witnesses={k: TimedTrace.parse(v) for k, v in d.get("witnesses", {}).items()},
            counterexamples=[(TimedTrace.parse(c["trace"]), c["clause"]) for c in d.get("counterexamples", [])],
            horizon=d.get("horizon"),
            conditions=dict(d.get("conditions", {})),
            missing=list(d.get("missing", [])),
            notes=list(d.get("notes", [])),
            elapsed_ms=d.get("elapsed_ms"),
            aliases=dict(d.get("aliases", {})),
        )


@dataclass(frozen=True)
class PreorderResult:
    i2_le_i1: bool
    i1_le_i2: bool
    verdict: Verdict = field(compare=False, default=None)

    @property
    def order(self):
        if self.i2_le_i1 and self.i1_le_i2:
            return "equivalent"
        if self.i1_le_i2:
            return "<="
        if self.i2_le_i1:
            return ">="
        return "incomparable"


# -- helpers -----------------------------------------------------------------

def _network(c):
    return c.network if isinstance(c, CompilationUnit) else c


class _Contract:
    """Cached per-trace facts about the contract network."""

    def __init__(self, c, horizon):
        self.net = _network(c)
        self.engine = engine_for(self.net)
        self.index = norm_index_from_network(self.net)
        self.horizon = default_horizon(self.net) if horizon is None else horizon
        self.alphabet = self.net.alphabet()
        self._eval = {}
        self._cls = {}

    def evaluate(self, t):
        if t in self._eval:
            return self._eval[t]
        r = None
        if all(a in self.alphabet for a, _ in t.events):
            r = self.engine.evaluate(t)
            if not r.member:
                r = None
        self._eval[t] = r
        return r

    def classify(self, t):
        """TraceClass of ``t`` in the contract, or None when ``t`` is not a contract trace."""
        if t not in self._cls:
            self._cls[t] = self.engine.classify(t) if self.evaluate(t) else None
        return self._cls[t]

    def satisfied(self, t):
        r = self.evaluate(t)
        out = set()
        if r:
            for s in r.S:
                out |= self.index.satisfied_names(s)
        return out

    def violated(self, t):
        r = self.evaluate(t)
        return set().union(*r.V) if r else set()

    def aliases(self):
        return dict(self.index.aliases)


def _finish(v, t0):
    v.elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return v


# -- consistency -------------------------------------------------------------

def check_consistency(c, horizon=None):
    """Is there a good and clean run, and can every obligation/prohibition be met cleanly?

    A clause that only exists inside a reparation can never be met cleanly,
    because reaching it takes a violation; such a clause counts as witnessed
    by a good run, and the verdict notes it as conditional.
    """
    t0 = time.perf_counter()
    C = _Contract(c, horizon)
    traces = list(C.engine.enumerate_maximal(C.horizon, strict=True))
    good_clean, good = [], []
    for t in traces:
        k = C.classify(t)
        if k.good:
            good.append(t)
            if k.clean:
                good_clean.append(t)
    witnesses, missing, notes = {}, [], []
    for cn in sorted(C.index.CN):
        w = next((t for t in good_clean if cn in C.satisfied(t)), None)
        if w is None and cn in C.index.reparation_names:
            w = next((t for t in good if cn in C.satisfied(t)), None)
            if w is not None:
                notes.append("%s is only reachable through a reparation; witness is good but not clean"
                             % C.index.display(cn))
        if w is None:
            missing.append(cn)
        else:
            witnesses[cn] = w
    cond_i = bool(good_clean)
    cond_ii = not missing
    notes.append("%d maximal traces enumerated, %d good, %d good and clean"
                 % (len(traces), len(good), len(good_clean)))
    v = Verdict("consistency", cond_i and cond_ii, witnesses, [], C.horizon,
                {"good_and_clean_exists": cond_i, "every_clause_met": cond_ii},
                missing, notes, aliases=C.aliases())
    return _finish(v, t0)


# -- conformance -------------------------------------------------------------

def _children_map(traces):
    kids = {}
    for t in traces:
        if t.events:
            kids.setdefault(t.events[:-1], []).append(t)
    return kids


def _descendants(t, kids):
    stack = list(kids.get(t.events, ()))
    while stack:
        u = stack.pop()
        yield u
        stack.extend(kids.get(u.events, ()))


def check_conformance(c, impl, horizon=None, _consistency=None):
    """Does the implementation conform to the contract?

    Condition 1: each obligation/prohibition is met by some implementation
    trace whose visible part is clean or good in the contract.  Condition 2:
    whenever an implementation trace first violates a clause, some extension
    of it reaches a contract trace where that clause is no longer violated.
    """
    t0 = time.perf_counter()
    C = _Contract(c, horizon)
    cons = _consistency or check_consistency(c, C.horizon)
    if not cons.holds:
        raise ContractInconsistent(cons)
    visible = impl.visible(C.alphabet)
    notes = []
    if isinstance(impl, NetworkImpl):
        own = impl.network.alphabet()
        if not visible <= own:
            notes.append("implementation never performs: %s" % ", ".join(sorted(visible - own)))
        notes.append("implementation traces enumerated up to horizon %d" % C.horizon)
    traces = impl.all_traces(C.horizon)
    hidden = {t: hide_trace(t, visible) for t in traces}
    outside = sorted({str(h) for h in hidden.values() if C.evaluate(h) is None})
    if outside:
        notes.append("%d hidden traces are not contract traces, e.g. %s" % (len(outside), outside[0]))

    witnesses = {}
    for t in traces:
        h = hidden[t]
        k = C.classify(h)
        if k is None or not (k.clean or k.good):
            continue
        for cn in C.satisfied(h):
            if cn in C.index.CN and cn not in witnesses:
                witnesses[cn] = t
    missing = sorted(cn for cn in C.index.CN if cn not in witnesses)

    kids = _children_map(traces)
    counter = []
    for t in traces:
        now = C.violated(hidden[t])
        if not now:
            continue
        before = C.violated(hidden[TimedTrace(t.events[:-1])]) if t.events else set()
        for cn in sorted((now - before) & C.index.CN):
            repaired = any(
                C.evaluate(hidden[u]) is not None and cn not in C.violated(hidden[u])
                for u in _descendants(t, kids))
            if not repaired:
                counter.append((t, cn))

    cond1, cond2 = not missing, not counter
    v = Verdict("conformance", cond1 and cond2, witnesses, counter, C.horizon,
                {"every_clause_met": cond1, "violations_repaired": cond2},
                missing, notes, aliases=C.aliases())
    return _finish(v, t0)


# -- permission preorder -----------------------------------------------------

def _clean_permission_families(C, impl, visible):
    out = []
    for t in impl.all_traces(C.horizon):
        r = C.evaluate(hide_trace(t, visible))
        if r is not None and not any(r.V):
            out.append((t, r.P))
    return out


def permission_le(lower, upper):
    """``lower <= upper``: every clean trace of ``lower`` is matched by a clean trace
    of ``upper`` each of whose permission sets includes one of the first's."""
    for _, p2 in lower:
        if not any(all(any(b <= a for b in p2) for a in p1) for _, p1 in upper):
            return False
    return True


def compare_permissions(c, i1, i2, horizon=None):
    t0 = time.perf_counter()
    C = _Contract(c, horizon)
    cons = check_consistency(c, C.horizon)
    if not cons.holds:
        raise ContractInconsistent(cons)
    for which, impl in (("I1", i1), ("I2", i2)):
        v = check_conformance(c, impl, C.horizon, _consistency=cons)
        if not v.holds:
            raise NotConformant("%s (%s)" % (which, impl.name), v)
    f1 = _clean_permission_families(C, i1, i1.visible(C.alphabet))
    f2 = _clean_permission_families(C, i2, i2.visible(C.alphabet))
    le21 = permission_le(f2, f1)
    le12 = permission_le(f1, f2)
    res = PreorderResult(le21, le12)
    v = Verdict("preorder", le21 or le12, {}, [], C.horizon,
                {"i2_le_i1": le21, "i1_le_i2": le12}, [],
                ["I1 %s I2" % res.order], aliases=C.aliases())
    _finish(v, t0)
    return PreorderResult(le21, le12, v)
