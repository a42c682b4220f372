"""Timed traces over a network: membership, V/S/P families, classification, enumeration, hiding.

A trace event ``(a, d)`` means: let ``d`` time units pass, interleaved with
any silent steps, then perform the visible action ``a``.  Delays are
integers (digitised semantics).

Judgments are read where a run settles.  After the last event the network
may still take silent steps (join a sequence, decline a permission, meet at
the end of an And); the families are the decorations of the *quiescent*
states reachable that way, i.e. states from which no silent step is possible
now or after waiting.  A trace is *maximal* when some such continuation
reaches a state from which no visible action can ever happen again.
"""

from dataclasses import dataclass

from .nta import decoration, delay_successor, discrete_successors, initial_states


class UnknownAction(ValueError):
    pass


class TraceNotInNetwork(ValueError):
    pass


class HorizonTooSmall(RuntimeError):
    pass


class TraceSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class TimedTrace:
    events: tuple = ()

    @classmethod
    def of(cls, *pairs):
        return cls(tuple((str(a), int(d)) for a, d in pairs))

    @classmethod
    def parse(cls, text):
        """Parse ``[a1 3 a3 8]``, ``a1 3 a3 8`` or one ``action delay`` pair per line."""
        body = text.split("#", 1)[0] if "\n" not in text else "\n".join(l.split("#", 1)[0] for l in text.splitlines())
        body = body.strip()
        if body.startswith("[") and body.endswith("]"):
            body = body[1:-1]
        toks = body.replace(",", " ").split()
        if len(toks) % 2:
            raise TraceSyntaxError("odd number of tokens in trace %r" % text.strip())
        events = []
        for a, d in zip(toks[::2], toks[1::2]):
            try:
                dv = int(d)
            except ValueError:
                raise TraceSyntaxError("delay %r is not an integer" % d) from None
            if dv < 0:
                raise TraceSyntaxError("negative delay %d" % dv)
            events.append((a, dv))
        return cls(tuple(events))

    def __str__(self):
        return "[%s]" % " ".join("%s %d" % e for e in self.events)

    def to_file(self):
        return "".join("%s %d\n" % e for e in self.events)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def duration(self):
        return sum(d for _, d in self.events)

    def prefixes(self):
        return [TimedTrace(self.events[:i]) for i in range(len(self.events) + 1)]

    def concat(self, other):
        return TimedTrace(self.events + tuple(other.events))

    def __le__(self, other):
        """Subtrace (prefix) order."""
        return other.events[:len(self.events)] == self.events

    def sort_key(self):
        return (len(self.events), self.events)


def concat(t1, t2):
    return t1.concat(t2)


def subtrace_prefixes(t):
    return t.prefixes()


def hide_trace(t, visible):
    """Keep events whose action is in ``visible``; fold hidden delays into the next kept event."""
    out = []
    pending = 0
    for a, d in t.events:
        if a in visible and a not in ("tau", "τ"):
            out.append((a, d + pending))
            pending = 0
        else:
            pending += d
    return TimedTrace(tuple(out))


@dataclass(frozen=True)
class TraceEvaluation:
    end_states: frozenset
    V: frozenset
    S: frozenset
    P: frozenset

    @property
    def member(self):
        return bool(self.end_states)


@dataclass(frozen=True)
class TraceClass:
    maximal: bool
    good: bool
    clean: bool


class Engine:
    """Memoising explorer for one network."""

    def __init__(self, net):
        self.net = net
        self.alphabet = net.alphabet()
        self._steps = {}
        self._delay = {}
        self._reach = {(): frozenset(initial_states(net))}
        self._live = {}
        self._quiet = {}

    # single steps

    def steps(self, s):
        r = self._steps.get(s)
        if r is None:
            silent, visible = [], {}
            for label, t in discrete_successors(self.net, s):
                name = self.net.visible_name(label)
                if name is None:
                    silent.append(t)
                else:
                    visible.setdefault(name, []).append(t)
            r = (tuple(silent), visible)
            self._steps[s] = r
        return r

    def delay1(self, s):
        if s not in self._delay:
            self._delay[s] = delay_successor(self.net, s, 1)
        return self._delay[s]

    def silent_closure(self, states):
        seen = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for t in self.steps(s)[0]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    def frontiers(self, states, max_d):
        """Yield (d, states reachable after exactly d time units and silent steps)."""
        frontier = self.silent_closure(states)
        for d in range(max_d + 1):
            if d:
                nxt = {self.delay1(s) for s in frontier}
                nxt.discard(None)
                frontier = self.silent_closure(nxt)
            if not frontier:
                return
            yield d, frontier

    # traces

    def check_actions(self, t):
        for a, _ in t.events:
            if a not in self.alphabet:
                raise UnknownAction("action %r is not in the network's alphabet" % a)

    def reach(self, events):
        """States right after the last event of ``events`` (empty set: not a trace)."""
        events = tuple(events)
        hit = self._reach.get(events)
        if hit is not None:
            return hit
        prev = self.reach(events[:-1])
        a, d = events[-1]
        out = set()
        if prev:
            for dd, frontier in self.frontiers(prev, d):
                if dd == d:
                    for s in frontier:
                        out.update(self.steps(s)[1].get(a, ()))
        out = frozenset(out)
        self._reach[events] = out
        return out

    def weak_closure(self, states):
        """States reachable by silent steps and waiting; returns (states, successor map)."""
        succ = {}
        stack = list(states)
        seen = set(states)
        while stack:
            s = stack.pop()
            nxt = list(self.steps(s)[0])
            t = self.delay1(s)
            if t is not None and t != s:
                nxt.append(t)
            succ[s] = nxt
            for t in nxt:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen, succ

    def quiescent(self, s):
        chain = []
        cur = s
        while True:
            if cur in self._quiet:
                result = self._quiet[cur]
                break
            chain.append(cur)
            if self.steps(cur)[0]:
                result = False
                break
            nxt = self.delay1(cur)
            if nxt is None or nxt == cur:
                result = True
                break
            cur = nxt
        # a state is quiescent only if every state on its waiting chain is
        for c in reversed(chain):
            if self.steps(c)[0]:
                result = False
            self._quiet[c] = result
        return self._quiet[s]

    def _reaches_live(self, closure, succ):
        known = {s: self._live[s] for s in closure if s in self._live}
        live = {s for s in closure if known.get(s) or (s not in known and self.steps(s)[1])}
        pred = {}
        for s, ts in succ.items():
            for t in ts:
                pred.setdefault(t, []).append(s)
        stack = list(live)
        while stack:
            t = stack.pop()
            for s in pred.get(t, ()):
                if s not in live:
                    live.add(s)
                    stack.append(s)
        for s in closure:
            self._live[s] = s in live
        return live

    def families(self, states):
        if not states:
            return frozenset(), frozenset(), frozenset()
        closure, _ = self.weak_closure(states)
        settled = [s for s in closure if self.quiescent(s)] or list(states)
        decos = [decoration(self.net, s) for s in settled]
        return (frozenset(d[0] for d in decos), frozenset(d[1] for d in decos),
                frozenset(d[2] for d in decos))

    def is_maximal_states(self, states):
        if not states:
            return False
        closure, succ = self.weak_closure(states)
        live = self._reaches_live(closure, succ)
        return len(live) < len(closure)

    def evaluate(self, t):
        self.check_actions(t)
        end = self.reach(t.events)
        V, S, P = self.families(end)
        return TraceEvaluation(end, V, S, P)

    def is_member(self, t):
        return bool(self.reach(t.events))

    def is_maximal(self, t):
        return self.is_maximal_states(self.reach(t.events))

    def classify(self, t):
        self.check_actions(t)
        end = self.reach(t.events)
        if not end:
            raise TraceNotInNetwork("%s is not a trace of the network" % t)
        maximal = self.is_maximal_states(end)
        V, S, _ = self.families(end)
        good = maximal and all(S) and not any(V)
        clean = all(self.families(self.reach(p.events))[0] == {frozenset()} for p in t.prefixes())
        return TraceClass(maximal, good, clean)

    def children(self, events, horizon):
        """Visible one-event extensions of ``events`` within the horizon."""
        states = self.reach(events)
        elapsed = sum(d for _, d in events)
        out = {}
        for d, frontier in self.frontiers(states, horizon - elapsed):
            for s in frontier:
                for a, ts in self.steps(s)[1].items():
                    out.setdefault((a, d), set()).update(ts)
        for key, ts in out.items():
            ev = tuple(events) + (key,)
            if ev not in self._reach:
                self._reach[ev] = frozenset(ts)
        return sorted(out)

    def enumerate_maximal(self, horizon, strict=True, limit=None):
        found = []
        stack = [()]
        while stack:
            ev = stack.pop()
            kids = self.children(ev, horizon)
            maximal = self.is_maximal_states(self.reach(ev))
            if maximal:
                found.append(TimedTrace(ev))
            elif not kids and strict:
                raise HorizonTooSmall("trace %s cannot be completed within horizon %d"
                                      % (TimedTrace(ev), horizon))
            for k in reversed(kids):
                stack.append(ev + (k,))
        found.sort(key=TimedTrace.sort_key)
        if limit is not None:
            found = found[:limit]
        return found

    def enumerate_traces(self, horizon):
        """Every trace (maximal or not) of total duration <= horizon, prefix-closed."""
        found = []
        stack = [()]
        while stack:
            ev = stack.pop()
            found.append(TimedTrace(ev))
            for k in self.children(ev, horizon):
                stack.append(ev + (k,))
        found.sort(key=TimedTrace.sort_key)
        return found


_ENGINES = {}


def engine_for(net):
    e = _ENGINES.get(id(net))
    if e is None or e.net is not net:
        e = Engine(net)
        _ENGINES[id(net)] = e
    return e


def run_trace(net, t):
    return engine_for(net).evaluate(t)


def classify_trace(net, t):
    return engine_for(net).classify(t)


def enumerate_maximal_traces(net, horizon, strict=True, limit=None):
    """Maximal digitised traces of duration <= horizon, in length-lexicographic order."""
    yield from engine_for(net).enumerate_maximal(horizon, strict, limit)
