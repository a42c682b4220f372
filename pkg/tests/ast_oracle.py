"""Reference semantics that runs a diagram straight off its syntax tree.

No automata and no clocks: a running contract is a term, windows are
countdown budgets that shrink as time passes, and compound actions are
consumed by derivatives.  It shares the observable conventions of the
compiled networks (actions at budget >= 0, timeouts once the budget has run
out, families read at quiescent configurations, maximal = may reach a dead
end) but none of their code.
"""

import itertools

from cocheck.diagram import Atomic, Composite, Norm, NormKind, Refinement, ReparationRef
from cocheck.guards import TRUE, eval_guard

DONE = ("done",)
BREACH = ("breach",)
EPS = ("eps",)

_REF = {Refinement.OR: "or", Refinement.SEQ: "seq", Refinement.AND: "and"}


# -- action expressions as residuals -----------------------------------------

def expr_term(e):
    if isinstance(e, Atomic):
        return ("act", e.action)
    return (_REF[e.refinement], tuple((na.name, expr_term(na.expr), False) for na in e.children))


def derive(e):
    """Steps (action, residual, names newly entered) of a residual expression."""
    kind = e[0]
    if kind == "act":
        return [(e[1], EPS, frozenset())]
    kids = e[1]
    out = []
    if kind == "or":
        for name, sub, _ in kids:
            for a, rest, ns in derive(sub):
                out.append((a, rest, ns | {name}))
        return out
    idxs = [0] if kind == "seq" else range(len(kids))
    for i in idxs:
        name, sub, started = kids[i]
        for a, rest, ns in derive(sub):
            ns = ns if started else ns | {name}
            if rest == EPS:
                nk = kids[:i] + kids[i + 1:]
            else:
                nk = kids[:i] + ((name, rest, True),) + kids[i + 1:]
            out.append((a, (kind, nk) if nk else EPS, ns))
    return out


# -- configurations ----------------------------------------------------------
#
# term forms:
#   ("start", clause, budget, in_rep, reps)     transient
#   ("wait", norm, residual, names, budget, in_rep, reps)
#   ("seq", current, rest clauses, budget, in_rep, reps)
#   ("par", terms)
#   ("rep", current, added, norm name)
#   DONE, BREACH

class Oracle:
    def __init__(self, diagram, env=None):
        self.d = diagram
        self.env = dict(env or {})

    # structure

    def initial(self):
        free = [(v, dom) for v, dom in self.d.variables if v not in self.env]
        out = set()
        for combo in itertools.product(*(dom for _, dom in free)):
            env = dict(self.env)
            env.update({v: val for (v, _), val in zip(free, combo)})
            key = tuple(sorted(env.items(), key=lambda kv: kv[0]))
            empty = (frozenset(), frozenset(), frozenset())
            for term, deco in self.settle(("start", self.d.root, None, False, ()), empty, env):
                out.add((key, term, deco))
        return out

    def settle(self, t, deco, env):
        """Run every step that happens at once, without time passing and without a choice of the environment."""
        kind = t[0]
        if kind == "start":
            _, c, budget, in_rep, reps = t
            if c.guard != TRUE and eval_guard(c.guard, env) is False:
                return [(DONE, deco)]
            if c.time is not None:
                budget = c.time.bound
            if isinstance(c, Norm):
                return [(("wait", c, expr_term(c.body), frozenset(), budget, in_rep, reps), deco)]
            starts = [("start", ch, budget, in_rep, reps) for ch in c.children]
            if c.refinement is Refinement.OR:
                return [r for s in starts for r in self.settle(s, deco, env)]
            if c.refinement is Refinement.SEQ:
                return self.settle(("seq", starts[0], tuple(c.children[1:]), budget, in_rep, reps), deco, env)
            return self.settle(("par", tuple(starts)), deco, env)
        if kind == "seq":
            _, cur, rest, budget, in_rep, reps = t
            out = []
            for c2, d2 in self.settle(cur, deco, env):
                if c2 == DONE and rest:
                    nxt = ("seq", ("start", rest[0], budget, in_rep, reps), rest[1:], budget, in_rep, reps)
                    out.extend(self.settle(nxt, d2, env))
                elif c2 == DONE:
                    out.append((DONE, d2))
                else:
                    out.append((("seq", c2, rest, budget, in_rep, reps), d2))
            return out
        if kind == "par":
            partial = [((), deco)]
            for sub in t[1]:
                nxt = []
                for done, d in partial:
                    for s2, d2 in self.settle(sub, d, env):
                        nxt.append((done + (s2,), d2))
                partial = nxt
            return [((DONE if all(s == DONE for s in subs) else ("par", subs)), d) for subs, d in partial]
        if kind == "rep":
            _, cur, added, name = t
            out = []
            for c2, d2 in self.settle(cur, deco, env):
                if c2 == DONE:
                    V, S, P = d2
                    out.append((DONE, (V - added, S | (added or frozenset([name])), P)))
                else:
                    out.append((("rep", c2, added, name), d2))
            return out
        return [(t, deco)]

    def violate(self, norm, blamed, in_rep, reps, deco):
        V, S, P = deco
        added = frozenset() if in_rep else frozenset(blamed)
        deco = (V | added, S, P)
        if norm.reparation is None:
            return BREACH, deco
        rep = self.d.resolve(norm.reparation)
        key = norm.reparation.name if isinstance(norm.reparation, ReparationRef) else id(rep)
        if key in reps:
            raise RecursionError("reparation cycle at %s" % norm.name)
        return ("rep", ("start", rep, None, True, reps + (key,)), added, norm.name), deco

    def wait_moves(self, w, deco):
        """(label or None for silent, new term, new deco) for one waiting norm."""
        _, norm, e, names, budget, in_rep, reps = w
        V, S, P = deco
        out = []
        open_ = budget is None or budget >= 0
        if norm.kind is NormKind.P:
            out.append((None, DONE, deco))
        if open_:
            for a, rest, ns in derive(e):
                nm = names | ns
                if rest != EPS:
                    out.append((a, ("wait", norm, rest, nm, budget, in_rep, reps), deco))
                    continue
                judged = nm or frozenset([norm.name])
                if norm.kind is NormKind.O:
                    out.append((a, DONE, (V, S | judged, P)))
                elif norm.kind is NormKind.P:
                    out.append((a, DONE, (V, S, P | judged)))
                else:
                    t, d = self.violate(norm, judged, in_rep, reps, deco)
                    out.append((a, t, d))
        elif norm.kind is not NormKind.P:
            for a in sorted({a for a, _, _ in derive(e)}):
                if norm.kind is NormKind.O:
                    t, d = self.violate(norm, [norm.name], in_rep, reps, deco)
                    out.append(("!" + a, t, d))
                else:
                    out.append(("!" + a, DONE, (V, S | {norm.name}, P)))
        return out

    def moves(self, t, deco):
        """Single-thread moves, with the rest of the term rebuilt around them."""
        kind = t[0]
        if kind == "wait":
            return self.wait_moves(t, deco)
        if kind == "seq":
            return [(lab, ("seq", c2) + t[2:], d2) for lab, c2, d2 in self.moves(t[1], deco)]
        if kind == "rep":
            return [(lab, ("rep", c2, t[2], t[3]), d2) for lab, c2, d2 in self.moves(t[1], deco)]
        if kind == "par":
            out = []
            subs = t[1]
            for i, s in enumerate(subs):
                for lab, c2, d2 in self.moves(s, deco):
                    out.append((lab, ("par", subs[:i] + (c2,) + subs[i + 1:]), d2))
            return out
        return []

    def steps(self, cfg):
        """Silent and visible successors of a settled configuration."""
        env_key, t, deco = cfg
        env = dict(env_key)
        silent, visible = set(), {}
        for lab, t2, d2 in self.moves(t, deco):
            for t3, d3 in self.settle(t2, d2, env):
                nxt = (env_key, t3, d3)
                if lab is None:
                    silent.add(nxt)
                else:
                    visible.setdefault(lab, set()).add(nxt)
        return silent, visible

    # time

    def _budgets_ok(self, t):
        kind = t[0]
        if kind == "wait":
            return t[4] is None or t[4] >= 0
        if kind in ("seq", "rep"):
            return self._budgets_ok(t[1])
        if kind == "par":
            return all(self._budgets_ok(s) for s in t[1])
        return True

    def _tick(self, t):
        kind = t[0]
        dec = (lambda b: None if b is None else max(b - 1, -1))
        if kind == "wait":
            return t[:4] + (dec(t[4]),) + t[5:]
        if kind == "seq":
            return ("seq", self._tick(t[1]), t[2], dec(t[3])) + t[4:]
        if kind == "rep":
            return ("rep", self._tick(t[1])) + t[2:]
        if kind == "par":
            return ("par", tuple(self._tick(s) for s in t[1]))
        return t

    def tick(self, cfg):
        env_key, t, deco = cfg
        if not self._budgets_ok(t):
            return None
        return (env_key, self._tick(t), deco)

    # derived notions

    def silent_closure(self, cfgs):
        seen = set(cfgs)
        stack = list(cfgs)
        while stack:
            c = stack.pop()
            for n in self.steps(c)[0]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen

    def after(self, trace):
        cur = self.initial()
        for a, d in trace:
            frontier = self.silent_closure(cur)
            for _ in range(d):
                frontier = self.silent_closure({n for n in map(self.tick, frontier) if n is not None})
            cur = set()
            for c in frontier:
                cur |= self.steps(c)[1].get(a, set())
            if not cur:
                return set()
        return cur

    def closure_graph(self, cfgs):
        succ = {}
        stack = list(cfgs)
        seen = set(cfgs)
        while stack:
            c = stack.pop()
            nxt = set(self.steps(c)[0])
            n = self.tick(c)
            if n is not None and n != c:
                nxt.add(n)
            succ[c] = nxt
            for n in nxt:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return succ

    def _has_waiting_permission(self, t):
        kind = t[0]
        if kind == "wait":
            return t[1].kind is NormKind.P
        if kind in ("seq", "rep"):
            return self._has_waiting_permission(t[1])
        if kind == "par":
            return any(self._has_waiting_permission(s) for s in t[1])
        return False

    def families(self, cfgs):
        succ = self.closure_graph(cfgs)
        quiet = [c for c in succ if not self._has_waiting_permission(c[1])] or list(cfgs)
        return (frozenset(c[2][0] for c in quiet), frozenset(c[2][1] for c in quiet),
                frozenset(c[2][2] for c in quiet))

    def maximal(self, cfgs):
        succ = self.closure_graph(cfgs)
        live = {c for c in succ if self.steps(c)[1]}
        changed = True
        while changed:
            changed = False
            for c, ns in succ.items():
                if c not in live and ns & live:
                    live.add(c)
                    changed = True
        return len(live) < len(succ)

    def maximal_traces(self, horizon):
        out = []

        def walk(trace, cfgs, elapsed):
            if self.maximal(cfgs):
                out.append(tuple(trace))
            frontier = self.silent_closure(cfgs)
            for d in range(horizon - elapsed + 1):
                if d:
                    frontier = self.silent_closure({n for n in map(self.tick, frontier) if n is not None})
                if not frontier:
                    break
                by_label = {}
                for c in frontier:
                    for a, ns in self.steps(c)[1].items():
                        by_label.setdefault(a, set()).update(ns)
                for a in sorted(by_label):
                    walk(trace + [(a, d)], by_label[a], elapsed + d)

        walk([], self.initial(), 0)
        return sorted(out, key=lambda t: (len(t), t))
