"""C-O Diagram abstract syntax, the ``.cod`` text format, and well-formedness checks.

A diagram is a clause tree.  Leaves are norms (obligation, permission,
prohibition) over an action expression; inner nodes are And/Or/Seq
composites.  Reparations are clauses entered when an obligation or
prohibition is violated, given inline or by reference to a named
definition.
"""

import enum
import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .guards import GuardSyntaxError, TRUE, guard_to_str, guard_vars, parse_guard


class NormKind(str, enum.Enum):
    O = "obligation"
    P = "permission"
    F = "prohibition"


class Refinement(str, enum.Enum):
    AND = "and"
    OR = "or"
    SEQ = "seq"


# -- errors ------------------------------------------------------------------

class DiagramError(Exception):
    """Base for diagram parse and well-formedness errors."""


class DSLSyntaxError(DiagramError):
    def __init__(self, message, offset, line, col, expected=()):
        self.offset = offset
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        exp = " (expected %s)" % ", ".join(self.expected) if self.expected else ""
        super().__init__("%d:%d: %s%s" % (line, col, message, exp))


class DuplicateClauseName(DiagramError):
    pass


class UnresolvedReparation(DiagramError):
    pass


class PermissionWithReparation(DiagramError):
    pass


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Position:
    offset: int
    line: int
    col: int


@dataclass(frozen=True)
class TimeRestriction:
    clock: str
    bound: int


@dataclass(frozen=True)
class Atomic:
    action: str


@dataclass(frozen=True)
class NamedAction:
    name: str
    expr: "ActionExpr"
    alias: Optional[str] = None
    pos: Optional[Position] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Compound:
    children: tuple
    refinement: Refinement


ActionExpr = Union[Atomic, Compound]


@dataclass(frozen=True)
class ReparationRef:
    name: str
    pos: Optional[Position] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Norm:
    kind: NormKind
    name: str
    agent: str
    body: ActionExpr
    guard: tuple = TRUE
    time: Optional[TimeRestriction] = None
    reparation: Optional[Union[ReparationRef, "Norm", "Composite"]] = None
    alias: Optional[str] = None
    pos: Optional[Position] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Composite:
    refinement: Refinement
    name: str
    children: tuple
    guard: tuple = TRUE
    time: Optional[TimeRestriction] = None
    alias: Optional[str] = None
    pos: Optional[Position] = field(default=None, compare=False, repr=False)


Clause = Union[Norm, Composite]


@dataclass(frozen=True)
class ContractDiagram:
    name: str
    root: Clause
    reparation_defs: dict = field(default_factory=dict)
    agents: tuple = ()
    variables: tuple = ()          # ((name, domain-tuple), ...)
    declared_actions: tuple = ()

    @property
    def agent_set(self):
        return frozenset(self.agents)

    @property
    def action_alphabet(self):
        out = set()
        for c in iter_clauses(self):
            if isinstance(c, Norm):
                out |= _expr_actions(c.body)
        return frozenset(out)

    def variable_domains(self):
        return dict(self.variables)

    def resolve(self, rep):
        """Return the clause a reparation field designates."""
        if isinstance(rep, ReparationRef):
            return self.reparation_defs[rep.name]
        return rep


@dataclass(frozen=True)
class NormIndex:
    CN: frozenset
    CP: frozenset
    # compound-body norm name -> names of the C3-level actions below it
    compound: dict = field(default_factory=dict)
    # CN/CP names only reachable through a reparation
    reparation_names: frozenset = frozenset()
    aliases: dict = field(default_factory=dict)

    def satisfied_names(self, s):
        """``s`` plus every compound-body norm one of whose sub-actions is in ``s``."""
        out = set(s)
        for norm, subs in self.compound.items():
            if out & subs:
                out.add(norm)
        return out

    def display(self, name):
        return self.aliases.get(name, name)


# -- traversal helpers -------------------------------------------------------

def _expr_actions(expr):
    if isinstance(expr, Atomic):
        return {expr.action}
    out = set()
    for na in expr.children:
        out |= _expr_actions(na.expr)
    return out


def expr_names(expr):
    """All C3-level names under an action expression, in preorder."""
    if isinstance(expr, Atomic):
        return []
    out = []
    for na in expr.children:
        out.append(na.name)
        out.extend(expr_names(na.expr))
    return out


def _walk(clause, diagram, seen_refs, in_rep, out):
    out.append((clause, in_rep))
    if isinstance(clause, Composite):
        for ch in clause.children:
            _walk(ch, diagram, seen_refs, in_rep, out)
        return
    rep = clause.reparation
    if rep is None:
        return
    if isinstance(rep, ReparationRef):
        if rep.name in seen_refs or rep.name not in diagram.reparation_defs:
            return
        seen_refs.add(rep.name)
        _walk(diagram.reparation_defs[rep.name], diagram, seen_refs, True, out)
    else:
        _walk(rep, diagram, seen_refs, True, out)


def _walk_all(diagram):
    out = []
    seen = set()
    _walk(diagram.root, diagram, seen, False, out)
    # unreferenced definitions still belong to the contract text
    for name, clause in diagram.reparation_defs.items():
        if name not in seen:
            seen.add(name)
            _walk(clause, diagram, seen, True, out)
    return out


def iter_clauses(diagram):
    """Every clause of the diagram, reparations included, each once."""
    for c, _ in _walk_all(diagram):
        yield c


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    kind: str
    message: str
    clause: Optional[str] = None


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = ()

    @property
    def ok(self):
        return not self.findings

    def kinds(self):
        return [f.kind for f in self.findings]

    def __bool__(self):
        return bool(self.findings)


def validate_diagram(d):
    findings = []
    names = {}
    declared_vars = {v for v, _ in d.variables}

    def note_name(name, where):
        if name in names:
            findings.append(Finding("DuplicateClauseName", "clause name %r used twice" % name, name))
        names[name] = where

    def check_refs(clause):
        rep = clause.reparation if isinstance(clause, Norm) else None
        if isinstance(rep, ReparationRef) and rep.name not in d.reparation_defs:
            findings.append(Finding("UnresolvedReparation", "reparation %r is not defined" % rep.name, clause.name))

    for clause, _ in _walk_all(d):
        note_name(clause.name, clause)
        for v in sorted(guard_vars(clause.guard) - declared_vars):
            findings.append(Finding("UndeclaredVariable", "guard of %r uses undeclared variable %r" % (clause.name, v), clause.name))
        if clause.time is not None and clause.time.bound < 0:
            findings.append(Finding("NegativeBound", "time bound of %r is negative" % clause.name, clause.name))
        if isinstance(clause, Composite):
            if len(clause.children) < 2:
                findings.append(Finding("CompositeArity", "composite %r needs at least two children" % clause.name, clause.name))
            continue
        check_refs(clause)
        if clause.kind is NormKind.P and clause.reparation is not None:
            findings.append(Finding("PermissionWithReparation", "permission %r carries a reparation" % clause.name, clause.name))
        if d.agents and clause.agent not in d.agents:
            findings.append(Finding("UndeclaredAgent", "agent %r of %r is not declared" % (clause.agent, clause.name), clause.name))
        for sub in expr_names(clause.body):
            note_name(sub, clause)
        for cexpr in _compounds(clause.body):
            if len(cexpr.children) < 2:
                findings.append(Finding("CompositeArity", "compound action in %r needs at least two parts" % clause.name, clause.name))
        if d.declared_actions:
            for a in sorted(_expr_actions(clause.body) - set(d.declared_actions)):
                findings.append(Finding("UndeclaredAction", "action %r of %r is not declared" % (a, clause.name), clause.name))
    return ValidationReport(tuple(findings))


def _compounds(expr):
    if isinstance(expr, Atomic):
        return []
    out = [expr]
    for na in expr.children:
        out.extend(_compounds(na.expr))
    return out


def norm_index(d):
    cn, cp, reparation_names = set(), set(), set()
    compound = {}
    aliases = {}
    for clause, in_rep in _walk_all(d):
        if clause.alias is not None:
            aliases[clause.name] = clause.alias
        if not isinstance(clause, Norm):
            continue
        subs = expr_names(clause.body)
        group = cp if clause.kind is NormKind.P else cn
        group.add(clause.name)
        group.update(subs)
        if subs:
            compound[clause.name] = frozenset(subs)
        if in_rep:
            reparation_names.add(clause.name)
            reparation_names.update(subs)
        for na in _named_actions(clause.body):
            if na.alias is not None:
                aliases[na.name] = na.alias
    return NormIndex(frozenset(cn), frozenset(cp), compound, frozenset(reparation_names), aliases)


def _named_actions(expr):
    if isinstance(expr, Atomic):
        return []
    out = []
    for na in expr.children:
        out.append(na)
        out.extend(_named_actions(na.expr))
    return out


# -- lexer -------------------------------------------------------------------

KEYWORDS = {
    "contract", "agents", "actions", "vars", "reparation", "obligation",
    "permission", "prohibition", "and", "or", "seq", "by", "when", "within",
    "do", "as",
}

_LEX = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<le><=)
  | (?P<op>&&|\|\||==|!=|!)
  | (?P<punct>[{}(),:=\[\]])
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str      # 'ident', 'int', 'kw', 'punct', 'eof'
    text: str
    offset: int


def _lex(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _LEX.match(text, pos)
        if not m:
            toks.append(_Tok("bad", text[pos], pos))
            break
        kind = m.lastgroup
        if kind == "ident" and m.group() in KEYWORDS:
            kind = "kw"
        if kind in ("le", "op"):
            kind = "punct"
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# -- parser ------------------------------------------------------------------

_NORM_KW = {"obligation": NormKind.O, "permission": NormKind.P, "prohibition": NormKind.F}
_REF_KW = {"and": Refinement.AND, "or": Refinement.OR, "seq": Refinement.SEQ}


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    # token plumbing
    def pos_of(self, offset):
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return Position(offset, line, col)

    def error(self, expected, tok=None):
        tok = tok or self.toks[self.i]
        p = self.pos_of(tok.offset)
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise DSLSyntaxError("unexpected %s" % found, p.offset, p.line, p.col, expected)

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text):
        t = self.peek()
        return t.kind in ("kw", "punct") and t.text == text

    def expect(self, text):
        if not self.at(text):
            self.error(["%r" % text])
        self.i += 1

    def ident(self, what="identifier"):
        t = self.peek()
        if t.kind != "ident":
            self.error([what])
        self.i += 1
        return t.text

    def integer(self):
        t = self.peek()
        if t.kind != "int":
            self.error(["integer"])
        self.i += 1
        return int(t.text)

    def ident_list(self):
        out = [self.ident()]
        while self.at(","):
            self.i += 1
            out.append(self.ident())
        return out

    # grammar
    def contract(self):
        self.expect("contract")
        name = self.ident("contract name")
        self.expect("{")
        agents, actions, variables = [], [], []
        while self.at("agents") or self.at("actions") or self.at("vars"):
            kw = self.peek().text
            self.i += 1
            if kw == "agents":
                agents.extend(self.ident_list())
            elif kw == "actions":
                actions.extend(self.ident_list())
            else:
                variables.extend(self.var_decls())
        root = self.clause()
        defs = {}
        def_pos = {}
        while self.at("reparation"):
            start = self.peek()
            self.i += 1
            rname = self.ident("reparation name")
            self.expect("=")
            if rname in defs:
                p = self.pos_of(start.offset)
                raise DuplicateClauseName("%d:%d: reparation %r defined twice" % (p.line, p.col, rname))
            defs[rname] = self.clause()
            def_pos[rname] = start.offset
        self.expect("}")
        if self.peek().kind != "eof":
            self.error(["end of input"])
        return ContractDiagram(name, root, defs, tuple(agents), tuple(variables), tuple(actions))

    def var_decls(self):
        out = [self.var_decl()]
        while self.at(","):
            self.i += 1
            out.append(self.var_decl())
        return out

    def var_decl(self):
        name = self.ident("variable name")
        if not self.at(":"):
            return (name, (False, True))
        self.i += 1
        if self.at("{"):
            self.i += 1
            vals = [self.value()]
            while self.at(","):
                self.i += 1
                vals.append(self.value())
            self.expect("}")
            return (name, tuple(vals))
        t = self.ident("'bool' or '{'")
        if t != "bool":
            self.error(["'bool'", "'{'"], self.toks[self.i - 1])
        return (name, (False, True))

    def value(self):
        t = self.peek()
        if t.kind == "int":
            self.i += 1
            return int(t.text)
        if t.kind == "ident":
            self.i += 1
            return {"true": True, "false": False}.get(t.text, t.text)
        self.error(["value"])

    def name_decl(self):
        name = self.ident("clause name")
        alias = None
        if self.at("as"):
            self.i += 1
            t = self.peek()
            if t.kind not in ("int", "ident"):
                self.error(["alias"])
            self.i += 1
            alias = t.text
        return name, alias

    def guard_time(self):
        guard, time = TRUE, None
        if self.at("when"):
            self.i += 1
            guard = self.guard_text()
        if self.at("within"):
            self.i += 1
            clock = self.ident("clock name")
            self.expect("<=")
            time = TimeRestriction(clock, self.integer())
        return guard, time

    def guard_text(self):
        # a guard runs up to the next clause keyword; it is re-lexed by the guard parser
        start = self.peek()
        stops = {"within", "do", "{"}
        depth = 0
        j = self.i
        while True:
            t = self.toks[j]
            if t.kind == "eof":
                self.error(["'within'", "'do'", "'{'"], t)
            if t.kind in ("kw", "punct") and t.text in stops and depth == 0:
                break
            if t.text == "(":
                depth += 1
            if t.text == ")":
                depth -= 1
            j += 1
        end = self.toks[j].offset
        raw = self.text[start.offset:end]
        # strip trailing comments inside the guard span
        raw = "\n".join(line.split("#", 1)[0] for line in raw.split("\n"))
        try:
            g = parse_guard(raw)
        except GuardSyntaxError as e:
            p = self.pos_of(start.offset + e.offset)
            raise DSLSyntaxError("bad guard", p.offset, p.line, p.col, [e.expected]) from None
        if raw.strip() == "":
            self.error(["guard expression"])
        self.i = j
        return g

    def clause(self):
        t = self.peek()
        p = self.pos_of(t.offset)
        if t.kind == "kw" and t.text in _NORM_KW:
            self.i += 1
            kind = _NORM_KW[t.text]
            name, alias = self.name_decl()
            self.expect("by")
            agent = self.ident("agent")
            guard, time = self.guard_time()
            self.expect("do")
            body = self.action_expr()
            rep = None
            if self.at("reparation"):
                # 'reparation' also opens a definition after the root clause; only
                # treat it as a reference when followed by a name or '{' and not '='
                nxt, nxt2 = self.peek(1), self.peek(2)
                is_def = nxt.kind == "ident" and nxt2.kind == "punct" and nxt2.text == "="
                if not is_def:
                    self.i += 1
                    if self.at("{"):
                        self.i += 1
                        rep = self.clause()
                        self.expect("}")
                    else:
                        rt = self.peek()
                        rep = ReparationRef(self.ident("reparation name"), self.pos_of(rt.offset))
            return Norm(kind, name, agent, body, guard, time, rep, alias, p)
        if t.kind == "kw" and t.text in _REF_KW:
            self.i += 1
            ref = _REF_KW[t.text]
            name, alias = self.name_decl()
            guard, time = self.guard_time()
            self.expect("{")
            children = [self.clause()]
            while not self.at("}"):
                children.append(self.clause())
            if len(children) < 2:
                self.error(["second clause"])
            self.expect("}")
            return Composite(ref, name, tuple(children), guard, time, alias, p)
        self.error(["'obligation'", "'permission'", "'prohibition'", "'and'", "'or'", "'seq'"])

    def action_expr(self):
        t = self.peek()
        if t.kind == "kw" and t.text in _REF_KW:
            self.i += 1
            ref = _REF_KW[t.text]
            self.expect("{")
            kids = [self.named_action()]
            while not self.at("}"):
                kids.append(self.named_action())
            if len(kids) < 2:
                self.error(["second named action"])
            self.expect("}")
            return Compound(tuple(kids), ref)
        return Atomic(self.ident("action"))

    def named_action(self):
        t = self.peek()
        name, alias = self.name_decl()
        self.expect(":")
        return NamedAction(name, self.action_expr(), alias, self.pos_of(t.offset))


def parse_diagram(text):
    """Parse ``.cod`` source into a :class:`ContractDiagram`.

    Raises DSLSyntaxError, DuplicateClauseName, UnresolvedReparation or
    PermissionWithReparation.  Other well-formedness problems are left to
    :func:`validate_diagram`.
    """
    d = _Parser(text).contract()
    report = validate_diagram(d)
    for f in report.findings:
        if f.kind == "DuplicateClauseName":
            raise DuplicateClauseName(f.message)
        if f.kind == "UnresolvedReparation":
            raise UnresolvedReparation(f.message)
        if f.kind == "PermissionWithReparation":
            raise PermissionWithReparation(f.message)
    return d


def load_diagram(path):
    with open(path, encoding="utf-8") as fh:
        return parse_diagram(fh.read())


# -- printer -----------------------------------------------------------------

def _fmt_value(v):
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


def _name(name, alias):
    return name if alias is None else "%s as %s" % (name, alias)


def _head(clause):
    parts = []
    if clause.guard != TRUE:
        parts.append("when " + guard_to_str(clause.guard))
    if clause.time is not None:
        parts.append("within %s <= %d" % (clause.time.clock, clause.time.bound))
    return (" " + " ".join(parts)) if parts else ""


def _print_expr(expr, indent):
    if isinstance(expr, Atomic):
        return expr.action
    pad = "  " * (indent + 1)
    lines = ["%s {" % expr.refinement.value]
    for na in expr.children:
        lines.append("%s%s: %s" % (pad, _name(na.name, na.alias), _print_expr(na.expr, indent + 1)))
    lines.append("  " * indent + "}")
    return "\n".join(lines)


def _print_clause(c, indent):
    pad = "  " * indent
    if isinstance(c, Norm):
        s = "%s%s %s by %s%s do %s" % (pad, c.kind.value, _name(c.name, c.alias), c.agent,
                                       _head(c), _print_expr(c.body, indent))
        if isinstance(c.reparation, ReparationRef):
            s += " reparation " + c.reparation.name
        elif c.reparation is not None:
            s += " reparation {\n%s\n%s}" % (_print_clause(c.reparation, indent + 1), pad)
        return s
    lines = ["%s%s %s%s {" % (pad, c.refinement.value, _name(c.name, c.alias), _head(c))]
    for ch in c.children:
        lines.append(_print_clause(ch, indent + 1))
    lines.append(pad + "}")
    return "\n".join(lines)


def print_diagram(d):
    lines = ["contract %s {" % d.name]
    if d.agents:
        lines.append("  agents " + ", ".join(d.agents))
    if d.declared_actions:
        lines.append("  actions " + ", ".join(d.declared_actions))
    if d.variables:
        decls = []
        for name, dom in d.variables:
            if tuple(dom) == (False, True):
                decls.append(name)
            else:
                decls.append("%s: {%s}" % (name, ", ".join(_fmt_value(v) for v in dom)))
        lines.append("  vars " + ", ".join(decls))
    lines.append(_print_clause(d.root, 1))
    for name, clause in d.reparation_defs.items():
        lines.append("  reparation %s =\n%s" % (name, _print_clause(clause, 2)))
    lines.append("}")
    return "\n".join(lines) + "\n"
