"""Boolean guard expressions over finite-domain contract variables.

Guards are kept as small nested tuples so they hash and compare structurally:

    ("const", bool)
    ("var", name)                 truthiness of a boolean variable
    ("eq", name, value)           equality test against a literal
    ("not", g)
    ("and", (g1, g2, ...))
    ("or", (g1, g2, ...))

Text syntax: ``true``, ``false``, ``x``, ``x == v``, ``x != v``, ``!g``,
``g && h``, ``g || h`` and parentheses.
"""

import re

TRUE = ("const", True)
FALSE = ("const", False)

_TOKEN = re.compile(r"\s*(?:(&&|\|\||==|!=|!|\(|\))|([A-Za-z_][A-Za-z0-9_]*|-?\d+))")


class GuardSyntaxError(ValueError):
    def __init__(self, text, offset, expected):
        self.text = text
        self.offset = offset
        self.expected = expected
        super().__init__("bad guard %r at offset %d, expected %s" % (text, offset, expected))


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise GuardSyntaxError(text, pos, "operator or identifier")
        tok = m.group(1) or m.group(2)
        out.append((tok, m.start(1) if m.group(1) else m.start(2)))
        pos = m.end()
    out.append((None, len(text)))
    return out


def _literal(tok):
    if tok == "true":
        return True
    if tok == "false":
        return False
    if re.fullmatch(r"-?\d+", tok):
        return int(tok)
    return tok


class _GuardParser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0]

    def take(self, expected=None):
        tok, off = self.toks[self.i]
        if expected is not None and tok != expected:
            raise GuardSyntaxError(self.text, off, repr(expected))
        self.i += 1
        return tok

    def parse(self):
        g = self.disj()
        if self.peek() is not None:
            raise GuardSyntaxError(self.text, self.toks[self.i][1], "end of guard")
        return g

    def disj(self):
        parts = [self.conj()]
        while self.peek() == "||":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else ("or", tuple(parts))

    def conj(self):
        parts = [self.unary()]
        while self.peek() == "&&":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else ("and", tuple(parts))

    def unary(self):
        if self.peek() == "!":
            self.take()
            return ("not", self.unary())
        return self.atom()

    def atom(self):
        tok, off = self.toks[self.i]
        if tok == "(":
            self.take()
            g = self.disj()
            self.take(")")
            return g
        if tok is None or tok in ("&&", "||", "==", "!=", ")"):
            raise GuardSyntaxError(self.text, off, "identifier, literal or '('")
        self.take()
        if tok in ("true", "false"):
            return ("const", tok == "true")
        if re.fullmatch(r"-?\d+", tok):
            raise GuardSyntaxError(self.text, off, "variable name")
        if self.peek() in ("==", "!="):
            op = self.take()
            vtok, voff = self.toks[self.i]
            if vtok is None or vtok in ("&&", "||", "==", "!=", "!", "(", ")"):
                raise GuardSyntaxError(self.text, voff, "literal")
            self.take()
            g = ("eq", tok, _literal(vtok))
            return g if op == "==" else ("not", g)
        return ("var", tok)


def parse_guard(text):
    """Parse guard text; empty text means ``true``."""
    if text is None or text.strip() == "":
        return TRUE
    return _GuardParser(text).parse()


def _fmt_value(v):
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


def guard_to_str(g, _prec=0):
    tag = g[0]
    if tag == "const":
        return "true" if g[1] else "false"
    if tag == "var":
        return g[1]
    if tag == "eq":
        return "%s == %s" % (g[1], _fmt_value(g[2]))
    if tag == "not":
        inner = g[1]
        if inner[0] == "eq":
            return "%s != %s" % (inner[1], _fmt_value(inner[2]))
        return "!" + guard_to_str(inner, 3)
    if tag == "and":
        s = " && ".join(guard_to_str(x, 2) for x in g[1])
        return "(%s)" % s if _prec > 2 else s
    if tag == "or":
        s = " || ".join(guard_to_str(x, 1) for x in g[1])
        return "(%s)" % s if _prec > 1 else s
    raise ValueError("not a guard: %r" % (g,))


def guard_vars(g):
    tag = g[0]
    if tag == "const":
        return set()
    if tag in ("var", "eq"):
        return {g[1]}
    if tag == "not":
        return guard_vars(g[1])
    out = set()
    for x in g[1]:
        out |= guard_vars(x)
    return out


def eval_guard(g, env):
    """Kleene evaluation: returns True, False, or None when unbound variables decide it."""
    tag = g[0]
    if tag == "const":
        return g[1]
    if tag == "var":
        if g[1] not in env:
            return None
        return bool(env[g[1]])
    if tag == "eq":
        if g[1] not in env:
            return None
        return env[g[1]] == g[2]
    if tag == "not":
        v = eval_guard(g[1], env)
        return None if v is None else not v
    vals = [eval_guard(x, env) for x in g[1]]
    if tag == "and":
        if False in vals:
            return False
        return None if None in vals else True
    if True in vals:
        return True
    return None if None in vals else False


def negate(g):
    if g[0] == "const":
        return ("const", not g[1])
    if g[0] == "not":
        return g[1]
    return ("not", g)
