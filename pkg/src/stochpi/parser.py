"""Recursive-descent parser for the textual model language.

A model file is a sequence of definitions followed by the system term::

    # comment
    const A(w) := a!<w,2>.A(w+1)
    B := b(x,1).c!<x,inf:3>.B()
    system new c in (A(0) | B)

The ``const`` keyword is optional, and so is ``system`` when the term is the
last item. Process identifiers start with an upper-case letter; channel,
message and variable names start with a lower-case letter or ``_``.
"""
from fractions import Fraction
import re

import networkx as nx

from .errors import (
    ArityMismatchError,
    ParseError,
    UnboundVariableError,
    UnguardedConstantError,
    UnknownConstantError,
)
from .syntax import (
    BinOp, Call, Const, Definition, DefinitionEnv, Input, Match, New, NIL, Output,
    Par, Rate, Sum, Var,
)

KEYWORDS = {"new", "in", "else", "const", "system", "inf"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Z][A-Za-z0-9_']*)
  | (?P<name>[a-z_][A-Za-z0-9_']*)
  | (?P<sym>:=|!=|\.\.|[()\[\]{}<>,.!+|=:/-])
""", re.VERBOSE)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            word = m.group()
            if kind == "name" and word in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, word, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0
        self.calls = []          # (Call, token) for post-parse resolution

    # -- token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None):
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind)

    def advance(self):
        t = self.tok
        self.i += 1
        return t

    def fail(self, expected, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"unexpected {found}", tok.line, tok.col, expected)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind in ("ident", "name", "num"):
            self.fail([repr(text)])
        return self.advance()

    def expect_kind(self, kind, what):
        if self.tok.kind != kind:
            self.fail([what])
        return self.advance()

    # -- program level
    def program(self):
        env = DefinitionEnv()
        init = None
        while self.tok.kind != "eof":
            if self.at("system", "kw"):
                self.advance()
                init = self.term(())
                if self.tok.kind != "eof":
                    self.fail(["end of input"])
                break
            if self.at("const", "kw") or self._looks_like_definition():
                env.add(self.definition())
                continue
            init = self.term(())
            if self.tok.kind != "eof":
                self.fail(["end of input", "'+'", "'|'"])
        self._resolve_calls(env)
        check_guardedness(env)
        return env, init

    def _looks_like_definition(self):
        if self.tok.kind != "ident":
            return False
        k = 1
        if self.peek(k).text == "(":
            depth = 0
            while True:
                t = self.peek(k)
                if t.kind == "eof":
                    return False
                if t.text == "(":
                    depth += 1
                elif t.text == ")":
                    depth -= 1
                    if depth == 0:
                        break
                k += 1
            k += 1
        return self.peek(k).text == ":="

    def definition(self):
        if self.at("const", "kw"):
            self.advance()
        head = self.expect_kind("ident", "process identifier")
        params = []
        if self.at("("):
            self.advance()
            if not self.at(")"):
                params.append(self.expect_kind("name", "parameter name").text)
                while self.at(","):
                    self.advance()
                    params.append(self.expect_kind("name", "parameter name").text)
            self.expect(")")
        if len(set(params)) != len(params):
            raise ParseError(f"repeated parameter in definition of {head.text}", head.line, head.col)
        self.expect(":=")
        scope = tuple((p, "var") for p in params)
        body = self.term(scope)
        return Definition(head.text, params, body, head.line)

    # -- terms
    def term(self, scope):
        terms = [self.sum(scope)]
        while self.at("|"):
            self.advance()
            terms.append(self.sum(scope))
        return terms[0] if len(terms) == 1 else Par(tuple(terms))

    def sum(self, scope):
        terms = [self.unary(scope)]
        while self.at("+"):
            self.advance()
            terms.append(self.unary(scope))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def unary(self, scope):
        t = self.tok
        if t.kind == "num" and t.text == "0":
            self.advance()
            return NIL
        if t.text == "(" and t.kind == "sym":
            self.advance()
            inner = self.term(scope)
            self.expect(")")
            return inner
        if t.kind == "kw" and t.text == "new":
            self.advance()
            names = [self.expect_kind("name", "name").text]
            while self.at(","):
                self.advance()
                names.append(self.expect_kind("name", "name").text)
            self.expect("in")
            inner = scope + tuple((n, "const") for n in names)
            body = self.term(inner)
            for n in reversed(names):
                body = New(n, body)
            return body
        if t.text == "[":
            return self.match(scope)
        if t.kind == "ident":
            return self.call(scope)
        if t.kind == "name":
            return self.prefix(scope)
        self.fail(["'0'", "'('", "'new'", "'['", "process identifier", "channel name"])

    def match(self, scope):
        self.expect("[")
        lhs = self.expr(scope)
        if self.at("in", "kw"):
            self.advance()
            self.expect("{")
            values = self.int_list()
            self.expect("}")
            op, rhs = "in", tuple(sorted(set(values)))
        elif self.at("=") or self.at("!="):
            op = self.advance().text
            rhs = self.expr(scope)
        else:
            self.fail(["'='", "'!='", "'in'"])
        self.expect("]")
        then = self.unary(scope)
        orelse = NIL
        if self.at("else", "kw"):
            self.advance()
            orelse = self.unary(scope)
        return Match(lhs, op, rhs, then, orelse)

    def int_list(self):
        values = []
        while True:
            lo = self.signed_int()
            if self.at(".."):
                self.advance()
                hi = self.signed_int()
                values.extend(range(lo, hi + 1))
            else:
                values.append(lo)
            if not self.at(","):
                return values
            self.advance()

    def signed_int(self):
        sign = 1
        if self.at("-"):
            self.advance()
            sign = -1
        t = self.expect_kind("num", "integer")
        if "." in t.text:
            raise ParseError("expected an integer", t.line, t.col)
        return sign * int(t.text)

    def call(self, scope):
        head = self.advance()
        args = []
        if self.at("("):
            self.advance()
            if not self.at(")"):
                args.append(self.expr(scope))
                while self.at(","):
                    self.advance()
                    args.append(self.expr(scope))
            self.expect(")")
        node = Call(head.text, tuple(args))
        self.calls.append((node, head))
        return node

    def prefix(self, scope):
        chan_tok = self.advance()
        chan = self.resolve(chan_tok.text, scope)
        if self.at("("):
            self.advance()
            var = self.expect_kind("name", "variable name").text
            weight = Fraction(1)
            if self.at(","):
                self.advance()
                weight = self.rational()
            self.expect(")")
            cont = self.continuation(scope + ((var, "var"),))
            return Input(chan, var, weight, cont)
        if self.at("!"):
            self.advance()
            self.expect("<")
            msg = self.expr(scope)
            self.expect(",")
            if self.at("inf", "kw"):
                self.advance()
                self.expect(":")
                rate = Rate(self.rational(), immediate=True)
            else:
                rate = Rate(self.rational())
            self.expect(">")
            return Output(chan, msg, rate, self.continuation(scope))
        self.fail(["'('", "'!'"])

    def continuation(self, scope):
        if self.at("."):
            self.advance()
            return self.unary(scope)
        return NIL

    def rational(self):
        t = self.expect_kind("num", "positive number")
        value = Fraction(t.text)
        if self.at("/"):
            self.advance()
            value /= Fraction(self.expect_kind("num", "number").text)
        if value <= 0:
            raise ParseError("rates and weights must be positive", t.line, t.col)
        return value

    # -- expressions
    def expr(self, scope):
        left = self.atom(scope)
        while self.tok.text in ("+", "-") and self.tok.kind == "sym":
            op_tok = self.advance()
            right = self.atom(scope)
            for side in (left, right):
                if isinstance(side, Const) and isinstance(side.value, str):
                    raise UnboundVariableError(
                        f"{side.value} is not a bound variable and cannot take part in arithmetic",
                        op_tok.line, op_tok.col)
            left = BinOp(op_tok.text, left, right)
        return left

    def atom(self, scope):
        t = self.tok
        if t.kind == "num":
            self.advance()
            if "." in t.text:
                raise ParseError("expected an integer", t.line, t.col)
            return Const(int(t.text))
        if t.text == "-":
            self.advance()
            n = self.expect_kind("num", "integer")
            return Const(-int(n.text))
        if t.kind == "name":
            self.advance()
            return self.resolve(t.text, scope)
        if t.text == "(":
            self.advance()
            e = self.expr(scope)
            self.expect(")")
            return e
        self.fail(["name", "integer"])

    @staticmethod
    def resolve(name, scope):
        for bound, kind in reversed(scope):
            if bound == name:
                return Var(name) if kind == "var" else Const(name)
        return Const(name)

    def _resolve_calls(self, env):
        for node, tok in self.calls:
            try:
                env.lookup(node.ident, len(node.args))
            except (UnknownConstantError, ArityMismatchError) as exc:
                raise type(exc)(str(exc), tok.line, tok.col) from None


def unguarded_calls(term):
    """Identifiers of constant calls in ``term`` that are not under a prefix."""
    if isinstance(term, Call):
        return {(term.ident, len(term.args))}
    if isinstance(term, (Sum, Par)):
        return set().union(*(unguarded_calls(t) for t in term.terms))
    if isinstance(term, New):
        return unguarded_calls(term.body)
    if isinstance(term, Match):
        return unguarded_calls(term.then) | unguarded_calls(term.orelse)
    return set()


def check_guardedness(env):
    """Reject definitions whose unfolding can loop without passing a prefix."""
    graph = nx.DiGraph()
    for d in env:
        key = (d.ident, len(d.params))
        graph.add_node(key)
        for callee in unguarded_calls(d.body):
            graph.add_edge(key, callee)
    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        return
    ident, arity = cycle[0][0]
    path = " -> ".join(f"{i}/{a}" for (i, a), _ in cycle) + f" -> {ident}/{arity}"
    line = env.lookup(ident, arity).line
    raise UnguardedConstantError(f"unguarded recursion {path}", line, 1)


def parse(text):
    """Parse model text into ``(DefinitionEnv, initial term or None)``."""
    return _Parser(text).program()


def parse_term(text, env=None):
    """Parse a single term, resolving constant calls against ``env``."""
    p = _Parser(text)
    term = p.term(())
    if p.tok.kind != "eof":
        p.fail(["end of input", "'+'", "'|'"])
    if env is not None:
        p._resolve_calls(env)
    return term


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
