"""Abstract syntax of closed process terms.

Names are split in two disjoint kinds. Constants (channels, messages and
integer payloads) appear as ``Const`` and hold a ``str`` or an ``int``;
variables bound by an input prefix or by a definition's formal parameter
list appear as ``Var``. Integer arithmetic (``+``/``-``) is kept unevaluated
in ``BinOp`` until the operands are ground.

All nodes are immutable and hashable; hashes and printed forms are cached,
which matters because terms are used as dictionary keys throughout the
state-space exploration.
"""
from fractions import Fraction
import itertools
import weakref

from .errors import (
    ArityMismatchError,
    DuplicateDefinitionError,
    EvaluationError,
    GuardNotGroundError,
    UnknownConstantError,
)


class Node:
    """Hash-consed immutable node: structurally equal nodes are the same object."""
    __slots__ = ("_hash", "_str", "_fn", "__weakref__")
    _fields = ()

    def __new__(cls, *values):
        key = (cls, values)
        obj = _INTERN.get(key)
        if obj is None:
            obj = object.__new__(cls)
            for name, value in zip(cls._fields, values):
                object.__setattr__(obj, name, value)
            object.__setattr__(obj, "_hash", hash((cls.__name__,) + values))
            _INTERN[key] = obj
        return obj

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _values(self):
        return tuple(getattr(self, f) for f in self._fields)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __str__(self):
        try:
            return self._str
        except AttributeError:
            s = self._render()
            object.__setattr__(self, "_str", s)
            return s

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"

    def __reduce__(self):
        return (type(self), self._values())


_INTERN = weakref.WeakValueDictionary()


# ---------------------------------------------------------------- expressions

class Const(Node):
    """A constant name: channel/message identifier or integer payload."""
    __slots__ = ("value",)
    _fields = ("value",)

    def _render(self):
        return str(self.value)


class Var(Node):
    __slots__ = ("name",)
    _fields = ("name",)

    def _render(self):
        return self.name


class BinOp(Node):
    __slots__ = ("op", "left", "right")
    _fields = ("op", "left", "right")

    def _render(self):
        right = str(self.right)
        if isinstance(self.right, BinOp):
            right = f"({right})"
        return f"{self.left}{self.op}{right}"


def is_ground(expr):
    if isinstance(expr, Const):
        return True
    if isinstance(expr, Var):
        return False
    return is_ground(expr.left) and is_ground(expr.right)


def eval_expr(expr):
    """Evaluate a ground expression to a constant value (``str`` or ``int``)."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        raise GuardNotGroundError(f"variable {expr.name} is not bound to a value")
    left, right = eval_expr(expr.left), eval_expr(expr.right)
    if not (isinstance(left, int) and isinstance(right, int)):
        raise EvaluationError(f"integer arithmetic on non-integer operands in {expr}")
    return left + right if expr.op == "+" else left - right


def ground(expr):
    """Fold ``expr`` to a ``Const`` when it is ground, else return it unchanged."""
    if isinstance(expr, Const) or not is_ground(expr):
        return expr
    return Const(eval_expr(expr))


def _expr_names(expr, acc):
    if isinstance(expr, (Const, Var)):
        acc.add(expr.value if isinstance(expr, Const) else expr)
    else:
        _expr_names(expr.left, acc)
        _expr_names(expr.right, acc)


def _expr_map(expr, fn):
    if isinstance(expr, BinOp):
        left, right = _expr_map(expr.left, fn), _expr_map(expr.right, fn)
        if left is expr.left and right is expr.right:
            return expr
        return BinOp(expr.op, left, right)
    return fn(expr)


# ---------------------------------------------------------------- rates

def fmt_q(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class Rate(Node):
    """Finite exponential rate, or an immediate (infinite) rate with a weight."""
    __slots__ = ("value", "immediate")
    _fields = ("value", "immediate")

    def __new__(cls, value, immediate=False):
        value = Fraction(value)
        if value <= 0:
            raise ValueError(f"rates and weights must be positive, got {value}")
        return super().__new__(cls, value, bool(immediate))

    def _render(self):
        return f"inf:{fmt_q(self.value)}" if self.immediate else fmt_q(self.value)


# ---------------------------------------------------------------- processes

class Nil(Node):
    __slots__ = ()

    def _render(self):
        return "0"


NIL = Nil()


class Input(Node):
    __slots__ = ("chan", "var", "weight", "cont")
    _fields = ("chan", "var", "weight", "cont")

    def _render(self):
        return f"{self.chan}({self.var},{fmt_q(self.weight)}).{_unary(self.cont)}"


class Output(Node):
    __slots__ = ("chan", "msg", "rate", "cont")
    _fields = ("chan", "msg", "rate", "cont")

    def _render(self):
        return f"{self.chan}!<{self.msg},{self.rate}>.{_unary(self.cont)}"


class New(Node):
    __slots__ = ("name", "body")
    _fields = ("name", "body")

    def _render(self):
        return f"new {self.name} in {self.body}"


class Sum(Node):
    __slots__ = ("terms",)
    _fields = ("terms",)

    def _render(self):
        return " + ".join(
            f"({t})" if isinstance(t, (Sum, Par, New)) else str(t) for t in self.terms
        )


class Par(Node):
    __slots__ = ("terms",)
    _fields = ("terms",)

    def _render(self):
        return " | ".join(
            f"({t})" if isinstance(t, (Par, New)) else str(t) for t in self.terms
        )


class Match(Node):
    """``[lhs op rhs] then else orelse`` with op in ``=``, ``!=``, ``in``.

    For ``in`` the right-hand side is a sorted tuple of ints.
    """
    __slots__ = ("lhs", "op", "rhs", "then", "orelse")
    _fields = ("lhs", "op", "rhs", "then", "orelse")

    def _render(self):
        if self.op == "in":
            rhs = "{" + ",".join(str(i) for i in self.rhs) + "}"
        else:
            rhs = str(self.rhs)
        return f"[{self.lhs} {self.op} {rhs}] {_unary(self.then)} else {_unary(self.orelse)}"

    def is_ground(self):
        return is_ground(self.lhs) and (self.op == "in" or is_ground(self.rhs))

    def holds(self):
        if not self.is_ground():
            raise GuardNotGroundError(f"guard of {self} is not ground")
        lhs = eval_expr(self.lhs)
        if self.op == "in":
            return lhs in self.rhs
        rhs = eval_expr(self.rhs)
        return (lhs == rhs) if self.op == "=" else (lhs != rhs)

    def branch(self):
        return self.then if self.holds() else self.orelse


class Call(Node):
    __slots__ = ("ident", "args")
    _fields = ("ident", "args")

    def _render(self):
        return f"{self.ident}({','.join(str(a) for a in self.args)})"


def _unary(term):
    if isinstance(term, (Sum, Par, New)):
        return f"({term})"
    return str(term)


def par(*terms):
    """Parallel composition that flattens nested ``Par`` and drops ``0``."""
    flat = []
    for t in terms:
        if isinstance(t, Par):
            flat.extend(t.terms)
        elif not isinstance(t, Nil):
            flat.append(t)
    if not flat:
        return NIL
    return flat[0] if len(flat) == 1 else Par(tuple(flat))


def new_chain(names, body):
    for name in reversed(tuple(names)):
        body = New(name, body)
    return body


# ---------------------------------------------------------------- names

def free_names(term):
    """Free names of ``term``: constant values plus ``Var`` objects for free variables."""
    try:
        return term._fn
    except AttributeError:
        pass
    acc = set()
    if isinstance(term, Input):
        _expr_names(term.chan, acc)
        acc |= free_names(term.cont) - {Var(term.var)}
    elif isinstance(term, Output):
        _expr_names(term.chan, acc)
        _expr_names(term.msg, acc)
        acc |= free_names(term.cont)
    elif isinstance(term, New):
        acc |= free_names(term.body) - {term.name}
    elif isinstance(term, (Sum, Par)):
        for t in term.terms:
            acc |= free_names(t)
    elif isinstance(term, Match):
        _expr_names(term.lhs, acc)
        if term.op != "in":
            _expr_names(term.rhs, acc)
        acc |= free_names(term.then) | free_names(term.orelse)
    elif isinstance(term, Call):
        for a in term.args:
            _expr_names(a, acc)
    result = frozenset(acc)
    object.__setattr__(term, "_fn", result)
    return result


def fresh_name(base, avoid):
    base = str(base)
    for k in itertools.count(1):
        cand = f"{base}_{k}"
        if cand not in avoid:
            return cand


def _map_exprs(term, fn, recurse):
    """Rebuild ``term`` applying ``fn`` to its own expressions and ``recurse`` to children.

    Binder handling is left to the caller; this only covers the uniform cases.
    """
    if isinstance(term, Output):
        return Output(_expr_map(term.chan, fn), _expr_map(term.msg, fn), term.rate,
                      recurse(term.cont))
    if isinstance(term, Sum):
        return Sum(tuple(recurse(t) for t in term.terms))
    if isinstance(term, Par):
        return Par(tuple(recurse(t) for t in term.terms))
    if isinstance(term, Match):
        rhs = term.rhs if term.op == "in" else _expr_map(term.rhs, fn)
        return Match(_expr_map(term.lhs, fn), term.op, rhs, recurse(term.then),
                     recurse(term.orelse))
    if isinstance(term, Call):
        return Call(term.ident, tuple(_expr_map(a, fn) for a in term.args))
    return term


def substitute(term, var, value):
    """Capture-avoiding ``term{value/var}`` for a variable and a constant value."""
    name = var.name if isinstance(var, Var) else var
    if isinstance(value, Const):
        value = value.value
    return _subst(term, name, value)


def _subst(term, name, value):
    if Var(name) not in free_names(term):
        return term

    def fn(e):
        return Const(value) if isinstance(e, Var) and e.name == name else e

    if isinstance(term, Input):
        chan = _expr_map(term.chan, fn)
        cont = term.cont if term.var == name else _subst(term.cont, name, value)
        return Input(chan, term.var, term.weight, cont)
    if isinstance(term, New):
        bound, body = term.name, term.body
        if bound == value:
            bound = fresh_name(value, free_names(body) | {value})
            body = rename_const(body, value, bound)
        return New(bound, _subst(body, name, value))
    return _map_exprs(term, fn, lambda t: _subst(t, name, value))


def rename_const(term, old, new):
    """Capture-avoiding renaming of the free constant ``old`` to ``new``."""
    if old not in free_names(term):
        return term

    def fn(e):
        return Const(new) if isinstance(e, Const) and e.value == old else e

    if isinstance(term, Input):
        return Input(_expr_map(term.chan, fn), term.var, term.weight,
                     rename_const(term.cont, old, new))
    if isinstance(term, New):
        bound, body = term.name, term.body
        if bound == new:
            bound = fresh_name(new, free_names(body) | {new, old})
            body = rename_const(body, new, bound)
        return New(bound, rename_const(body, old, new))
    return _map_exprs(term, fn, lambda t: rename_const(t, old, new))


def rename_var(term, old, new):
    """Capture-avoiding renaming of the free variable ``old`` to ``new``."""
    if Var(old) not in free_names(term):
        return term

    def fn(e):
        return Var(new) if isinstance(e, Var) and e.name == old else e

    if isinstance(term, Input):
        chan = _expr_map(term.chan, fn)
        var, cont = term.var, term.cont
        if var == new:
            avoid = {v.name for v in free_names(cont) if isinstance(v, Var)} | {old, new}
            var = fresh_name(new, avoid)
            cont = rename_var(cont, new, var)
        return Input(chan, var, term.weight, rename_var(cont, old, new))
    if isinstance(term, New):
        return New(term.name, rename_var(term.body, old, new))
    return _map_exprs(term, fn, lambda t: rename_var(t, old, new))


# ---------------------------------------------------------------- definitions

class Definition:
    __slots__ = ("ident", "params", "body", "line")

    def __init__(self, ident, params, body, line=None):
        self.ident = ident
        self.params = tuple(params)
        self.body = body
        self.line = line

    def __repr__(self):
        return f"{self.ident}({','.join(self.params)}) := {self.body}"


class DefinitionEnv:
    """Constant definitions keyed by identifier and arity."""

    def __init__(self, definitions=()):
        self._defs = {}
        for d in definitions:
            self.add(d)

    def add(self, definition):
        key = (definition.ident, len(definition.params))
        if key in self._defs or any(i == definition.ident for i, _ in self._defs):
            raise DuplicateDefinitionError(
                f"constant {definition.ident} defined more than once", definition.line, 1)
        self._defs[key] = definition

    def lookup(self, ident, arity):
        try:
            return self._defs[(ident, arity)]
        except KeyError:
            arities = sorted(a for i, a in self._defs if i == ident)
            if arities:
                raise ArityMismatchError(
                    f"constant {ident} takes {arities[0]} argument(s), called with {arity}")
            raise UnknownConstantError(f"unknown constant {ident}/{arity}") from None

    def __contains__(self, key):
        return key in self._defs

    def __iter__(self):
        return iter(self._defs.values())

    def __len__(self):
        return len(self._defs)

    def keys(self):
        return self._defs.keys()
