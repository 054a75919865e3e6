"""Canonical forms for structural congruence.

``normalize`` maps every term to a ``CanonicalProcess`` such that terms
related by the congruence laws (commutativity and associativity of ``+`` and
``|``, exchange of restrictions, guard evaluation, scope extrusion, dropping
of unused restrictions, neutrality of ``0``) and by alpha-conversion map to the
same value. Constant calls are kept folded.

The normal form is built in two passes. The first flattens sums and parallel
compositions, resolves ground guards, hoists restrictions and renames every
restricted name to a fresh placeholder. The second renames the placeholders
of each scope to ``_n<depth>_<k>`` (skipping names free in the term), picking
the assignment whose sorted rendering is least, and orders the multisets.
Input-bound variables are named ``_x<depth>`` after the number of enclosing
input binders.
"""
from functools import lru_cache
import itertools
import re

from .errors import GuardNotGroundError
from .syntax import (
    Call, Input, Match, New, Nil, NIL, Output, Par, Sum,
    eval_expr, free_names, ground, is_ground, new_chain, rename_const, rename_var,
    substitute,
)

_gensym_counter = itertools.count()
_GENSYM_RE = re.compile(r"_g\d+")


def _gensym():
    return f"_g{next(_gensym_counter)}"


class CanonicalProcess:
    """A term in normal form: restricted names over a sorted multiset of components."""
    __slots__ = ("term", "names", "components")

    def __init__(self, term):
        self.term = term
        names = []
        while isinstance(term, New):
            names.append(term.name)
            term = term.body
        self.names = tuple(names)
        if isinstance(term, Par):
            self.components = term.terms
        elif isinstance(term, Nil):
            self.components = ()
        else:
            self.components = (term,)

    def __eq__(self, other):
        return isinstance(other, CanonicalProcess) and self.term == other.term

    def __hash__(self):
        return hash(self.term)

    def __lt__(self, other):
        return str(self.term) < str(other.term)

    def __str__(self):
        return str(self.term)

    def __repr__(self):
        return f"<CanonicalProcess {self.term}>"

    @property
    def key(self):
        return str(self.term)


def normalize(term, env=None):
    """Return the canonical representative of ``term``'s congruence class."""
    if isinstance(term, CanonicalProcess):
        return term
    return _normalize(term)


@lru_cache(maxsize=200_000)
def _normalize(term):
    return CanonicalProcess(_canon(_struct_term(term, 0), 0, free_names(term)))


# ---------------------------------------------------------------- pass 1

def _struct_term(term, vdepth):
    names, comps = _struct(term, vdepth)
    if not comps:
        return NIL
    body = comps[0] if len(comps) == 1 else Par(tuple(comps))
    return new_chain(names, body)


def _struct(term, vdepth):
    """Return ``(restricted placeholder names, parallel components)``."""
    if isinstance(term, Nil):
        return [], []
    if isinstance(term, Par):
        names, comps = [], []
        for t in term.terms:
            n, c = _struct(t, vdepth)
            names += n
            comps += c
        return names, comps
    if isinstance(term, New):
        g = _gensym()
        names, comps = _struct(rename_const(term.body, term.name, g), vdepth)
        if any(g in free_names(c) for c in comps):
            names = [g] + names
        return names, comps
    if isinstance(term, Match):
        if term.is_ground():
            return _struct(term.branch(), vdepth)
        return [], [Match(term.lhs, term.op, term.rhs,
                          _struct_term(term.then, vdepth),
                          _struct_term(term.orelse, vdepth))]
    if isinstance(term, Sum):
        alts = []
        for t in term.terms:
            s = _struct_term(t, vdepth)
            if isinstance(s, Sum):
                alts.extend(s.terms)
            elif not isinstance(s, Nil):
                alts.append(s)
        if not alts:
            return [], []
        if len(alts) == 1:
            return _struct(alts[0], vdepth)
        return [], [Sum(tuple(alts))]
    if isinstance(term, Input):
        var = f"_x{vdepth}"
        cont = term.cont if term.var == var else rename_var(term.cont, term.var, var)
        return [], [Input(ground(term.chan), var, term.weight, _struct_term(cont, vdepth + 1))]
    if isinstance(term, Output):
        return [], [Output(ground(term.chan), ground(term.msg), term.rate,
                           _struct_term(term.cont, vdepth))]
    if isinstance(term, Call):
        return [], [Call(term.ident, tuple(ground(a) for a in term.args))]
    raise TypeError(f"not a process term: {term!r}")


# ---------------------------------------------------------------- pass 2

def _anon(term):
    return _GENSYM_RE.sub("_g", str(term))


# Above this many names at one level the exhaustive search gives way to
# ordering by first use in the anonymized rendering.
PERMUTATION_LIMIT = 6


def _fresh_canonical(depth, count, avoid):
    out, i = [], 0
    while len(out) < count:
        cand = f"_n{depth}_{i}"
        if cand not in avoid:
            out.append(cand)
        i += 1
    return out


def _assemble(comps, depth, avoid):
    comps = sorted((_canon_component(c, depth + 1, avoid) for c in comps), key=str)
    return comps[0] if len(comps) == 1 else Par(tuple(comps))


def _rename_all(comps, mapping):
    for g, c_name in mapping:
        comps = [rename_const(c, g, c_name) for c in comps]
    return comps


def _canon(term, depth, avoid=frozenset()):
    names = []
    while isinstance(term, New):
        names.append(term.name)
        term = term.body
    if isinstance(term, Nil):
        return NIL
    comps = list(term.terms) if isinstance(term, Par) else [term]
    if not names:
        return _assemble(comps, depth, avoid)
    canonical = _fresh_canonical(depth, len(names), avoid)
    if len(names) <= PERMUTATION_LIMIT:
        # the least rendering over all name assignments is independent of
        # the order the names arrived in
        best = None
        for perm in itertools.permutations(canonical):
            body = _assemble(_rename_all(comps, zip(names, perm)), depth, avoid)
            if best is None or str(body) < str(best):
                best = body
        return new_chain(canonical, best)
    comps.sort(key=_anon)
    wanted = set(names)
    order = []
    for c in comps:
        for m in _GENSYM_RE.finditer(str(c)):
            g = m.group()
            if g in wanted and g not in order:
                order.append(g)
    return new_chain(canonical, _assemble(_rename_all(comps, zip(order, canonical)), depth, avoid))


def _canon_component(term, depth, avoid):
    if isinstance(term, Input):
        return Input(term.chan, term.var, term.weight, _canon(term.cont, depth, avoid))
    if isinstance(term, Output):
        return Output(term.chan, term.msg, term.rate, _canon(term.cont, depth, avoid))
    if isinstance(term, Sum):
        return Sum(tuple(sorted((_canon(t, depth, avoid) for t in term.terms), key=str)))
    if isinstance(term, Match):
        return Match(term.lhs, term.op, term.rhs, _canon(term.then, depth, avoid),
                     _canon(term.orelse, depth, avoid))
    if isinstance(term, (New, Par)):
        return _canon(term, depth, avoid)
    return term


# ---------------------------------------------------------------- constants

def unfold_constant(call, env):
    """One unfolding of ``call``: the definition body with formals bound to the arguments."""
    if not all(is_ground(a) for a in call.args):
        raise GuardNotGroundError(f"arguments of {call} are not ground")
    definition = env.lookup(call.ident, len(call.args))
    body = definition.body
    for param, arg in zip(definition.params, call.args):
        body = substitute(body, param, eval_expr(arg))
    return body


def resolve_guards(term):
    """Strip top-level guards of a closed term, returning the selected branch."""
    while isinstance(term, Match):
        term = term.branch()
    return term


__all__ = ["CanonicalProcess", "normalize", "unfold_constant", "resolve_guards"]
