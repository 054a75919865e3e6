"""Finite sub-probability distributions over processes and action-process pairs.

A ``Dist`` is an immutable map from outcomes to positive ``Fraction``s whose
total mass is at most 1. ``ProcDist`` holds processes; ``ActionProcDist``
holds ``(label, process)`` pairs. The combinators do not care what an outcome
is, so the transition engine also uses them on raw terms before
canonicalizing.
"""
from fractions import Fraction

from .congruence import CanonicalProcess, normalize
from .errors import MassOverflow, WeightsNotNormalized
from .syntax import new_chain, par


# ---------------------------------------------------------------- labels

class ActionLabel:
    __slots__ = ()

    def __lt__(self, other):
        return str(self) < str(other)

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"


class InputLabel(ActionLabel):
    """Reception ``a(x)``."""
    __slots__ = ("chan",)

    def __init__(self, chan):
        self.chan = chan

    def __eq__(self, other):
        return isinstance(other, InputLabel) and other.chan == self.chan

    def __hash__(self):
        return hash(("in", self.chan))

    def __str__(self):
        return f"{self.chan}(x)"


class OutputLabel(ActionLabel):
    """Broadcast ``new b~ a!<m>``; ``bound`` is a subset of ``{msg}``."""
    __slots__ = ("chan", "msg", "bound")

    def __init__(self, chan, msg, bound=()):
        self.chan = chan
        self.msg = msg
        self.bound = frozenset(bound)
        if not self.bound <= {msg}:
            raise ValueError("only the message of an output can be bound")

    def __eq__(self, other):
        return (isinstance(other, OutputLabel) and other.chan == self.chan
                and other.msg == self.msg and other.bound == self.bound)

    def __hash__(self):
        return hash(("out", self.chan, self.msg, self.bound))

    def __str__(self):
        s = f"{self.chan}!<{self.msg}>"
        if self.bound:
            s = "new " + ",".join(sorted(map(str, self.bound))) + " " + s
        return s


class TauLabel(ActionLabel):
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, TauLabel)

    def __hash__(self):
        return hash("tau")

    def __str__(self):
        return "tau"


TAU = TauLabel()


# ---------------------------------------------------------------- distributions

class Dist:
    __slots__ = ("_p", "_mass")

    def __init__(self, items=()):
        p = {}
        for outcome, prob in (items.items() if isinstance(items, dict) else items):
            prob = Fraction(prob)
            if prob < 0:
                raise ValueError(f"negative probability {prob}")
            if prob:
                p[outcome] = p.get(outcome, 0) + prob
        mass = sum(p.values(), Fraction(0))
        if mass > 1:
            raise MassOverflow(f"total mass {mass} exceeds 1")
        self._p = p
        self._mass = mass

    @classmethod
    def dirac(cls, outcome):
        return cls({outcome: Fraction(1)})

    @property
    def mass(self):
        return self._mass

    def __getitem__(self, outcome):
        return self._p.get(outcome, Fraction(0))

    def __contains__(self, outcome):
        return outcome in self._p

    def __iter__(self):
        return iter(self._p)

    def __len__(self):
        return len(self._p)

    def items(self):
        return self._p.items()

    def support(self):
        return list(self._p)

    def __eq__(self, other):
        return type(other) is type(self) and other._p == self._p

    def __hash__(self):
        return hash(frozenset(self._p.items()))

    def map(self, fn):
        """Push forward along ``fn``; outcomes that collide merge."""
        return type(self)((fn(o), q) for o, q in self._p.items())

    def scale(self, factor):
        return type(self)((o, q * factor) for o, q in self._p.items())

    def sorted_items(self):
        return sorted(self._p.items(), key=lambda kv: _outcome_key(kv[0]))

    def __repr__(self):
        body = ", ".join(f"{q}: {_outcome_str(o)}" for o, q in self.sorted_items())
        return f"{type(self).__name__}({{{body}}})"


def _outcome_str(o):
    if isinstance(o, tuple):
        return f"({o[0]}, {o[1]})"
    return str(o)


def _outcome_key(o):
    if isinstance(o, tuple):
        return (str(o[0]), str(o[1]))
    return ("", str(o))


class ProcDist(Dist):
    """Distribution over processes."""
    __slots__ = ()


class ActionProcDist(Dist):
    """Distribution over ``(ActionLabel, process)`` pairs."""
    __slots__ = ()

    def actions(self):
        return {label for label, _ in self._p}

    def marginal(self, label):
        """``Theta(alpha)``: the process distribution under one action."""
        return ProcDist((proc, q) for (lab, proc), q in self._p.items() if lab == label)

    def processes(self):
        """``Theta(P)``: the process marginal, summing over actions."""
        return ProcDist((proc, q) for (_, proc), q in self._p.items())


def convex_combine(pairs):
    """``sum_i w_i D_i`` for weights summing to one."""
    pairs = [(Fraction(w), d) for w, d in pairs]
    if not pairs:
        raise WeightsNotNormalized("empty convex combination")
    total = sum(w for w, _ in pairs)
    if total != 1 or any(w <= 0 for w, _ in pairs):
        raise WeightsNotNormalized(f"convex weights must be positive and sum to 1, got {total}")
    cls = type(pairs[0][1])
    return cls((o, w * q) for w, d in pairs for o, q in d.items())


def dist_add(d1, d2):
    if d1.mass + d2.mass > 1:
        raise MassOverflow(f"sum of masses {d1.mass + d2.mass} exceeds 1")
    return type(d1)(list(d1.items()) + list(d2.items()))


def _canonical_par(p, q):
    return normalize(par(_term(p), _term(q)))


def _term(p):
    return p.term if isinstance(p, CanonicalProcess) else p


def dist_par(d1, d2, compose=_canonical_par):
    """Product distribution over parallel compositions."""
    return ProcDist((compose(p, q), a * b) for p, a in d1.items() for q, b in d2.items())


def restrict_label(name, label, proc, restrict=None):
    """Restriction of one ``(label, proc)`` outcome by ``name``.

    ``restrict(names, proc)`` builds ``new names in proc``; by default it
    produces the canonical form.
    """
    restrict = restrict or _canonical_new
    if isinstance(label, OutputLabel):
        if label.chan == name:
            return TAU, restrict((name,) + tuple(sorted(label.bound, key=str)), proc)
        if label.msg == name:
            return OutputLabel(label.chan, label.msg, label.bound | {name}), proc
    return label, restrict((name,), proc)


def _canonical_new(names, proc):
    return normalize(new_chain(names, _term(proc)))


def restrict_pad(name, pad, restrict=None):
    """Lift ``new name`` through a process action distribution."""
    return ActionProcDist(
        (restrict_label(name, lab, proc, restrict), q) for (lab, proc), q in pad.items())


__all__ = [
    "ActionLabel", "InputLabel", "OutputLabel", "TauLabel", "TAU",
    "Dist", "ProcDist", "ActionProcDist",
    "convex_combine", "dist_add", "dist_par", "restrict_label", "restrict_pad",
]
