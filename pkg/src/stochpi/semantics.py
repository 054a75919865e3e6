"""One-step transitions: Markovian, immediate and passive.

Transitions are computed by structural recursion over the term:

* an output prefix yields a Dirac distribution on its own label,
* a sum races its alternatives in proportion to their rates (or weights),
* in ``P | Q`` whichever side fires, the other side receives the broadcast
  message on the same channel (and is left alone if it does not listen),
* restriction relabels outputs: an output on the restricted channel becomes
  ``tau``, an output of the restricted name becomes a bound output,
* guards select a branch and constants unfold once.

Passive transitions describe how a process reacts when a message arrives on a
channel: listening summands are chosen by weight, every parallel listener
receives, everything else is unchanged.

Internally the recursion works on raw terms; public functions canonicalize
inputs and outcomes.
"""
from fractions import Fraction

from .congruence import CanonicalProcess, normalize
from .distributions import (
    ActionProcDist, OutputLabel, ProcDist, TauLabel, restrict_label,
)
from .measures import IMMEDIATE, INPUT, MARKOV, get_engine
from .syntax import (
    Call, Input, Match, New, Output, Par, Sum,
    eval_expr, free_names, fresh_name, new_chain, par, rename_const, substitute,
)

PASSIVE_MSG = "_msg"
ONE = Fraction(1)


# ---------------------------------------------------------------- passive

def _passive(eng, term, chan, msg):
    key = (term, chan, msg)
    cache = eng.passive_cache
    try:
        return cache[key]
    except KeyError:
        pass
    gamma = eng.measure(term, INPUT)[chan]
    if not gamma:
        result = {term: ONE}
    elif isinstance(term, Input):
        result = {substitute(term.cont, term.var, msg): ONE}
    elif isinstance(term, Sum):
        result = {}
        for t in term.terms:
            g = eng.measure(t, INPUT)[chan]
            if g:
                w = g / gamma
                for r, q in _passive(eng, t, chan, msg).items():
                    result[r] = result.get(r, 0) + w * q
    elif isinstance(term, Par):
        result = {(): ONE}
        for t in term.terms:
            step = {}
            sub = _passive(eng, t, chan, msg)
            for prefix, p in result.items():
                for r, q in sub.items():
                    k = prefix + (r,)
                    step[k] = step.get(k, 0) + p * q
            result = step
        result = _merge((par(*parts), q) for parts, q in result.items())
    elif isinstance(term, New):
        name, body = term.name, term.body
        if name == msg:
            name = fresh_name(name, free_names(body) | {msg})
            body = rename_const(body, term.name, name)
        result = _merge((New(name, r), q) for r, q in _passive(eng, body, chan, msg).items())
    elif isinstance(term, Match):
        result = _passive(eng, term.branch(), chan, msg)
    elif isinstance(term, Call):
        result = _passive(eng, eng.unfold(term), chan, msg)
    else:
        result = {term: ONE}
    cache[key] = result
    return result


def _merge(pairs):
    out = {}
    for k, q in pairs:
        out[k] = out.get(k, 0) + q
    return out


# ---------------------------------------------------------------- active

def _raw_new(names, proc):
    return new_chain(names, proc)


def _active(eng, term, kind):
    """``None`` or ``(rate, {(label, raw residual): probability})``."""
    key = (term, kind)
    cache = eng.active_cache
    try:
        return cache[key]
    except KeyError:
        pass
    total = eng.measure(term, kind).activity
    if not total:
        result = None
    elif isinstance(term, Output):
        label = OutputLabel(eval_expr(term.chan), eval_expr(term.msg))
        result = (total, {(label, term.cont): ONE})
    elif isinstance(term, Sum):
        pad = {}
        for t in term.terms:
            sub = _active(eng, t, kind)
            if sub is not None:
                w = sub[0] / total
                for k, q in sub[1].items():
                    pad[k] = pad.get(k, 0) + w * q
        result = (total, pad)
    elif isinstance(term, Par):
        left = term.terms[0]
        right = term.terms[1] if len(term.terms) == 2 else Par(term.terms[1:])
        pad = {}
        for side in (0, 1):
            mover, other = (left, right) if side == 0 else (right, left)
            sub = _active(eng, mover, kind)
            if sub is None:
                continue
            w = sub[0] / total
            for (label, res), q in sub[1].items():
                if isinstance(label, TauLabel):
                    outcomes = [((label, res, other), ONE)]
                else:
                    label, res = _avoid_capture(label, res, other)
                    outcomes = [((label, res, r), p)
                                for r, p in _passive(eng, other, label.chan, label.msg).items()]
                for (lab, mine, theirs), p in outcomes:
                    k = (lab, par(mine, theirs) if side == 0 else par(theirs, mine))
                    pad[k] = pad.get(k, 0) + w * q * p
        result = (total, pad)
    elif isinstance(term, New):
        sub = _active(eng, term.body, kind)
        result = None if sub is None else (total, _merge(
            (restrict_label(term.name, lab, res, _raw_new), q)
            for (lab, res), q in sub[1].items()))
    elif isinstance(term, Match):
        result = _active(eng, term.branch(), kind)
    elif isinstance(term, Call):
        result = _active(eng, eng.unfold(term), kind)
    else:
        result = None
    cache[key] = result
    return result


def _avoid_capture(label, res, other):
    """Rename an extruded name that would clash with the receiver's free names."""
    if not label.bound:
        return label, res
    fn_other = free_names(other)
    if label.msg not in fn_other:
        return label, res
    new = fresh_name(label.msg, fn_other | free_names(res) | {label.msg})
    return OutputLabel(label.chan, new, {new}), rename_const(res, label.msg, new)


# ---------------------------------------------------------------- public API

def _canon_term(P):
    return normalize(P).term


def _canon_pad(raw):
    return ActionProcDist(((lab, normalize(res)), q) for (lab, res), q in raw.items())


def markov_transition(P, env=None):
    """``None`` when ``P`` has no exponential output, else ``(rate, PAD)``."""
    sub = _active(get_engine(env), _canon_term(P), MARKOV)
    return None if sub is None else (sub[0], _canon_pad(sub[1]))


def immediate_transition(P, env=None):
    """``None`` when ``P`` has no immediate output, else ``(weight, PAD)``."""
    sub = _active(get_engine(env), _canon_term(P), IMMEDIATE)
    return None if sub is None else (sub[0], _canon_pad(sub[1]))


def passive_transition(P, chan, msg, env=None):
    """Distribution of ``P`` after receiving ``msg`` broadcast on ``chan``."""
    eng = get_engine(env)
    raw = _passive(eng, _canon_term(P), chan, msg)
    return ProcDist((normalize(r), q) for r, q in raw.items())


def successor_state(label, proc):
    """The process reached through one PAD entry: extruded names are re-bound."""
    if isinstance(label, OutputLabel) and label.bound:
        term = proc.term if isinstance(proc, CanonicalProcess) else proc
        return normalize(new_chain(sorted(label.bound, key=str), term))
    return normalize(proc)


class TransitionBundle:
    """All one-step behaviour of a process.

    ``markov`` and ``immediate`` are ``None`` or ``(rate, ActionProcDist)``;
    ``passive`` maps each listening channel to the distribution after
    receiving the placeholder message ``_msg``. Use ``receive`` for a
    concrete message.
    """

    def __init__(self, process, markov, immediate, passive, env=None):
        self.process = process
        self.markov = markov
        self.immediate = immediate
        self.passive = passive
        self._env = env

    @property
    def is_immediate(self):
        return self.immediate is not None

    def receive(self, chan, msg):
        return passive_transition(self.process, chan, msg, self._env)

    def __eq__(self, other):
        return (isinstance(other, TransitionBundle) and self.markov == other.markov
                and self.immediate == other.immediate and self.passive == other.passive)

    def __repr__(self):
        return (f"TransitionBundle({self.process}, markov={self.markov}, "
                f"immediate={self.immediate}, passive={self.passive})")


def transition_bundle(P, env=None):
    eng = get_engine(env)
    proc = normalize(P)
    try:
        return eng.bundle_cache[proc]
    except KeyError:
        pass
    gamma = eng.measure(proc.term, INPUT)
    passive = {c: passive_transition(proc, c, PASSIVE_MSG, eng) for c in gamma}
    bundle = TransitionBundle(proc, markov_transition(proc, eng),
                              immediate_transition(proc, eng), passive, eng)
    eng.bundle_cache[proc] = bundle
    return bundle


__all__ = [
    "PASSIVE_MSG", "TransitionBundle", "transition_bundle", "markov_transition",
    "immediate_transition", "passive_transition", "successor_state",
]
