"""Per-channel input weights, output rates and immediate output weights.

For a closed term ``P`` and a channel ``a``:

* ``input_weight(a, P)`` is the total weight of inputs on ``a`` that ``P`` can
  perform right now,
* ``output_rate(a, P)`` the total exponential rate of its outputs on ``a``,
* ``immediate_output_weight(a, P)`` the total weight of its immediate outputs.

All three add over ``+`` and ``|``, ignore a restricted channel, follow the
selected branch of a guard and look through one unfolding of a constant.
Results are memoized in an ``Engine`` attached to the definition environment.
"""
from fractions import Fraction

from .congruence import CanonicalProcess, unfold_constant
from .errors import UnguardedConstantError
from .syntax import Call, DefinitionEnv, Input, Match, New, Output, Par, Sum, eval_expr

INPUT, MARKOV, IMMEDIATE = "input", "markov", "immediate"
KINDS = (INPUT, MARKOV, IMMEDIATE)

ZERO = Fraction(0)


class ChannelMeasure:
    """Channel -> nonnegative rational, with zero entries left out.

    ``total`` sums the free channels. ``hidden`` is the part carried by
    restricted channels, invisible from outside but still able to fire, so
    ``activity = total + hidden`` is the rate of the process's own moves.
    """
    __slots__ = ("_m", "total", "hidden")

    def __init__(self, entries, hidden=ZERO):
        self._m = {c: v for c, v in entries.items() if v}
        self.total = sum(self._m.values(), ZERO)
        self.hidden = hidden

    @property
    def activity(self):
        return self.total + self.hidden

    def __getitem__(self, chan):
        return self._m.get(chan, ZERO)

    def __iter__(self):
        return iter(sorted(self._m, key=str))

    def __len__(self):
        return len(self._m)

    def __eq__(self, other):
        return (isinstance(other, ChannelMeasure) and other._m == self._m
                and other.hidden == self.hidden)

    def __hash__(self):
        return hash((frozenset(self._m.items()), self.hidden))

    def items(self):
        return [(c, self._m[c]) for c in self]

    def __repr__(self):
        return "ChannelMeasure({" + ", ".join(f"{c}: {v}" for c, v in self.items()) + "})"


class Engine:
    """Memo tables for one definition environment."""

    def __init__(self, env=None):
        self.env = env if env is not None else DefinitionEnv()
        self._unfold = {}
        self._measure = {}
        self._unfolding = set()
        # filled by the semantics module
        self.active_cache = {}
        self.passive_cache = {}
        self.bundle_cache = {}

    def unfold(self, call):
        try:
            return self._unfold[call]
        except KeyError:
            body = self._unfold[call] = unfold_constant(call, self.env)
            return body

    def measure(self, term, kind):
        key = (term, kind)
        try:
            return self._measure[key]
        except KeyError:
            pass
        acc = {}
        hidden = self._collect(term, kind, acc)
        result = self._measure[key] = ChannelMeasure(acc, hidden)
        return result

    def _collect(self, term, kind, acc):
        """Add free-channel values of ``term`` into ``acc``; return the hidden part."""
        hidden = ZERO
        if isinstance(term, Input):
            if kind == INPUT:
                c = eval_expr(term.chan)
                acc[c] = acc.get(c, ZERO) + term.weight
        elif isinstance(term, Output):
            if kind != INPUT and term.rate.immediate == (kind == IMMEDIATE):
                c = eval_expr(term.chan)
                acc[c] = acc.get(c, ZERO) + term.rate.value
        elif isinstance(term, (Sum, Par)):
            for t in term.terms:
                m = self.measure(t, kind)
                hidden += m.hidden
                for c, v in m._m.items():
                    acc[c] = acc.get(c, ZERO) + v
        elif isinstance(term, New):
            m = self.measure(term.body, kind)
            hidden += m.hidden
            for c, v in m._m.items():
                if c != term.name:
                    acc[c] = acc.get(c, ZERO) + v
                else:
                    hidden += v
        elif isinstance(term, Match):
            hidden += self._collect(term.branch(), kind, acc)
        elif isinstance(term, Call):
            if (term, kind) in self._unfolding:
                raise UnguardedConstantError(f"unguarded unfolding of {term}")
            self._unfolding.add((term, kind))
            try:
                m = self.measure(self.unfold(term), kind)
                hidden += m.hidden
                for c, v in m._m.items():
                    acc[c] = acc.get(c, ZERO) + v
            finally:
                self._unfolding.discard((term, kind))
        return hidden


_DEFAULT_ENGINE = None


def get_engine(env=None):
    """The memoizing engine attached to ``env`` (created on first use)."""
    global _DEFAULT_ENGINE
    if isinstance(env, Engine):
        return env
    if env is None:
        if _DEFAULT_ENGINE is None:
            _DEFAULT_ENGINE = Engine()
        return _DEFAULT_ENGINE
    engine = getattr(env, "_engine", None)
    if engine is None:
        engine = Engine(env)
        env._engine = engine
    return engine


def _term(p):
    return p.term if isinstance(p, CanonicalProcess) else p


def channel_measure(P, kind, env=None):
    return get_engine(env).measure(_term(P), kind)


def input_weight(a, P, env=None):
    return channel_measure(P, INPUT, env)[a]


def output_rate(a, P, env=None):
    return channel_measure(P, MARKOV, env)[a]


def output_rate_total(P, env=None):
    return channel_measure(P, MARKOV, env).total


def markov_activity(P, env=None):
    """Total exponential rate of ``P``'s own moves, restricted channels included."""
    return channel_measure(P, MARKOV, env).activity


def immediate_output_weight(a, P, env=None):
    return channel_measure(P, IMMEDIATE, env)[a]


def immediate_output_weight_total(P, env=None):
    return channel_measure(P, IMMEDIATE, env).total


def immediate_activity(P, env=None):
    return channel_measure(P, IMMEDIATE, env).activity
