"""State-space exploration and CTMC extraction.

``explore`` enumerates every process reachable through Markovian or immediate
transitions (passive ones are never followed on their own). States with an
immediate transition are *immediate* (IP) and take no time; the rest are
*Markovian* (MP). ``reach_prob`` computes, for every state, the probability of
eventually settling in each MP state when only immediate moves are taken
(the least fixed point, so endlessly immediate behaviour gets probability 0).
``build_ctmc`` then folds immediate chains into the Markovian rates, sending
any missing mass to the absorbing ``Stuck`` state.
"""
from collections import deque
from fractions import Fraction
import os

import networkx as nx
import numpy as np
from scipy import sparse

from .congruence import normalize
from .errors import StateLimitExceeded
from .measures import IMMEDIATE, MARKOV, get_engine
from .semantics import _active, successor_state

DEFAULT_STATE_CAP = 10**6


def default_state_cap():
    value = os.environ.get("STOCHPI_STATE_CAP")
    return int(value) if value else DEFAULT_STATE_CAP


class _StuckState:
    __slots__ = ()

    def __str__(self):
        return "Stuck"

    def __repr__(self):
        return "Stuck"

    def __reduce__(self):
        return (_stuck, ())


def _stuck():
    return STUCK


STUCK = _StuckState()


class StateSpace:
    """Explored states, indexed densely in discovery order.

    ``markov[i]`` and ``immediate[i]`` are ``None`` or ``(rate, entries)``
    where ``entries`` lists ``(label, successor id, probability)``.
    """

    def __init__(self):
        self.states = []
        self.index = {}
        self.markov = []
        self.immediate = []
        self.initial = 0

    def __len__(self):
        return len(self.states)

    def is_immediate(self, i):
        return self.immediate[i] is not None

    @property
    def ip(self):
        return [i for i in range(len(self)) if self.immediate[i] is not None]

    @property
    def mp(self):
        return [i for i in range(len(self)) if self.immediate[i] is None]

    def id_of(self, process):
        return self.index[normalize(process)]


def _entries(eng, proc, kind):
    sub = _active(eng, proc.term, kind)
    if sub is None:
        return None
    rate, raw = sub
    merged = {}
    for (label, res), q in raw.items():
        key = (label, successor_state(label, res))
        merged[key] = merged.get(key, 0) + q
    items = sorted(merged.items(), key=lambda kv: (str(kv[0][0]), kv[0][1].key))
    return rate, items


def explore(P0, env=None, state_cap=None, follow_preempted=True):
    """Breadth-first closure of ``P0`` under Markovian and immediate steps.

    With ``follow_preempted=False`` the Markovian transitions of immediate
    states (which can never fire) are not explored.
    """
    eng = get_engine(env)
    cap = default_state_cap() if state_cap is None else state_cap
    space = StateSpace()
    parent = []

    def add(proc, par_id):
        if proc in space.index:
            return space.index[proc]
        if len(space.states) >= cap:
            witness, k = [], par_id
            while k is not None:
                witness.append(str(space.states[k]))
                k = parent[k]
            raise StateLimitExceeded(cap, len(queue), reversed(witness))
        i = len(space.states)
        space.index[proc] = i
        space.states.append(proc)
        space.markov.append(None)
        space.immediate.append(None)
        parent.append(par_id)
        queue.append(i)
        return i

    queue = deque()
    add(normalize(P0), None)
    while queue:
        i = queue.popleft()
        proc = space.states[i]
        imm = _entries(eng, proc, IMMEDIATE)
        mk = _entries(eng, proc, MARKOV) if (imm is None or follow_preempted) else None
        for slot, data in ((space.immediate, imm), (space.markov, mk)):
            if data is None:
                continue
            rate, items = data
            slot[i] = (rate, [(label, add(succ, i), q) for (label, succ), q in items])
    return space


# ---------------------------------------------------------------- reachability

def solve_reach(succ, targets):
    """Least solution of ``x(v) = sum_w p(v,w) x(w)`` with unit vectors on targets.

    ``succ`` maps every non-target node to a list of ``(node, probability)``
    pairs (sub-stochastic). Returns ``{node: {target: probability}}`` for all
    nodes of ``succ`` and all targets, exactly.
    """
    targets = set(targets)
    result = {t: {t: Fraction(1)} for t in targets}
    graph = nx.DiGraph()
    for v, edges in succ.items():
        if v in targets:
            continue
        graph.add_node(v)
        for w, p in edges:
            if p:
                graph.add_edge(v, w)
    for t in targets:
        if t in graph:
            graph.remove_edges_from(list(graph.out_edges(t)))
    alive = set()
    for t in targets:
        if t in graph:
            alive |= nx.ancestors(graph, t)
    for v in graph.nodes:
        if v not in targets and v not in alive:
            result[v] = {}
    sub = graph.subgraph(alive - targets)
    cond = nx.condensation(sub)
    for c in reversed(list(nx.topological_sort(cond))):
        members = sorted(cond.nodes[c]["members"], key=_node_key)
        _solve_block(members, succ, result)
    return result


def _node_key(v):
    return (str(type(v)), v) if isinstance(v, (int, str)) else (str(type(v)), str(v))


def _solve_block(members, succ, result):
    pos = {v: k for k, v in enumerate(members)}
    n = len(members)
    # (I - P_cc) X = B, with B collecting known vectors
    A = [[Fraction(0)] * n for _ in range(n)]
    B = [dict() for _ in range(n)]
    for k, v in enumerate(members):
        A[k][k] += 1
        for w, p in succ[v]:
            if not p:
                continue
            if w in pos:
                A[k][pos[w]] -= p
            else:
                for t, x in result.get(w, {}).items():
                    B[k][t] = B[k].get(t, 0) + p * x
    if n == 1:
        d = A[0][0]
        result[members[0]] = {t: x / d for t, x in B[0].items() if x}
        return
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col])
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            B[col], B[piv] = B[piv], B[col]
        d = A[col][col]
        if d != 1:
            A[col] = [x / d for x in A[col]]
            B[col] = {t: x / d for t, x in B[col].items()}
        for r in range(n):
            f = A[r][col]
            if r == col or not f:
                continue
            A[r] = [a - f * b for a, b in zip(A[r], A[col])]
            row = B[r]
            for t, x in B[col].items():
                row[t] = row.get(t, 0) - f * x
    for k, v in enumerate(members):
        result[v] = {t: x for t, x in B[k].items() if x}


def reach_prob(space):
    """``{state id: {MP id: probability}}`` for every explored state."""
    targets = space.mp
    succ = {}
    for i in space.ip:
        edges = {}
        for _, j, q in space.immediate[i][1]:
            edges[j] = edges.get(j, 0) + q
        succ[i] = list(edges.items())
    return solve_reach(succ, targets)


# ---------------------------------------------------------------- CTMC

class Ctmc:
    """Rate matrix over MP states plus an optional absorbing ``Stuck`` state.

    ``rates[i]`` maps target index to an exact rational rate; ``states[i]``
    is the canonical process (or ``STUCK``); ``space_ids[i]`` the explored id.
    """

    def __init__(self, states, space_ids, rates, exit_rates, initial_dist):
        self.states = states
        self.space_ids = space_ids
        self.rates = rates
        self.exit_rates = exit_rates
        self.initial_dist = initial_dist

    @property
    def n(self):
        return len(self.states)

    def __len__(self):
        return len(self.states)

    @property
    def has_stuck(self):
        return bool(self.states) and self.states[-1] is STUCK

    @property
    def stuck_index(self):
        return self.n - 1 if self.has_stuck else None

    @property
    def initial(self):
        """Initial state index when the initial distribution is a point mass."""
        if len(self.initial_dist) == 1:
            (i, q), = self.initial_dist.items()
            if q == 1:
                return i
        return None

    def rate(self, i, j):
        return self.rates[i].get(j, Fraction(0))

    def index_of(self, process):
        target = normalize(process)
        for k, s in enumerate(self.states):
            if s == target:
                return k
        raise KeyError(str(target))

    @property
    def num_transitions(self):
        return sum(len(r) for r in self.rates)

    def transitions(self):
        for i, row in enumerate(self.rates):
            for j in sorted(row):
                yield i, j, row[j]

    def rate_matrix(self, dtype=float):
        rows, cols, vals = [], [], []
        for i, j, r in self.transitions():
            rows.append(i)
            cols.append(j)
            vals.append(float(r))
        return sparse.csr_matrix((np.array(vals, dtype=dtype), (rows, cols)),
                                 shape=(self.n, self.n))

    def generator(self):
        R = self.rate_matrix()
        return (R - sparse.diags(np.asarray(R.sum(axis=1)).ravel())).tocsr()

    def initial_vector(self):
        v = np.zeros(self.n)
        for i, q in self.initial_dist.items():
            v[i] = float(q)
        return v

    def row_law_violations(self):
        """Rows where outgoing rates do not add up to the state's exit rate."""
        bad = []
        for i, row in enumerate(self.rates):
            total = sum(row.values(), Fraction(0))
            if total != self.exit_rates[i]:
                bad.append((i, total, self.exit_rates[i]))
        return bad


def build_ctmc(space, reach=None):
    """Fold immediate behaviour into Markovian rates and add ``Stuck`` if needed."""
    reach = reach_prob(space) if reach is None else reach
    init = space.initial
    start = reach.get(init, {}) if space.is_immediate(init) else {init: Fraction(1)}
    init_deficit = 1 - sum(start.values(), Fraction(0))

    seen = set(start)
    queue = deque(sorted(start))
    rows = {}
    while queue:
        s = queue.popleft()
        row = {}
        entry = space.markov[s]
        if entry is not None:
            lam, items = entry
            for _, j, q in items:
                for t, x in reach.get(j, {}).items():
                    row[t] = row.get(t, 0) + lam * q * x
                    if t not in seen:
                        seen.add(t)
                        queue.append(t)
        rows[s] = row

    order = sorted(seen)
    pos = {s: k for k, s in enumerate(order)}
    deficits = {}
    for s in order:
        lam = space.markov[s][0] if space.markov[s] is not None else Fraction(0)
        d = lam - sum(rows[s].values(), Fraction(0))
        if d:
            deficits[s] = d
    need_stuck = bool(deficits) or init_deficit > 0
    states = [space.states[s] for s in order]
    ids = list(order)
    if need_stuck:
        states.append(STUCK)
        ids.append(None)
    stuck = len(states) - 1 if need_stuck else None
    rates, exit_rates = [], []
    for s in order:
        row = {pos[t]: r for t, r in rows[s].items() if r}
        if s in deficits:
            row[stuck] = deficits[s]
        rates.append(row)
        exit_rates.append(space.markov[s][0] if space.markov[s] is not None else Fraction(0))
    if need_stuck:
        rates.append({})
        exit_rates.append(Fraction(0))
    initial = {pos[s]: q for s, q in start.items() if q}
    if init_deficit > 0:
        initial[stuck] = init_deficit
    return Ctmc(states, ids, rates, exit_rates, initial)


def extract(P0, env=None, state_cap=None, follow_preempted=True):
    """``explore`` followed by ``build_ctmc``; returns ``(space, ctmc)``."""
    space = explore(P0, env, state_cap, follow_preempted)
    return space, build_ctmc(space)
