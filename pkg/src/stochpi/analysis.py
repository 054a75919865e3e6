"""Steady-state and transient solution, simulation and export of extracted chains."""
from collections import Counter
from decimal import Decimal, localcontext
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.stats import poisson

from .congruence import normalize
from .ctmc import STUCK, solve_reach
from .errors import DivergenceSuspected, NotConverged
from .measures import get_engine
from .semantics import successor_state, transition_bundle
from .syntax import fmt_q

EXACT_LIMIT = 2000
RESIDUAL_TOL = 1e-12


# ---------------------------------------------------------------- steady state

class StationaryResult:
    """Long-run distribution over the chain's states (index order of the ``Ctmc``)."""

    def __init__(self, ctmc, distribution, method, residual):
        self.ctmc = ctmc
        self.distribution = distribution
        self.method = method
        self.residual = residual

    def __getitem__(self, i):
        return self.distribution[i]

    def __len__(self):
        return len(self.distribution)

    def as_float(self):
        return np.array([float(x) for x in self.distribution])

    def by_state(self):
        return {str(s): p for s, p in zip(self.ctmc.states, self.distribution)}


def _graph(ctmc):
    g = nx.DiGraph()
    g.add_nodes_from(range(ctmc.n))
    for i, j, _ in ctmc.transitions():
        g.add_edge(i, j)
    return g


def stationary(ctmc, exact_limit=EXACT_LIMIT):
    """Long-run distribution from the chain's initial distribution.

    Each bottom strongly connected class reachable from the initial states is
    solved on its own and weighted by the probability of being absorbed in it.
    Exact rational arithmetic is used up to ``exact_limit`` states.
    """
    g = _graph(ctmc)
    reachable = set()
    for i in ctmc.initial_dist:
        reachable |= nx.descendants(g, i) | {i}
    sub = g.subgraph(reachable)
    cond = nx.condensation(sub)
    bottoms = [sorted(cond.nodes[c]["members"]) for c in cond if cond.out_degree(c) == 0]
    exact = ctmc.n <= exact_limit
    in_bottom = {v for b in bottoms for v in b}
    absorb = _absorption(ctmc, sorted(reachable - in_bottom), in_bottom, exact)
    zero = Fraction(0) if exact else 0.0
    pi = [zero] * ctmc.n
    residual = 0.0
    for members in bottoms:
        weight = sum((q * absorb.get(i, {}).get(b, 0) for i, q in ctmc.initial_dist.items()
                      for b in members), zero) if exact else sum(
            float(q) * absorb.get(i, {}).get(b, 0.0) for i, q in ctmc.initial_dist.items()
            for b in members)
        if not weight:
            continue
        if exact:
            local = _solve_class_exact(ctmc, members)
        else:
            local, res = _solve_class_float(ctmc, members)
            residual = max(residual, res)
        for v, p in zip(members, local):
            pi[v] = weight * p
    return StationaryResult(ctmc, pi, "exact" if exact else "sparse-direct", residual)


def _absorption(ctmc, transient, targets, exact):
    """Per state: probability of ending in each bottom-class state (jump chain)."""
    if exact:
        succ = {}
        for v in transient:
            out = ctmc.rates[v]
            total = sum(out.values(), Fraction(0))
            succ[v] = [(w, r / total) for w, r in out.items()]
        res = solve_reach(succ, targets)
        for t in targets:
            res[t] = {t: Fraction(1)}
        return res
    res = {t: {t: 1.0} for t in targets}
    if not transient:
        return res
    tpos = {v: k for k, v in enumerate(transient)}
    bl = sorted(targets)
    bpos = {v: k for k, v in enumerate(bl)}
    A = sparse.lil_matrix((len(transient), len(transient)))
    B = sparse.lil_matrix((len(transient), len(bl)))
    for v in transient:
        out = ctmc.rates[v]
        total = float(sum(out.values()))
        A[tpos[v], tpos[v]] = 1.0
        for w, r in out.items():
            if w in tpos:
                A[tpos[v], tpos[w]] -= float(r) / total
            else:
                B[tpos[v], bpos[w]] += float(r) / total
    X = spsolve(A.tocsc(), B.tocsc())
    X = X.toarray() if sparse.issparse(X) else np.asarray(X).reshape(len(transient), len(bl))
    for v in transient:
        row = X[tpos[v]]
        res[v] = {bl[k]: row[k] for k in np.nonzero(row)[0]}
    return res


def _solve_class_exact(ctmc, members):
    """Solve ``pi Q = 0, sum pi = 1`` on one closed class with sparse rational elimination."""
    n = len(members)
    if n == 1:
        return [Fraction(1)]
    pos = {v: k for k, v in enumerate(members)}
    # column k of Q gives equation k of pi Q = 0: sum_i pi_i Q[i,k] = 0
    eqs = [dict() for _ in range(n)]
    for v in members:
        i = pos[v]
        out = ctmc.rates[v]
        total = sum(out.values(), Fraction(0))
        eqs[i][i] = eqs[i].get(i, 0) - total
        for w, r in out.items():
            k = pos[w]
            eqs[k][i] = eqs[k].get(i, 0) + r
    # replace the last balance equation by normalization
    eqs[-1] = {i: Fraction(1) for i in range(n)}
    rhs = [Fraction(0)] * (n - 1) + [Fraction(1)]
    return _sparse_solve(eqs, rhs)


def _sparse_solve(rows, rhs):
    """Gauss-Jordan elimination on dict rows (column -> coefficient)."""
    n = len(rows)
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    col_rows = {}
    for r, row in enumerate(rows):
        for c in row:
            col_rows.setdefault(c, set()).add(r)
    pivot_of = {}
    done = set()
    for c in range(n):
        cands = [r for r in col_rows.get(c, ()) if r not in done and rows[r].get(c)]
        if not cands:
            raise ArithmeticError("singular system")
        p = min(cands, key=lambda r: (len(rows[r]), r))
        done.add(p)
        pivot_of[c] = p
        prow = rows[p]
        d = prow[c]
        if d != 1:
            for k in prow:
                prow[k] /= d
            rhs[p] /= d
        for r in list(col_rows[c]):
            if r == p:
                continue
            f = rows[r].get(c)
            if not f:
                continue
            row = rows[r]
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if nv:
                    if k not in row:
                        col_rows.setdefault(k, set()).add(r)
                    row[k] = nv
                else:
                    row.pop(k, None)
                    col_rows[k].discard(r)
            rhs[r] -= f * rhs[p]
    return [rhs[pivot_of[c]] for c in range(n)]


def _solve_class_float(ctmc, members):
    n = len(members)
    if n == 1:
        return [1.0], 0.0
    pos = {v: k for k, v in enumerate(members)}
    rows, cols, vals = [], [], []
    for v in members:
        i = pos[v]
        out = ctmc.rates[v]
        total = float(sum(out.values()))
        rows.append(i)
        cols.append(i)
        vals.append(-total)
        for w, r in out.items():
            rows.append(i)
            cols.append(pos[w])
            vals.append(float(r))
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A = Q.T.tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    pi = spsolve(A.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    scale = max(1.0, float(abs(Q).max()))
    residual = float(np.abs(Q.T @ pi).max()) / scale
    if residual > RESIDUAL_TOL:
        raise NotConverged("stationary solve did not reach the residual tolerance", residual)
    return list(pi), residual


# ---------------------------------------------------------------- transient

def transient(ctmc, t, initial=None, tol=1e-10):
    """State probabilities at time ``t`` by uniformization (error <= ``tol`` per entry)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    v = ctmc.initial_vector() if initial is None else np.asarray(initial, dtype=float)
    exits = np.array([float(sum(r.values())) for r in ctmc.rates])
    lam = float(exits.max()) if len(exits) else 0.0
    if t == 0 or lam == 0:
        return v.copy()
    R = ctmc.rate_matrix()
    P = (R / lam + sparse.diags(1.0 - exits / lam)).tocsr()
    PT = P.T.tocsr()
    mean = lam * t
    right = int(poisson.isf(tol / 2, mean)) + 1
    left = max(0, int(poisson.ppf(tol / 2, mean)) - 1)
    weights = poisson.pmf(np.arange(left, right + 1), mean)
    out = np.zeros_like(v)
    for k in range(right + 1):
        if k >= left:
            out += weights[k - left] * v
        v = PT @ v
    return out


# ---------------------------------------------------------------- simulation

class Trajectory:
    """Visited Markovian states with entry times and the action that led there."""

    def __init__(self, seed, horizon):
        self.seed = seed
        self.horizon = horizon
        self.states = []
        self.times = []
        self.labels = []

    def append(self, state, time, label):
        self.states.append(state)
        self.times.append(time)
        self.labels.append(label)

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.states, self.times, self.labels))

    def state_at(self, t):
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[max(k, 0)]

    def occupancy(self):
        """Fraction of ``[0, horizon]`` spent in each state."""
        acc = Counter()
        ends = self.times[1:] + [self.horizon]
        for s, a, b in zip(self.states, self.times, ends):
            acc[s] += min(b, self.horizon) - a
        return {s: d / self.horizon for s, d in acc.items()} if self.horizon else {}


class _Sampler:
    """Per-state float tables built lazily from the transition bundles."""

    def __init__(self, env, max_immediate):
        self.eng = get_engine(env)
        self.max_immediate = max_immediate
        self._table = {}

    def table(self, proc):
        try:
            return self._table[proc]
        except KeyError:
            pass
        b = transition_bundle(proc, self.eng)
        entry = b.immediate if b.immediate is not None else b.markov
        if entry is None:
            tab = (None, 0.0, None, None)
        else:
            rate, pad = entry
            items = pad.sorted_items()
            cum = np.cumsum([float(q) for _, q in items])
            cum[-1] = 1.0
            succ = [(lab, successor_state(lab, p)) for (lab, p), _ in items]
            tab = (b.immediate is not None, float(rate), cum, succ)
        self._table[proc] = tab
        return tab

    def pick(self, tab, rng):
        k = int(np.searchsorted(tab[2], rng.random(), side="right"))
        return tab[3][min(k, len(tab[3]) - 1)]

    def settle(self, proc, rng):
        """Follow immediate moves until a Markovian state is reached."""
        steps = 0
        tab = self.table(proc)
        while tab[0]:
            steps += 1
            if steps > self.max_immediate:
                raise DivergenceSuspected(
                    f"more than {self.max_immediate} consecutive immediate steps from {proc}")
            proc = self.pick(tab, rng)[1]
            tab = self.table(proc)
        return proc, tab

    def run(self, P0, horizon, rng, trajectory=None):
        proc, tab = self.settle(normalize(P0), rng)
        t, label = 0.0, None
        while True:
            if trajectory is not None:
                trajectory.append(proc, t, label)
            if tab[0] is None:
                return proc
            t += rng.exponential(1.0 / tab[1])
            if t > horizon:
                return proc
            label, nxt = self.pick(tab, rng)
            proc, tab = self.settle(nxt, rng)


def _model(model):
    from .parser import load, parse
    if isinstance(model, tuple):
        return model
    if isinstance(model, str) and "\n" not in model and model.endswith(".spi"):
        return load(model)
    return parse(model)


def simulate(model, horizon, seed, max_immediate=10**5):
    """One trajectory of the model up to ``horizon`` (time units), reproducible by seed.

    ``model`` is ``(env, term)``, model text or a ``.spi`` path.
    """
    env, P0 = _model(model)
    traj = Trajectory(seed, horizon)
    _Sampler(env, max_immediate).run(P0, horizon, np.random.default_rng(seed), traj)
    return traj


def simulate_batch(model, horizon, seed, runs, max_immediate=10**5):
    """Independent trajectories with streams spawned from one master seed."""
    env, P0 = _model(model)
    sampler = _Sampler(env, max_immediate)
    out = []
    for child in np.random.SeedSequence(seed).spawn(runs):
        traj = Trajectory(seed, horizon)
        sampler.run(P0, horizon, np.random.default_rng(child), traj)
        out.append(traj)
    return out


def sample_states(model, horizon, seed, runs, max_immediate=10**5):
    """Counter of the state occupied at ``horizon`` over ``runs`` independent runs."""
    env, P0 = _model(model)
    sampler = _Sampler(env, max_immediate)
    counts = Counter()
    for child in np.random.SeedSequence(seed).spawn(runs):
        counts[sampler.run(P0, horizon, np.random.default_rng(child))] += 1
    return counts


# ---------------------------------------------------------------- export

def format_rate(r):
    """Decimal with 12 significant digits, no exponent, no trailing zeros."""
    r = Fraction(r)
    with localcontext() as ctx:
        ctx.prec = 12
        d = (Decimal(r.numerator) / Decimal(r.denominator)).normalize()
    s = format(d, "f")
    return s


def export_tra(ctmc):
    lines = [f"STATES {ctmc.n}", f"TRANSITIONS {ctmc.num_transitions}"]
    lines += [f"{i} {j} {format_rate(r)}" for i, j, r in ctmc.transitions()]
    return "\n".join(lines) + "\n"


def _dot_escape(s):
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(ctmc):
    lines = ["digraph ctmc {", "  rankdir=LR;"]
    init = set(ctmc.initial_dist)
    for i, s in enumerate(ctmc.states):
        attrs = [f'label="{i}: {_dot_escape(str(s))}"']
        attrs.append("shape=doublecircle" if s is STUCK else "shape=ellipse")
        if i in init:
            attrs.append("style=bold")
        lines.append(f"  s{i} [{', '.join(attrs)}];")
    for i, j, r in ctmc.transitions():
        lines.append(f'  s{i} -> s{j} [label="{fmt_q(r)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export(ctmc, fmt):
    if fmt == "tra":
        return export_tra(ctmc)
    if fmt == "dot":
        return export_dot(ctmc)
    raise ValueError(f"unknown export format {fmt!r}")


def read_tra(text):
    """Parse ``tra`` text into ``(n, {(src, dst): rate})`` with ``Decimal`` rates."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or lines[0][0] != "STATES" or lines[1][0] != "TRANSITIONS":
        raise ValueError("missing STATES/TRANSITIONS header")
    n, m = int(lines[0][1]), int(lines[1][1])
    body = lines[2:]
    if len(body) != m:
        raise ValueError(f"expected {m} transitions, found {len(body)}")
    rates = {}
    for src, dst, rate in body:
        rates[(int(src), int(dst))] = Decimal(rate)
    return n, rates
