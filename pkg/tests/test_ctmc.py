from fractions import Fraction as F
import random

from hypothesis import given, settings, strategies as st
import pytest

from stochpi.analysis import export_tra
from stochpi.congruence import normalize
from stochpi.ctmc import STUCK, build_ctmc, explore, extract, reach_prob, solve_reach
from stochpi.errors import StateLimitExceeded
from stochpi.measures import markov_activity
from stochpi.parser import parse, parse_term
from conftest import load_model
from oracles import acyclic_exact, random_immediate_graph, value_iteration

CYCLE = "const A := a!<b,inf:1>.B()\nconst B := a!<b,inf:1>.A()\n"


def test_example_four_state_space():
    env, P = load_model("fig5")
    space = explore(P, env)
    assert len(space) == 9
    assert space.ip == [1, 2, 3, 5, 7]
    assert space.mp == [0, 4, 6, 8]
    assert str(space.states[4]) == "c!<b1,6>.0" and str(space.states[8]) == "0"


def test_example_four_reach():
    env, P = load_model("fig5")
    space = explore(P, env)
    reach = reach_prob(space)
    assert reach[1] == {4: F(2, 5), 6: F(3, 5)}
    assert reach[2] == {4: 1} and reach[3] == {6: 1}
    for m in space.mp:
        assert reach[m] == {m: 1}


def test_example_four_ctmc():
    env, P = load_model("fig5")
    _, c = extract(P, env)
    assert [str(s) for s in c.states[1:]] == ["c!<b1,6>.0", "c!<b2,6>.0", "0"]
    assert not c.has_stuck and c.initial == 0
    assert list(c.transitions()) == [(0, 1, 4), (0, 2, 6), (1, 3, 6), (2, 3, 6)]


def test_example_two_ctmc():
    env, P = load_model("fig1")
    space, c = extract(P, env)
    assert c.n == 5 and len(space) == 5 and not space.ip
    assert sorted(c.rates[0].values()) == [F(2, 3), F(4, 3), 2, 4]


def test_nil_explores_to_one_terminal_state():
    space, c = extract(parse_term("0"))
    assert len(space) == 1 and space.mp == [0]
    assert c.n == 1 and c.rates == [{}]


def test_immediate_cycle_has_no_reach():
    env, _ = parse(CYCLE + "system 0")
    space = explore(parse_term("A() | c(x,1).0", env), env)
    assert reach_prob(space)[0] == {}


def test_stuck_absorbs_diverging_rate():
    env, _ = parse(CYCLE + "system 0")
    space, c = extract(parse_term("a!<b,5>.A()", env), env)
    assert c.has_stuck and c.states[-1] is STUCK
    assert c.rate(0, c.stuck_index) == 5 and c.rates[-1] == {}
    assert c.row_law_violations() == []


def test_immediate_initial_state_maps_through_reach():
    env, _ = parse(CYCLE + "system 0")
    _, c = extract(parse_term("A()", env), env)
    assert c.states == [STUCK] and c.initial_dist == {0: 1}
    _, c = extract(parse_term("c!<d,inf:1>.a!<b,2>.0 + c!<e,inf:1>.A()", env), env)
    assert c.initial_dist == {0: F(1, 2), c.stuck_index: F(1, 2)}


def test_partial_divergence_goes_to_stuck():
    env, _ = parse(CYCLE + "system 0")
    P = parse_term("a!<z,3>.(c!<d,inf:1>.0 + c!<e,inf:3>.A())", env)
    _, c = extract(P, env)
    assert c.rate(0, 1) == F(3, 4) and c.rate(0, c.stuck_index) == F(9, 4)


def test_priority_law():
    # the exponential move of an immediate state never reaches the chain
    P = parse_term("d!<e,inf:1>.a!<b,1>.0 | x!<y,100>.0")
    space, c = extract(P)
    assert space.markov[0] is not None and space.is_immediate(0)
    assert c.initial == 0 and str(c.states[0]) == "a!<b,1>.0 | x!<y,100>.0"
    lean = explore(P, follow_preempted=False)
    assert lean.markov[0] is None and len(lean) < len(space)
    assert export_tra(build_ctmc(lean)) == export_tra(c)


@pytest.mark.parametrize("name", ["ex1", "fig1", "fig5", "cqn2"])
def test_row_law(name):
    env, P = load_model(name)
    _, c = extract(P, env)
    assert c.row_law_violations() == []
    for s, row, lam in zip(c.states, c.rates, c.exit_rates):
        if s is not STUCK:
            assert lam == markov_activity(s, env) == sum(row.values(), F(0))


def test_determinism():
    env, P = load_model("cqn2")
    a = export_tra(extract(P, env)[1])
    env2, P2 = load_model("cqn2")
    assert export_tra(extract(P2, env2)[1]) == a


def test_state_cap(monkeypatch):
    env, _ = parse("const C(n) := a!<n,1>.C(n+1)\nsystem 0")
    with pytest.raises(StateLimitExceeded) as exc:
        explore(parse_term("C(0)", env), env, state_cap=10)
    assert "C(9)" in str(exc.value)
    monkeypatch.setenv("STOCHPI_STATE_CAP", "5")
    with pytest.raises(StateLimitExceeded):
        explore(parse_term("C(0)", env), env)


def test_solve_reach_targets_and_traps():
    succ = {0: [(1, F(1, 2)), (9, F(1, 2))], 1: [(1, F(1))], 2: [(0, F(1, 3)), (8, F(2, 3))]}
    r = solve_reach(succ, [8, 9])
    assert r[0] == {9: F(1, 2)} and r[1] == {} and r[2] == {9: F(1, 6), 8: F(2, 3)}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_minimal_solution(seed, acyclic):
    succ, targets = random_immediate_graph(random.Random(seed), acyclic)
    exact = solve_reach(succ, targets)
    approx = value_iteration(succ, targets)
    for v in succ:
        assert sum(exact[v].values()) <= 1
        for t in targets:
            assert abs(float(exact[v].get(t, 0)) - approx[v][t]) <= 1e-12
    if acyclic:
        ref = acyclic_exact(succ, targets)
        for v in succ:
            assert exact[v] == {t: x for t, x in ref[v].items() if x}
