from decimal import Decimal
from fractions import Fraction as F
import math
import re

import numpy as np
import pytest

from stochpi.analysis import (
    export, export_dot, export_tra, format_rate, read_tra, sample_states, simulate,
    simulate_batch, stationary, transient,
)
from stochpi.ctmc import STUCK, Ctmc, extract
from stochpi.errors import DivergenceSuspected
from stochpi.parser import parse, parse_term
from conftest import load_model, model_path

TWO_STATE = "const A := a!<b,2>.B()\nconst B := a!<b,6>.A()\nsystem A()"


def chain(text):
    env, P = parse(text)
    return extract(P, env)[1]


def test_two_state_balance():
    c = chain(TWO_STATE)
    res = stationary(c)
    assert res.method == "exact" and res.residual == 0
    assert res.by_state() == {"A()": F(3, 4), "B()": F(1, 4)}


def test_absorbing_chain():
    env, P = load_model("fig5")
    res = stationary(extract(P, env)[1])
    assert list(res) == [0, 0, 0, 1]


def test_absorption_weights():
    c = chain("system a!<b,1>.x!<y,1>.0 + a!<c,3>.x!<z,1>.0")
    res = stationary(c).by_state()
    assert res["x!<y,1>.0"] == 0 and res["x!<z,1>.0"] == 0
    assert res["0"] == 1
    c = chain("const A := a!<b,1>.A()\nconst B := a!<b,1>.B()\n"
              "system c!<d,1>.A() + c!<e,3>.B()")
    assert stationary(c).by_state() == {"c!<d,1>.A() + c!<e,3>.B()": 0, "A()": F(1, 4),
                                        "B()": F(3, 4)}


def test_cqn2_matches_birth_death_oracle():
    # customers at server 1: k -> k-1 at rate 2, k -> k+1 at rate 3
    weights = [F(3, 2) ** k for k in range(3)]
    oracle = [w / sum(weights) for w in weights]
    env, P = load_model("cqn2")
    c = extract(P, env)[1]
    res = stationary(c)
    for s, p in zip(c.states, res):
        k = int(re.search(r"SQ1\((\d)\)", str(s)).group(1))
        assert p == oracle[k]


def test_float_path_agrees_with_exact():
    env, P = load_model("fig1")
    c = extract(P, env)[1]
    exact = stationary(c).as_float()
    approx = stationary(c, exact_limit=0)
    assert approx.method == "sparse-direct" and approx.residual <= 1e-12
    assert np.allclose(approx.as_float(), exact, atol=1e-12)


def test_transient_trivial_cases():
    c = chain(TWO_STATE)
    assert list(transient(c, 0.0)) == [1.0, 0.0]
    one = chain("system 0")
    assert list(transient(one, 5.0)) == [1.0]


def test_transient_exponential():
    c = chain("system a!<b,2>.0")
    p = transient(c, 1.0)
    assert abs(p[0] - math.exp(-2)) <= 1e-9 and abs(p[1] - (1 - math.exp(-2))) <= 1e-9


def test_transient_converges_to_stationary():
    env, P = load_model("fig1")
    c = extract(P, env)[1]
    tv = 0.5 * np.abs(transient(c, 50.0) - stationary(c).as_float()).sum()
    assert tv <= 1e-6


def test_simulation_is_reproducible():
    path = model_path("fig1")
    a, b = simulate(path, 20.0, seed=7), simulate(path, 20.0, seed=7)
    assert list(a) == list(b)
    assert list(simulate(path, 20.0, seed=8)) != list(a)
    assert all(t1 < t2 for t1, t2 in zip(a.times, a.times[1:]))
    assert abs(sum(a.occupancy().values()) - 1) < 1e-12


def test_sojourn_mean_and_split():
    runs = simulate_batch(model_path("fig5"), 100.0, seed=11, runs=10_000)
    first = np.array([r.times[1] for r in runs])
    assert abs(first.mean() - 0.1) <= 3 * 0.1 / math.sqrt(len(first))
    to_p4 = sum(str(r.states[1]) == "c!<b1,6>.0" for r in runs) / len(runs)
    assert abs(to_p4 - 0.4) <= 3 * math.sqrt(0.4 * 0.6 / len(runs))


def test_sample_states_reproducible():
    a = sample_states(model_path("cqn2"), 5.0, seed=1, runs=200)
    assert a == sample_states(model_path("cqn2"), 5.0, seed=1, runs=200)
    assert sum(a.values()) == 200


def test_divergence_detected():
    text = "const A := a!<b,inf:1>.B()\nconst B := a!<b,inf:1>.A()\nsystem A()"
    with pytest.raises(DivergenceSuspected):
        simulate(text, 1.0, seed=0, max_immediate=100)


def test_tra_export_example_four():
    env, P = load_model("fig5")
    text = export_tra(extract(P, env)[1])
    assert text == "STATES 4\nTRANSITIONS 4\n0 1 4\n0 2 6\n1 3 6\n2 3 6\n"


def test_tra_export_single_state():
    assert export(chain("system 0"), "tra") == "STATES 1\nTRANSITIONS 0\n"


def test_tra_export_example_two_digits():
    env, P = load_model("fig1")
    lines = export_tra(extract(P, env)[1]).splitlines()
    assert lines[2:6] == ["0 1 0.666666666667", "0 2 1.33333333333", "0 3 2", "0 4 4"]


def test_format_rate():
    assert format_rate(F(2, 3)) == "0.666666666667"
    assert format_rate(10) == "10"
    assert format_rate(F(1, 8)) == "0.125"
    assert format_rate(F(123456789012345)) == "123456789012000"


def test_tra_round_trip():
    env, P = load_model("oqn")
    c = extract(P, env, follow_preempted=False)[1]
    n, rates = read_tra(export_tra(c))
    assert n == c.n and len(rates) == c.num_transitions
    for i, j, r in c.transitions():
        assert abs(rates[(i, j)] - Decimal(r.numerator) / Decimal(r.denominator)) \
            <= Decimal(r.numerator) / Decimal(r.denominator) * Decimal("1e-11")


def test_dot_export():
    text = "const A := a!<b,inf:1>.B()\nconst B := a!<b,inf:1>.A()\nsystem a!<c,5>.A()"
    c = chain(text)
    dot = export_dot(c)
    assert dot.startswith("digraph ctmc {")
    assert 'label="1: Stuck", shape=doublecircle' in dot
    assert 's0 -> s1 [label="5"]' in dot
    assert c.states[1] is STUCK


def test_unknown_export_format():
    with pytest.raises(ValueError):
        export(chain("system 0"), "csv")


def test_ctmc_built_by_hand():
    c = Ctmc(["A", "B"], [0, 1], [{1: F(2)}, {0: F(6)}], [F(2), F(6)], {0: F(1)})
    assert list(stationary(c)) == [F(3, 4), F(1, 4)]
