from fractions import Fraction as F

from hypothesis import given, strategies as st
import pytest

from stochpi.congruence import normalize
from stochpi.distributions import (
    ActionProcDist, OutputLabel, ProcDist, TAU, convex_combine, dist_add, dist_par,
    restrict_label, restrict_pad,
)
from stochpi.errors import MassOverflow, WeightsNotNormalized
from stochpi.parser import parse_term


def N(text):
    return normalize(parse_term(text))


P, Q, A, B = N("a!<b,1>.0"), N("c!<d,2>.0"), N("e(x,1).0"), N("f!<g,3>.0")


def test_convex_combine_example():
    ny, mz = OutputLabel("n", "y"), OutputLabel("m", "z")
    d = convex_combine([(F(3, 5), ActionProcDist.dirac((ny, A))),
                        (F(2, 5), ActionProcDist.dirac((mz, B)))])
    assert dict(d.items()) == {(ny, A): F(3, 5), (mz, B): F(2, 5)}
    assert d.marginal(ny) == ProcDist({A: F(3, 5)}) and d.actions() == {ny, mz}


def test_convex_combine_identity_and_merge():
    D = ProcDist({P: F(1, 3), Q: F(2, 3)})
    assert convex_combine([(1, D)]) == D
    assert convex_combine([(F(1, 2), ProcDist.dirac(P)), (F(1, 2), ProcDist.dirac(P))]) \
        == ProcDist.dirac(P)
    with pytest.raises(WeightsNotNormalized):
        convex_combine([(F(1, 2), D)])


def test_dist_add():
    assert dist_add(ProcDist({P: F(1, 3)}), ProcDist({P: F(1, 6)})) == ProcDist({P: F(1, 2)})
    assert dist_add(ProcDist({P: F(1, 3)}), ProcDist({Q: F(2, 3)})) \
        == ProcDist({P: F(1, 3), Q: F(2, 3)})
    with pytest.raises(MassOverflow):
        dist_add(ProcDist({P: F(3, 4)}), ProcDist({Q: F(1, 2)}))


def test_dist_par():
    r = dist_par(ProcDist({P: F(1, 3), Q: F(2, 3)}), ProcDist.dirac(A))
    assert r == ProcDist({N("a!<b,1>.0 | e(x,1).0"): F(1, 3), N("c!<d,2>.0 | e(x,1).0"): F(2, 3)})
    half = dist_par(ProcDist({P: F(1, 2)}), ProcDist({Q: F(1, 2)}))
    assert half == ProcDist({N("a!<b,1>.0 | c!<d,2>.0"): F(1, 4)}) and half.mass == F(1, 4)


def test_dist_par_example_one():
    env_text = "n!<y,3>.0 | (m(x,2).d!<x,1>.0 + m(x,4).e!<x,1>.0)"
    left = ProcDist.dirac(N("m(x,2).d!<x,1>.0 + m(x,4).e!<x,1>.0"))
    right = ProcDist.dirac(N("m!<z,2>.0 | f!<y,1>.0"))
    got = dist_par(left, right)
    assert got == ProcDist.dirac(
        N("(m(x,2).d!<x,1>.0 + m(x,4).e!<x,1>.0) | m!<z,2>.0 | f!<y,1>.0"))
    assert env_text  # the residual of the n-broadcast in the first example


def test_restrict_pad_clauses():
    body = N("a(x,1).0 | b!<a,1>.0")
    out = restrict_pad("a", ActionProcDist.dirac((OutputLabel("a", "b"), body)))
    assert dict(out.items()) == {(TAU, N("new a in (a(x,1).0 | b!<a,1>.0)")): 1}
    out = restrict_pad("a", ActionProcDist.dirac((OutputLabel("b", "a"), body)))
    assert dict(out.items()) == {(OutputLabel("b", "a", {"a"}), body): 1}
    out = restrict_pad("a", ActionProcDist.dirac((TAU, body)))
    assert dict(out.items()) == {(TAU, N("new a in (a(x,1).0 | b!<a,1>.0)")): 1}


def test_restrict_channel_clause_wins():
    # output of a on a itself: clause one (tau) applies first
    lab, proc = restrict_label("a", OutputLabel("a", "a"), N("a!<c,1>.0"))
    assert lab == TAU and proc == N("new a in a!<c,1>.0")


def test_restrict_pad_preserves_mass_and_merges():
    pad = ActionProcDist({(OutputLabel("a", "b"), P): F(1, 2),
                          (OutputLabel("a", "c"), P): F(1, 2)})
    out = restrict_pad("a", pad)
    assert out.mass == 1 and len(out) == 1


probs = st.fractions(min_value=0, max_value=1).filter(lambda q: q.denominator < 50)


@given(probs, probs, probs)
def test_add_commutes_and_associates(x, y, z):
    if x + y + z > 1:
        return
    dx, dy, dz = ProcDist({P: x}), ProcDist({Q: y}), ProcDist({P: z, A: 0})
    assert dist_add(dx, dy) == dist_add(dy, dx)
    assert dist_add(dist_add(dx, dy), dz) == dist_add(dx, dist_add(dy, dz))
    assert dist_par(dx, dy) == dist_par(dy, dx)
    assert dist_par(dx, dy).mass == x * y


def test_no_zero_entries():
    d = ProcDist({P: 0, Q: F(1, 2)})
    assert list(d) == [Q]
