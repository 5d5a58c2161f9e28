import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdebench.increments import (GaussianTriple, NoiseIncrement,
                                 Z3Representation, compose, compose_pairs,
                                 integral_moments, make_increment,
                                 representation_moments,
                                 sample_path_increments, sample_triple)
from sdebench.streams import RandomStream

ALT = Z3Representation.ALT
CUP = Z3Representation.CUP


def mc_triples(n, seed=0):
    y = RandomStream(seed, 0).generator.standard_normal((3, n))
    return GaussianTriple(y[0], y[1], y[2])


def assert_within_5se(samples, expected, label=""):
    n = samples.size
    se = samples.std(ddof=1) / math.sqrt(n)
    dev = abs(float(samples.mean()) - expected)
    assert dev <= 5 * se, f"{label}: |{samples.mean()} - {expected}| > 5*{se}"


# ----------------------------------------------------------- fixed values

def test_alt_z3_at_origin():
    inc = make_increment(1.0, GaussianTriple(0.0, 0.0, 0.0), ALT)
    assert inc.z1 == 0 and inc.z2 == 0
    assert inc.z3 == -0.5


def test_cup_z3_at_origin():
    inc = make_increment(1.0, GaussianTriple(0.0, 0.0, 0.0), CUP)
    assert inc.z3 == pytest.approx(-1 / 6, rel=1e-15)


def test_z1_z2_from_first_variate():
    inc = make_increment(1.0, GaussianTriple(2.0, 0.0, 0.0), ALT)
    assert inc.z1 == 2.0
    assert inc.z2 == 1.0


def test_z1_is_sqrt_h_y1_exactly():
    inc = make_increment(0.25, GaussianTriple(1.25, 0.3, -2.0), ALT)
    assert inc.z1 == math.sqrt(0.25) * 1.25


def test_nonpositive_h_rejected():
    with pytest.raises(ValueError):
        make_increment(0.0, GaussianTriple(0.0, 0.0, 0.0), ALT)
    with pytest.raises(ValueError):
        make_increment(-1e-3, GaussianTriple(0.0, 0.0, 0.0), ALT)


def test_sample_triple_is_deterministic_and_ordered():
    t1 = sample_triple(RandomStream(7, 0))
    t2 = sample_triple(RandomStream(7, 0))
    assert t1 == t2
    raw = RandomStream(7, 0).normals(3)
    assert (t1.y1, t1.y2, t1.y3) == (raw[0], raw[1], raw[2])


# ------------------------------------------------------------ MC moments

def test_triple_components_standard_normal():
    n = 1_000_000
    t = mc_triples(n, seed=11)
    for comp in t:
        assert_within_5se(comp, 0.0, "mean")
        assert_within_5se(comp**2, 1.0, "variance")
    for a, b in [(t.y1, t.y2), (t.y1, t.y3), (t.y2, t.y3)]:
        rho = float(np.corrcoef(a, b)[0, 1])
        assert abs(rho) < 5 / math.sqrt(n)


@pytest.mark.parametrize("rep", [ALT, CUP])
def test_measured_moments_match_representation_algebra(rep):
    n = 1_000_000
    h = 0.1
    inc = make_increment(h, mc_triples(n, seed=13), rep)
    z1, z2, z3 = inc.z1, inc.z2, inc.z3
    samples = {
        "<z2^2>": z2 * z2,
        "<z1 z2>": z1 * z2,
        "<z3>": z3,
        "<z1 z3>": z1 * z3,
        "<z2 z3>": z2 * z3,
        "<z3^2>": z3 * z3,
        "<z1^2 z3>": z1 * z1 * z3,
        "<z1 z2 z3>": z1 * z2 * z3,
        "<z2^2 z3>": z2 * z2 * z3,
    }
    expected = representation_moments(h, rep)
    for name, s in samples.items():
        assert_within_5se(s, expected[name], f"{rep.value} {name}")


def test_alt_zero_moments_and_z2_law():
    # The mean-free properties the ALT representation was built for.
    n = 1_000_000
    h = 0.1
    inc = make_increment(h, mc_triples(n, seed=17), ALT)
    assert_within_5se(inc.z3, 0.0, "<z3>")
    assert_within_5se(inc.z1 * inc.z3, 0.0, "<z1 z3>")
    assert_within_5se(inc.z2 * inc.z3, 0.0, "<z2 z3>")
    assert_within_5se(inc.z2**2, h**3 / 3, "var z2")
    assert_within_5se(inc.z1 * inc.z2, h**2 / 2, "cov(z1,z2)")
    assert_within_5se(inc.z1**2, h, "var z1")


# -------------------------------------------------------------- compose

def test_compose_zero_increments():
    a = NoiseIncrement(0.5, 0.0, 0.0, 0.0)
    b = NoiseIncrement(0.5, 0.0, 0.0, 0.0)
    c = compose(a, b)
    assert c.h == 1.0 and c.z1 == 0 and c.z2 == 0 and c.z3 == 0


def test_compose_right_zero_shifts_z2():
    # With the second half quiet, z2 gains the first half's Wiener
    # increment carried over the second interval: int_h^2h W = h W(h).
    a = NoiseIncrement(0.5, 1.3, 0.2, 0.05)
    b = NoiseIncrement(0.25, 0.0, 0.0, 0.0)
    c = compose(a, b)
    assert c.z1 == a.z1
    assert c.z2 == a.z2 + 0.25 * a.z1
    assert c.z3 == a.z3


finite = st.floats(min_value=-5, max_value=5, allow_nan=False)
small_h = st.floats(min_value=1e-3, max_value=2.0, allow_nan=False)


@given(st.tuples(small_h, finite, finite, finite),
       st.tuples(small_h, finite, finite, finite),
       st.tuples(small_h, finite, finite, finite))
@settings(max_examples=200, deadline=None)
def test_compose_is_associative(ta, tb, tc):
    a, b, c = (NoiseIncrement(*t) for t in (ta, tb, tc))
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    assert left.h == pytest.approx(right.h, rel=1e-12)
    assert left.z1 == pytest.approx(right.z1, rel=1e-9, abs=1e-12)
    assert left.z2 == pytest.approx(right.z2, rel=1e-9, abs=1e-12)
    assert left.z3 == pytest.approx(right.z3, rel=1e-9, abs=1e-12)


def test_composed_halves_match_direct_in_distribution():
    # Two h/2 increments composed vs one h increment: (z1, z2) must
    # agree in law exactly; the representation z3 differs beyond its
    # built-in moments (see test_acceptance for the consequences).
    n = 1_000_000
    h = 0.1
    a = make_increment(h / 2, mc_triples(n, seed=23), ALT)
    b = make_increment(h / 2, mc_triples(n, seed=29), ALT)
    comp = compose(a, b)
    direct = make_increment(h, mc_triples(n, seed=31), ALT)
    for name, getter, expected in [
        ("<z1>", lambda i: i.z1, 0.0),
        ("<z2>", lambda i: i.z2, 0.0),
        ("var z1", lambda i: i.z1**2, h),
        ("var z2", lambda i: i.z2**2, h**3 / 3),
        ("cov", lambda i: i.z1 * i.z2, h**2 / 2),
    ]:
        assert_within_5se(getter(comp), expected, f"composed {name}")
        assert_within_5se(getter(direct), expected, f"direct {name}")
    # Composition of two ALT halves has <z1^2 z3> = h^3/2, vs h^3 for a
    # directly sampled ALT increment; both are checked so a change in
    # either formula is caught.
    assert_within_5se(comp.z1**2 * comp.z3, h**3 / 2, "composed <z1^2 z3>")
    assert_within_5se(direct.z1**2 * direct.z3, h**3, "direct <z1^2 z3>")


def test_deep_composition_approaches_integral_moments():
    # Composing many fine ALT increments converges to the true law of
    # (z1, z2, z3); the cubic moments are the sensitive ones.
    n = 400_000
    h = 0.1
    m_sub = 32
    hs = h / m_sub
    acc = None
    for i in range(m_sub):
        piece = make_increment(hs, mc_triples(n, seed=1000 + i), ALT)
        acc = piece if acc is None else compose(acc, piece)
    truth = integral_moments(h)
    assert acc.h == pytest.approx(h, rel=1e-12)
    # Representation defects decay like 1/m_sub; at 32 pieces the
    # residual bias is ~2% of h^3, inside the 5% tolerance used here.
    mean = float((acc.z1**2 * acc.z3).mean())
    assert mean == pytest.approx(truth["<z1^2 z3>"], rel=0.05)
    assert_within_5se(acc.z2**2, truth["<z2^2>"], "var z2")
    assert_within_5se(acc.z3, 0.0, "<z3>")


def test_compose_pairs_equals_scalar_compose():
    stream = RandomStream(3, 0)
    inc = sample_path_increments(stream, 0.125, 8, rep=ALT, depth=3)
    paired = compose_pairs(inc)
    for j in range(4):
        a = NoiseIncrement(inc.h, inc.z1[2 * j], inc.z2[2 * j],
                           inc.z3[2 * j])
        b = NoiseIncrement(inc.h, inc.z1[2 * j + 1], inc.z2[2 * j + 1],
                           inc.z3[2 * j + 1])
        c = compose(a, b)
        assert paired.z1[j] == c.z1
        assert paired.z2[j] == c.z2
        assert paired.z3[j] == c.z3
    assert paired.h == 0.25


def test_compose_pairs_odd_length_rejected():
    inc = sample_path_increments(RandomStream(3, 1), 0.1, 5, depth=1)
    with pytest.raises(ValueError):
        compose_pairs(inc)


def test_path_increments_match_scalar_triples():
    # Block sampling consumes the stream exactly like repeated
    # sample_triple calls, so stored paths can be replayed either way.
    h, nsteps = 0.01, 16
    block = sample_path_increments(RandomStream(9, 4), h, nsteps,
                                   rep=CUP, depth=3)
    stream = RandomStream(9, 4)
    for i in range(nsteps):
        inc = make_increment(h, sample_triple(stream), CUP)
        assert block.z1[i] == inc.z1
        assert block.z2[i] == inc.z2
        assert block.z3[i] == inc.z3


def test_depth_limits_components():
    inc = sample_path_increments(RandomStream(1, 0), 0.1, 4, depth=1)
    assert inc.z2 is None and inc.z3 is None
    inc2 = sample_path_increments(RandomStream(1, 0), 0.1, 4, depth=2)
    assert inc2.z2 is not None and inc2.z3 is None
    # depth-limited composition keeps the available components
    c = compose_pairs(inc2)
    assert c.z2 is not None and c.z3 is None
