import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import gamma

from sdebench.model import (CalculusConvention, EquilibriumSpec,
                            benchmark_problem, convert_drift,
                            equilibrium_density, sample_equilibrium,
                            validation_problem)
from sdebench.streams import RandomStream

ITO = CalculusConvention.ITO
STRAT = CalculusConvention.STRATONOVICH


def fd(fn, x, t=0.0, step=1e-5):
    return (fn(x + step, t) - fn(x - step, t)) / (2 * step)


# ------------------------------------------------------------- benchmark

def test_benchmark_values_at_origin():
    p = benchmark_problem(0.05)
    assert p.f(0.0, 0.0) == 0.0
    assert p.g(0.0, 0.0) == pytest.approx(math.sqrt(0.1), rel=1e-15)


def test_benchmark_hand_values():
    p = benchmark_problem(0.05)
    assert p.f(1.0, 0.0) == pytest.approx(-2.0, rel=1e-15)
    assert p.g(1.0, 0.0) == pytest.approx(0.6324555320336759, rel=1e-12)


@pytest.mark.parametrize("x", [0.7, -1.3, 2.4, 0.0])
def test_benchmark_derivatives_match_finite_differences(x):
    p = benchmark_problem(0.05)
    t = 0.0
    assert p.fp(x, t) == pytest.approx(fd(p.f, x), rel=1e-6, abs=1e-6)
    assert p.fpp(x, t) == pytest.approx(fd(p.fp, x), rel=1e-6, abs=1e-6)
    assert p.gp(x, t) == pytest.approx(fd(p.g, x), rel=1e-6, abs=1e-6)
    assert p.gpp(x, t) == pytest.approx(fd(p.gp, x), rel=1e-6, abs=1e-6)
    assert p.gppp(x, t) == pytest.approx(fd(p.gpp, x), rel=1e-6, abs=1e-5)


def test_benchmark_rejects_nonpositive_D():
    with pytest.raises(ValueError):
        benchmark_problem(0.0)
    with pytest.raises(ValueError):
        benchmark_problem(-0.1)


# ------------------------------------------------------------ equilibrium

def test_density_at_origin_is_norm():
    spec = EquilibriumSpec(0.05, n=0)
    assert equilibrium_density(0.0, spec) == pytest.approx(spec.norm,
                                                           rel=1e-15)


def test_norm_value_for_D005():
    # Gamma-function oracle: Gamma(11) / (Gamma(10.5) sqrt(pi))
    spec = EquilibriumSpec(0.05, n=0)
    expected = gamma(11) / (gamma(10.5) * math.sqrt(math.pi))
    assert spec.norm == pytest.approx(expected, rel=1e-12)
    assert spec.norm == pytest.approx(1.8066, rel=1e-4)


def test_density_symmetry():
    spec = EquilibriumSpec(0.1, n=1)
    x = np.linspace(0, 8, 41)
    assert np.array_equal(equilibrium_density(x, spec),
                          equilibrium_density(-x, spec))


@pytest.mark.parametrize("D", [0.01, 0.05, 0.1, 0.25, 0.5])
@pytest.mark.parametrize("n", [0, 1])
def test_density_normalisation(D, n):
    spec = EquilibriumSpec(D, n=n)
    val, _ = integrate.quad(lambda x: equilibrium_density(x, spec),
                            -50, 50, limit=400)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_spec_validation():
    with pytest.raises(ValueError):
        EquilibriumSpec(0.0, n=0)
    with pytest.raises(ValueError):
        EquilibriumSpec(0.1, n=2)


def test_student_t_dof_for_D005():
    spec = EquilibriumSpec(0.05, n=0)
    assert 1 + 2 * spec.alpha + 2 * spec.n == pytest.approx(21.0)


def test_sampler_matches_density_ks():
    n = 1_000_000
    spec = EquilibriumSpec(0.1, n=0)
    xs = sample_equilibrium(RandomStream(123, 0), spec, size=n)
    nu = 1 + 2 * spec.alpha
    # scipy's Student-t CDF is an independent implementation of the
    # target law (betainc-based, not a normal/chi2 construction).
    stat = stats.kstest(xs, lambda x: stats.t.cdf(x * math.sqrt(nu), nu)).statistic
    assert stat < 1.95 / math.sqrt(n)
    assert abs(np.median(xs)) < 5 / math.sqrt(n)


# ------------------------------------------------------------ conversion

def test_convert_identity_when_same():
    p = benchmark_problem(0.05)
    assert convert_drift(p, ITO, ITO) is p


def test_convert_constant_g_keeps_drift():
    p, _ = validation_problem(0.0)   # g == 0
    q = convert_drift(p, STRAT, ITO)
    for x in (-2.0, 0.3, 1.7):
        assert q.f(x, 0.0) == p.f(x, 0.0)


def test_convert_benchmark_hand_value():
    p = benchmark_problem(0.05)
    q = convert_drift(p, STRAT, ITO)
    # f + (1/2) g g' at x=1: -2 + 0.2
    assert q.f(1.0, 0.0) == pytest.approx(-1.8, rel=1e-12)


@given(st.floats(min_value=-3, max_value=3, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_convert_round_trip_is_identity(x):
    p = benchmark_problem(0.07)
    q = convert_drift(convert_drift(p, STRAT, ITO), ITO, STRAT)
    t = 0.0
    assert q.f(x, t) == pytest.approx(p.f(x, t), rel=1e-12, abs=1e-12)
    assert q.fp(x, t) == pytest.approx(p.fp(x, t), rel=1e-12, abs=1e-12)
    assert q.fpp(x, t) == pytest.approx(p.fpp(x, t), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("x", [0.4, -1.1, 2.2])
def test_converted_derivatives_match_finite_differences(x):
    q = convert_drift(benchmark_problem(0.05), STRAT, ITO)
    assert q.fp(x, 0.0) == pytest.approx(fd(q.f, x), rel=1e-6, abs=1e-6)
    assert q.fpp(x, 0.0) == pytest.approx(fd(q.fp, x), rel=1e-6, abs=1e-6)


# ------------------------------------------------------------- validation

def test_validation_exact_solution():
    problem, exact = validation_problem(0.2)
    assert exact(1.0, 1.0, 0.0) == pytest.approx(math.e, rel=1e-12)
    assert exact(1.0, 1.0, 0.5) == pytest.approx(math.exp(1.1), rel=1e-12)
    assert exact(1.0, 1.0, 0.5) == pytest.approx(3.00417, rel=1e-5)
    assert problem.g(2.0, 0.0) == pytest.approx(0.4, rel=1e-15)


def test_validation_zero_noise_is_exponential():
    problem, exact = validation_problem(0.0)
    assert problem.g(5.0, 0.0) == 0.0
    assert exact(2.0, 0.5, 123.0) == pytest.approx(2 * math.exp(0.5),
                                                   rel=1e-12)


def test_validation_rejects_negative_D():
    with pytest.raises(ValueError):
        validation_problem(-0.01)
