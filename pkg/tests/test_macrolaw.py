import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from plwishart.errors import DomainError, MomentDivergenceError
from plwishart.finite_n import EnsembleParams, jpdf_kpoint_bruteforce
from plwishart.macrolaw import (
    DensityCurve,
    ScalingParams,
    connected_two_point_demo,
    density_moments,
    gen_density,
    gen_density_c1,
    gen_density_c1_integral,
    gen_density_clt1,
    log_gen_density,
    make_grid,
    mp_density,
    pseudo_edge,
    small_x_prefactor,
    tail_constants,
    tail_prefactor,
    theta_map,
)


def b_const(a):
    return math.exp(math.lgamma(a + 1.5) - math.lgamma(a + 1)) / math.sqrt(a)


def test_scaling_params_domain():
    for bad in (0.0, -1.0, -2.0, math.inf, math.nan):
        with pytest.raises(DomainError):
            ScalingParams(bad)
    with pytest.raises(DomainError):
        ScalingParams(1.0, c=0.0)
    with pytest.raises(DomainError):
        ScalingParams(1.0, c=1.2)


def test_mp_values():
    assert mp_density(2.0, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert mp_density(4.0, 1.0) == 0.0
    c = 0.3
    for edge in (c * (c**-0.5 - 1) ** 2, c * (c**-0.5 + 1) ** 2):
        assert mp_density(edge, c) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("c", [0.25, 0.5, 1.0])
def test_mp_mass_and_mean(c):
    lo, hi = c * (c**-0.5 - 1) ** 2, c * (c**-0.5 + 1) ** 2
    m0 = integrate.quad(lambda x: mp_density(x, c), lo, hi, limit=200)[0]
    m1 = integrate.quad(lambda x: x * mp_density(x, c), lo, hi, limit=200)[0]
    assert m0 == pytest.approx(1, abs=1e-8)
    assert m1 == pytest.approx(1, abs=1e-8)


@pytest.mark.parametrize("alpha", [-0.5, 0.1, 0.5, 1.0, 3.0, 14.0])
def test_c1_closed_form_matches_integral(alpha):
    x = np.geomspace(0.01, 100, 41)
    a = gen_density_c1(x, alpha)
    b = gen_density_c1_integral(x, alpha)
    assert np.max(np.abs(a / b - 1)) < 1e-8


@pytest.mark.parametrize("alpha,c", [(0.1, 1.0), (1.0, 1.0), (3.0, 0.3), (14.0, 0.7), (0.5, 0.3)])
def test_mass_and_mean(alpha, c):
    m0, m1 = density_moments(ScalingParams(alpha, c), (0, 1))
    assert m0 == pytest.approx(1, abs=1e-7)
    assert m1 == pytest.approx(1, abs=1e-7)


def test_mass_by_independent_quadrature():
    p = ScalingParams(3.0, 0.3)
    f = lambda u: math.exp(u) * gen_density(math.exp(u), p)
    m0 = integrate.quad(f, math.log(1e-6), math.log(1e6), limit=400, epsrel=1e-11)[0]
    assert m0 == pytest.approx(1, abs=1e-8)


def test_first_moment_diverges_for_small_alpha():
    with pytest.raises(MomentDivergenceError):
        density_moments(ScalingParams(-0.5), (0, 1))
    (m0,) = density_moments(ScalingParams(-0.5), (0,))
    assert m0 == pytest.approx(1, abs=1e-7)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
def test_tail_c1(alpha):
    p = ScalingParams(alpha)
    x = np.geomspace(1e2, 1e4, 30)
    slope = np.polyfit(np.log(x), np.log(gen_density(x, p)), 1)[0]
    assert slope == pytest.approx(-(alpha + 2), rel=0.02)
    K = math.gamma(alpha + 1.5) * (4 * alpha) ** (alpha + 1) / (math.sqrt(math.pi) * math.gamma(alpha + 1) * math.gamma(alpha + 3))
    assert gen_density(1e4, p) * 1e4 ** (alpha + 2) / K == pytest.approx(1, rel=1e-2)


def test_tail_c_lt_1():
    p = ScalingParams(1.0, 0.5)
    C = tail_constants(p).C
    ref = 1e4 ** -(p.alpha + 2) * (p.c * p.alpha) ** (p.alpha + 1) * C / (2 * math.pi * math.gamma(p.alpha + 1))
    assert gen_density_clt1(1e4, p) / ref == pytest.approx(1, rel=2e-3)
    assert tail_prefactor(p) * 1e4 ** -(p.alpha + 2) == pytest.approx(ref, rel=1e-12)


def test_tail_constant_alpha_to_zero():
    # the 2F1 terminates at order zero, leaving (pi/8)(X+ - X-)^2
    p = ScalingParams(1e-12, 0.4)
    assert tail_constants(p).C == pytest.approx(math.pi / 8 * (p.x_plus - p.x_minus) ** 2, rel=1e-9)


def test_small_x_c1():
    for alpha in (0.5, 1.0, 3.0):
        p = ScalingParams(alpha)
        x = 1e-6
        assert gen_density(x, p) * math.sqrt(x) / small_x_prefactor(p) == pytest.approx(1, rel=1e-2)


def test_small_x_constant_c_lt_1():
    # numerically validated constant: 1/(4 sqrt(pi)) rather than 1/16
    for alpha, c in [(2.0, 0.5), (1.0, 0.3), (3.0, 0.3)]:
        p = ScalingParams(alpha, c)
        D = tail_constants(p).D
        x = np.array([1e-3, 1e-4, 1e-5])
        model = (-alpha - 0.5) * np.log(x) - c * alpha * p.x_minus / x + math.log(D)
        ratio = np.exp(log_gen_density(x, p) - model)
        assert np.all(np.diff(np.abs(ratio - 1)) < 0)
        assert ratio[-1] == pytest.approx(1, rel=1e-3)
        # the 1/16 constant would be off by 4 sqrt(pi)/16 ~ 0.44
        assert abs(ratio[-1] * 16 / (4 * math.sqrt(math.pi)) - 1) > 0.5


def test_c_to_one_limit():
    x = np.linspace(0.5, 3, 11)
    a = gen_density(x, ScalingParams(1.0, 0.999999))
    b = gen_density(x, ScalingParams(1.0, 1.0))
    assert np.max(np.abs(a - b)) < 1e-5


@pytest.mark.xfail(strict=True, reason="c = 0.999 differs from c = 1 by O(1 - c) ~ 1e-3, above 1e-6")
def test_c_0999_matches_c1_to_1e6():
    x = np.linspace(0.5, 3, 11)
    a = gen_density(x, ScalingParams(1.0, 0.999))
    b = gen_density(x, ScalingParams(1.0, 1.0))
    assert np.max(np.abs(a - b)) < 1e-6


@pytest.mark.parametrize("c", [0.5, 1.0])
def test_large_alpha_is_mp(c):
    lo, hi = c * (c**-0.5 - 1) ** 2 + 0.1, c * (c**-0.5 + 1) ** 2 - 0.1
    x = np.linspace(lo, hi, 200)
    assert np.max(np.abs(gen_density(x, ScalingParams(1e4, c)) - mp_density(x, c))) < 1e-2


def test_pseudo_edge():
    assert pseudo_edge(ScalingParams(3.0, 0.3)) == pytest.approx(0.055, abs=0.005)
    p = ScalingParams(1.0, 0.5)
    X = pseudo_edge(p)
    assert abs(1.5 * math.log(X) + 0.5 * p.x_minus / X - 1) < 1e-10
    with pytest.raises(DomainError):
        pseudo_edge(ScalingParams(1.0, 1.0))


def test_theta_map():
    semi = theta_map(lambda x: mp_density(x, 1.0))
    y = np.linspace(-1.9, 1.9, 10)
    assert np.allclose(semi(y), np.sqrt(4 - y**2) / (2 * math.pi), rtol=1e-13)
    assert semi(1e-9) == pytest.approx(1 / math.pi, rel=1e-6)
    for alpha in (0.5, 3.0):
        th = theta_map(lambda x: gen_density(x, ScalingParams(alpha)))
        assert th(1e-9) == pytest.approx(b_const(alpha) / math.pi, rel=1e-4)
    th = theta_map(lambda x: gen_density(x, ScalingParams(2.0)))
    mass = 2 * integrate.quad(th, 0, np.inf, limit=400)[0]
    assert mass == pytest.approx(1, abs=1e-7)


def test_curve_roundtrip(tmp_path):
    p = ScalingParams(3.0, 0.3)
    x = make_grid(0.001, 8, 64)
    c = DensityCurve("rho_alpha", p.as_dict(), x, gen_density(x, p), {"note": "t"})
    back = DensityCurve.from_json(c.to_json())
    assert np.array_equal(back.grid, c.grid) and np.array_equal(back.values, c.values)
    back = DensityCurve.from_csv(c.to_csv())
    assert np.array_equal(back.values, c.values)
    assert c.to_csv().splitlines()[1] == "x,value"
    assert json.loads(c.to_json())["params"]["alpha"] == 3.0


def test_curve_invariants():
    with pytest.raises(DomainError):
        DensityCurve("x", {}, [0, 2, 1], [1, 1, 1])
    with pytest.raises(DomainError):
        DensityCurve("x", {}, [0, 1, 2], [1, -1, 1])


def test_curve_mass_full_support():
    x = make_grid(1e-8, 1e6, 20000)
    c = DensityCurve("rho", {}, x, gen_density(x, ScalingParams(1.0)))
    assert 0.99 <= c.mass() <= 1.01


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.2, 30), c=st.floats(0.1, 1.0), x=st.floats(1e-2, 1e3))
def test_density_positive_and_log_consistent(alpha, c, x):
    p = ScalingParams(alpha, c)
    lg = log_gen_density(x, p)
    assert math.isfinite(lg)
    d = gen_density(x, p)
    assert d >= 0
    if d > 1e-250:
        assert math.log(d) == pytest.approx(lg, rel=1e-10, abs=1e-10)


def test_non_universality_witness():
    p = EnsembleParams.from_alpha(2, 2, 0, 1.0)
    a, b = connected_two_point_demo(p, 0.4, 1.3)
    assert abs(a - b) / max(abs(a), abs(b)) > 1e-6
    q = EnsembleParams.from_alpha(2, 2, 0, 1e5)
    a, b = connected_two_point_demo(q, 0.4, 1.3)
    assert abs(a - b) / max(abs(a), abs(b)) < 1e-3


def test_connected_n1_against_jpdf():
    p = EnsembleParams.from_alpha(2, 1, 0, 2.0)
    a, _ = connected_two_point_demo(p, 0.4, 1.3)
    # N = 1 has no pair term; the connected part is -R(lam) R(mu)
    r = jpdf_kpoint_bruteforce([0.4], p) * jpdf_kpoint_bruteforce([1.3], p)
    assert a == pytest.approx(-r, rel=1e-8)
