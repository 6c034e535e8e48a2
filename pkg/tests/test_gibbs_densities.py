import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import exp1, kve

from coulomb_lab.gibbs.bessel import (bessel_K, bessel_K_asymptotic, bessel_identity_rhs, laplace_integral,
                                      partition_prefactor_ratio)
from coulomb_lab.gibbs.densities import coulomb, make_gibbs_density, pure_power
from coulomb_lab.gibbs.tilt import solve_tilt_lambda, tilt_mean, tilt_moments


def tabulated():
    return make_gibbs_density("tabulated", 1.5, 0.5, 1 + 0.3 * np.sin(np.linspace(0, 3, 20)))


FAMILIES = [pure_power(0.5), pure_power(1.0), pure_power(2.0), coulomb(0.5), coulomb(1.0), coulomb(2.0), tabulated()]


@pytest.mark.parametrize("g", FAMILIES, ids=lambda g: f"{g.kind}-{g.alpha}-{g.beta}")
def test_normalized(g):
    if g.beta == 0 and g.alpha < 1:
        total = quad(lambda x: math.exp(float(g.log_smooth(x))), 0, 1, weight="alg",
                     wvar=(g.alpha - 1, 0), epsabs=0, epsrel=1e-13)[0]
    else:
        total = quad(lambda x: float(g.pdf(x)), 0, 1, points=[0.01, 0.1], epsabs=0, epsrel=1e-13, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("g", FAMILIES, ids=lambda g: f"{g.kind}-{g.alpha}-{g.beta}")
def test_small_x_prefactor(g):
    for x in (1e-2, 1e-3, 1e-4):
        ref = g.c0 * x ** (g.alpha - 1) * math.exp(-g.beta / x)
        if ref == 0.0:
            assert g.pdf(x) == 0.0
            continue
        assert float(g.pdf(x)) / ref == pytest.approx(1.0, rel=0.05)


def test_family_examples():
    assert float(pure_power(1).pdf(0.3)) == pytest.approx(1.0)
    assert float(pure_power(2).pdf(0.3)) == pytest.approx(0.6)
    z1 = math.exp(-1) - exp1(1.0)
    assert coulomb(1).c0 == pytest.approx(1 / z1, rel=1e-12)


def test_invalid_families():
    with pytest.raises(ValueError):
        pure_power(0.0)
    with pytest.raises(ValueError):
        coulomb(0.0)
    with pytest.raises(ValueError):
        make_gibbs_density("tabulated", -1.0, 0.0, [1.0, 1.0])
    with pytest.raises(ValueError):
        make_gibbs_density("other")


def test_uniform_moments():
    t = tilt_moments(pure_power(1), 0.0)
    assert t.m == pytest.approx(0.5, abs=1e-12)
    assert t.sigma2 == pytest.approx(1 / 12, abs=1e-12)
    assert t.a4 == pytest.approx(1.8, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_power_tilt_mean_asymptotics(alpha):
    lam = 1e4
    assert tilt_moments(pure_power(alpha), lam).m * lam / alpha == pytest.approx(1.0, rel=0.01)


def test_coulomb_tilt_asymptotics():
    lam, beta = 1e6, 1.0
    t = tilt_moments(coulomb(beta), lam)
    assert t.m * math.sqrt(lam / beta) == pytest.approx(1.0, rel=0.01)
    assert t.sigma2 * 2 * beta ** 0.5 * lam ** 1.5 == pytest.approx(1.0, rel=0.02)


def test_tilt_against_bessel_closed_form():
    # pure Coulomb on (0, infinity) is a Bessel integral; at large lam the cut at 1 is invisible
    g, lam = coulomb(1.0), 400.0
    t = tilt_moments(g, lam)
    logz = math.log(g.c0) + laplace_integral(lam, 1.0, 1.0, log=True)
    assert t.log_z == pytest.approx(logz, abs=1e-10)
    m = laplace_integral(lam, 1.0, 2.0) / laplace_integral(lam, 1.0, 1.0)
    assert t.m == pytest.approx(m, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(l1=st.floats(0.0, 1e5), ratio=st.floats(1.01, 10.0), which=st.integers(0, len(FAMILIES) - 1))
def test_tilt_monotone(l1, ratio, which):
    g = FAMILIES[which]
    a, b = tilt_moments(g, l1), tilt_moments(g, l1 * ratio + 1e-3)
    assert b.m < a.m
    assert b.log_z < a.log_z
    # bounded in lam; the pure-power limit is the Gamma kurtosis 3 + 6/alpha
    assert a.a4 < 20


def test_solve_tilt_lambda():
    assert solve_tilt_lambda(pure_power(1), 2).lam == 0.0
    for N in (100, 1000):
        sol = solve_tilt_lambda(pure_power(1), N)
        assert abs(sol.m - 1 / N) <= 1e-12
        assert sol.lam / N == pytest.approx(1.0, rel=0.02)
        sol = solve_tilt_lambda(coulomb(2.0), N)
        assert sol.lam / (2 * N * N) == pytest.approx(1.0, rel=0.02)
    with pytest.raises(ValueError):
        solve_tilt_lambda(pure_power(0.5), 2)


def test_bessel_against_scipy():
    for a in (0.0, 0.5, 1.0, 2.0, 3.7):
        for z in (0.05, 1.0, 10.0, 300.0):
            assert bessel_K(a, z, scaled=True) == pytest.approx(kve(a, z), rel=1e-12)


def test_bessel_half_closed_form():
    assert bessel_K(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) / math.e, rel=1e-12)
    assert bessel_K(0.5, 1.0) == pytest.approx(0.46106850, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_bessel_asymptotic(alpha):
    ratio = bessel_K_asymptotic(alpha, 100.0, scaled=True) / bessel_K(alpha, 100.0, scaled=True)
    assert ratio == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("lam,beta", [(10, 1), (100, 1), (1000, 2)])
@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_bessel_identity(lam, beta, alpha):
    lhs = laplace_integral(lam, beta, alpha)
    rhs = bessel_identity_rhs(lam, beta, alpha)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_prefactor_ratio_tends_to_sqrt2():
    r = [partition_prefactor_ratio(lam, 1.0, 1.0) for lam in (1e2, 1e4, 1e6)]
    assert abs(r[2] - math.sqrt(2)) < abs(r[0] - math.sqrt(2))
    assert r[2] == pytest.approx(math.sqrt(2), rel=1e-3)
