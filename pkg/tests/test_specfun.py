import math

import numpy as np
import pytest
from scipy import integrate, special

from pointdiff import specfun as sf
from pointdiff.quadspec import DomainError, QuadratureSpec, SpecialValue

QUAD = QuadratureSpec()


# ---------------------------------------------------------------------------
# heat kernel
# ---------------------------------------------------------------------------

def test_heat_kernel_at_origin():
    assert sf.heat_kernel(1.0, (0.0, 0.0)) == pytest.approx(1 / (2 * math.pi))
    assert sf.heat_kernel(2.0, (0.0, 0.0)) == pytest.approx(1 / (4 * math.pi))


def test_heat_kernel_against_high_precision_oracle():
    import mpmath as mp
    mp.mp.dps = 50
    ref = mp.e ** (-mp.mpf(1) / mp.mpf(1)) / (2 * mp.pi * mp.mpf("0.5"))
    got = sf.heat_kernel(0.5, (1.0, 0.0))
    # within two ulps of the 50-digit value
    assert abs(got - float(ref)) <= 3e-16 * float(ref)


def test_heat_kernel_domain():
    with pytest.raises(DomainError):
        sf.heat_kernel(0.0, (1.0, 0.0))
    with pytest.raises(DomainError):
        sf.heat_kernel(-1.0, (1.0, 0.0))


# ---------------------------------------------------------------------------
# Volterra function
# ---------------------------------------------------------------------------

def _nu_simpson_oracle(a: float) -> float:
    # brute-force composite Simpson on s in [0, 200]; the integrand tail
    # beyond 200 is below 1e-300 for a <= 8
    s = np.linspace(0.0, 200.0, 400001)
    with np.errstate(divide="ignore"):
        log_i = s * math.log(a) - special.gammaln(s + 1.0) if a != 1.0 \
            else -special.gammaln(s + 1.0)
    return float(integrate.simpson(np.exp(log_i), x=s))


def test_nu_zero():
    assert sf.volterra_nu(0.0).value == 0.0


@pytest.mark.parametrize("a", [0.25, 1.0, 5.0])
def test_nu_against_simpson_oracle(a):
    got = sf.volterra_nu(a, QUAD)
    ref = _nu_simpson_oracle(a)
    assert abs(got.value - ref) <= 1e-10 * ref
    assert got.err_estimate <= max(QUAD.abs_tol, QUAD.rel_tol * got.value)


def test_nu_monotone():
    vals = [sf.volterra_nu(a).value for a in np.linspace(0.05, 5.0, 12)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 5.0])
def test_nu_prime_matches_finite_difference(a):
    h = 1e-5
    fd = (sf.volterra_nu(a + h).value - sf.volterra_nu(a - h).value) / (2 * h)
    got = sf.volterra_nu_prime(a).value
    assert abs(got - fd) / got < 1e-6


def test_nu_prime_blowup_near_zero():
    small = sf.volterra_nu_prime(1e-4).value
    assert small > sf.volterra_nu_prime(1.0).value
    # nu'(a) ~ 1/(a log^2(1/a)): the ratio stays O(1)
    L = math.log(1e4)
    assert 0.7 < small * 1e-4 * L * L < 1.3


def test_nu_prime_domain():
    with pytest.raises(DomainError):
        sf.volterra_nu_prime(0.0)
    with pytest.raises(DomainError):
        sf.volterra_nu(-0.5)


def test_volterra_table_matches_direct():
    tab = sf.VolterraTable(3.0)
    rng = np.random.default_rng(3)
    for b in np.concatenate([10 ** rng.uniform(-11, -0.7, 12),
                             rng.uniform(0.3, 2.9, 12)]):
        assert tab.nu(b) == pytest.approx(sf.volterra_nu(b).value, rel=5e-8)
        assert tab.nu_prime(b) == pytest.approx(
            sf.volterra_nu_prime(b).value, rel=5e-7)


# ---------------------------------------------------------------------------
# exponential integral
# ---------------------------------------------------------------------------

def test_e1_against_quadrature_oracle():
    ref, err = integrate.quad(lambda b: math.exp(-b) / b, 1.0, np.inf,
                              epsabs=1e-14, epsrel=1e-12, limit=400)
    assert err < 1e-12
    assert sf.exp_integral_E1(1.0) == pytest.approx(ref, abs=1e-12)


def test_e1_decreasing_and_renorm_identity():
    xs = np.linspace(0.2, 6.0, 15)
    vals = [sf.exp_integral_E1(x) for x in xs]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # E(1) = e E1(1) by construction
    assert sf.renorm_E(1.0) == math.exp(1.0) * sf.exp_integral_E1(1.0)


def test_renorm_E_asymptotic_band():
    val = sf.renorm_E(100.0)
    assert 0.0 < val < 1.02 / 100.0
    # branch continuity at the large-x switch
    assert sf.renorm_E(499.9) == pytest.approx(sf.renorm_E(500.1),
                                               rel=2e-3)


def test_e1_domain():
    with pytest.raises(DomainError):
        sf.exp_integral_E1(0.0)
    with pytest.raises(DomainError):
        sf.renorm_E(-1.0)


# ---------------------------------------------------------------------------
# renewal identity (module invariant)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("x", [0.25, 1.0, 4.0])
def test_renewal_identity(x):
    assert sf.renewal_residual(x, QUAD) < 1e-6


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------

def _k0_log_substitution_oracle(z: float) -> float:
    # independent direct quadrature of the defining integral, a = e^u
    def f(u):
        if abs(u) > 680:
            return 0.0
        a = math.exp(u)
        return 0.5 * math.exp(-a - z * z / (4 * a))

    val, err = integrate.quad(f, -60, 60, epsabs=1e-14, epsrel=1e-12,
                              limit=500)
    assert err < 1e-11
    return val


def test_k0_against_oracle_and_scipy():
    for z in (0.3, 1.0, 2.5):
        got = sf.bessel_k(0, z, QUAD).value
        assert got == pytest.approx(_k0_log_substitution_oracle(z), rel=1e-10)
        assert got == pytest.approx(float(special.k0(z)), rel=1e-10)
    assert sf.bessel_k(1, 1.3, QUAD).value == pytest.approx(
        float(special.k1(1.3)), rel=1e-10)


def test_k0_asymptotic_bands():
    z = 1e-6
    assert 0.9 < sf.bessel_k(0, z).value / math.log(1 / z) < 1.1
    z = 20.0
    ref = math.sqrt(math.pi / (2 * z)) * math.exp(-z)
    assert 0.95 < sf.bessel_k(0, z).value / ref < 1.05


def test_incomplete_bessel_basics():
    assert sf.incomplete_bessel_k(0, 1.0, 0.0).value == pytest.approx(
        sf.bessel_k(0, 1.0).value, rel=1e-12)
    assert sf.incomplete_bessel_k(0, 1.0, 50.0).value < 1e-20
    vals = [sf.incomplete_bessel_k(0, 2.0, y).value
            for y in (0.0, 0.1, 0.5, 1.0, 2.0, 5.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_incomplete_bessel_tail_oracle():
    # (nu=0, z=2, y=1) against an independent tail quadrature
    ref, err = integrate.quad(lambda a: 0.5 / a * math.exp(-a - 1.0 / a),
                              1.0, np.inf, epsabs=1e-14, epsrel=1e-12,
                              limit=400)
    assert err < 1e-11
    assert sf.incomplete_bessel_k(0, 2.0, 1.0).value == pytest.approx(
        ref, rel=1e-10)


@pytest.mark.parametrize("z,y", [(0.5, 0.1), (0.5, 1.0), (1.0, 0.1),
                                 (1.0, 1.0), (3.0, 0.1), (3.0, 1.0)])
def test_incomplete_complement(z, y):
    tail = sf.incomplete_bessel_k(0, z, y, QUAD)
    head, err = integrate.quad(
        lambda a: 0.5 / a * math.exp(-a - z * z / (4 * a)), 0.0, y,
        epsabs=1e-13, epsrel=1e-11, limit=300)
    full = sf.bessel_k(0, z, QUAD)
    combined = tail.err_estimate + full.err_estimate + err
    assert abs(tail.value + head - full.value) <= combined + 1e-11


def test_bessel_domain_errors():
    with pytest.raises(DomainError):
        sf.bessel_k(0, 0.0)
    with pytest.raises(DomainError):
        sf.bessel_k(2, 1.0)
    with pytest.raises(DomainError):
        sf.incomplete_bessel_k(0, 1.0, -0.5)


def test_inc_radial_log_matches_quadrature():
    theta = 1.0
    for k in (0, 1, 2):
        for t, r in ((0.5, 1.0), (1e-3, 1.0), (1.0, 6.0)):
            ref, _ = integrate.quad(
                lambda u: u ** (-1 - k) * math.exp(-theta * u
                                                   - r * r / (2 * u)),
                t, np.inf, epsabs=1e-300, epsrel=1e-12, limit=400)
            got = math.exp(sf.inc_radial_log(k, theta, t, np.array(r)))
            assert got == pytest.approx(ref, rel=1e-10)


def test_inc_tail_fields_ratio():
    theta = 1.0
    t = np.array([0.3, 0.8])
    r = np.array([1.2, 0.4])
    log_i0, ratio = sf.inc_tail_fields(theta, t, r)
    for i in range(2):
        i0, _ = integrate.quad(
            lambda u: math.exp(-theta * u - r[i] ** 2 / (2 * u)) / u,
            t[i], np.inf, epsabs=1e-300, epsrel=1e-12, limit=400)
        i1, _ = integrate.quad(
            lambda u: math.exp(-theta * u - r[i] ** 2 / (2 * u)) / u ** 2,
            t[i], np.inf, epsabs=1e-300, epsrel=1e-12, limit=400)
        assert math.exp(log_i0[i]) == pytest.approx(i0, rel=1e-9)
        assert ratio[i] == pytest.approx(i1 / i0, rel=1e-9)


# ---------------------------------------------------------------------------
# QuadratureSpec / SpecialValue contracts
# ---------------------------------------------------------------------------

def test_quadspec_invariants():
    with pytest.raises(DomainError):
        QuadratureSpec(abs_tol=0.0, rel_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(max_subdivisions=0)
    with pytest.raises(DomainError):
        SpecialValue(1.0, -1.0)
    spec = QuadratureSpec(abs_tol=1e-6, rel_tol=1e-4)
    inner = spec.inner()
    assert inner.abs_tol < spec.abs_tol and inner.rel_tol < spec.rel_tol


def test_tolerance_error_carries_best_estimate():
    from pointdiff.quadspec import ToleranceError
    spec = QuadratureSpec(abs_tol=1e-9, rel_tol=1e-9)
    with pytest.raises(ToleranceError) as err:
        spec.check(1.0, 1e-3, "synthetic")
    assert err.value.best == 1.0
    assert err.value.err == 1e-3
