import math

import numpy as np
import pytest
from scipy import integrate, special

from pointdiff.families import FamilySpec, get_evaluator, parse_family
from pointdiff.hmap import (HEval, eigen_sweep, first_moment_residual, h_map,
                            h_map_inverse, h_map_radial, harmonicity_residual,
                            jacobian_eigs, moment_scaling_probe)
from pointdiff.quadspec import DomainError, HypothesisViolationError

TH, T = 1.0, 1.0
E_GST = HEval(FamilySpec("gst", TH, T))
E_LEB = HEval(FamilySpec("leb", TH, T))
E_GAU = HEval(parse_family("gau:alpha=1.0", TH, T))
E_DIR = HEval(parse_family("dir:eps=0.05", TH, T))


def test_h_map_origin_is_zero():
    assert np.all(h_map(E_GST, 0.5, (0.0, 0.0)) == 0.0)
    assert np.all(h_map(E_LEB, 1.0, (0.0, 0.0)) == 0.0)


def test_h_map_t0_is_identity():
    x = np.array([0.7, -0.2])
    assert np.allclose(h_map(E_LEB, 0.0, x), x)
    assert np.allclose(h_map(E_GST, 0.0, x), x)


def test_leb_h_map_closed_form():
    # (hhat_0 * g_t)(x) = x by the Gaussian first moment, h = 1 + V
    V = get_evaluator(E_LEB.family).V(1.0, 1.0)
    got = h_map(E_LEB, 1.0, (1.0, 0.0))
    assert got[0] == pytest.approx(1.0 / (1.0 + V), rel=1e-12)
    assert got[1] == 0.0


def _gst_oracle(t, r):
    # direct 2-D quadrature of (hhat_0 * g_t) . xhat / h_t at x = (r, 0)
    def inner(rho):
        dd = (r - rho) ** 2 / (2 * t)
        return rho * rho * special.k0(math.sqrt(2 * TH) * rho) \
            * math.exp(-dd) * special.i1e(r * rho / t) / t

    hi = r + 10 * math.sqrt(t) + 6
    val, _ = integrate.quad(inner, 0, hi, epsabs=1e-13, epsrel=1e-11,
                            limit=400, points=[r])
    return val / (math.exp(TH * t) * special.k0(math.sqrt(2 * TH) * r))


@pytest.mark.parametrize("t,r", [(0.5, 1.0), (0.25, 0.5), (1.0, 2.0)])
def test_gst_h_map_vs_convolution_oracle(t, r):
    got = h_map_radial(E_GST, t, r) * r
    assert got == pytest.approx(_gst_oracle(t, r), rel=1e-4)
    assert got == pytest.approx(_gst_oracle(t, r), rel=1e-9)


def test_gau_h_map_vs_convolution_oracle():
    t, r, alpha = 0.5, 1.0, 1.0
    fam = get_evaluator(E_GAU.family)

    def inner(rho):
        dd = (r - rho) ** 2 / (2 * t)
        return rho * rho * math.exp(-rho * rho / (2 * alpha)) \
            / (2 * math.pi * alpha) * math.exp(-dd) \
            * special.i1e(r * rho / t) / t

    hi = r + 10 * math.sqrt(t) + 6
    val, _ = integrate.quad(inner, 0, hi, epsabs=1e-14, epsrel=1e-11,
                            limit=400, points=[r])
    ref = val / fam.h(t, r)
    assert h_map_radial(E_GAU, t, r) * r == pytest.approx(ref, rel=1e-8)


def test_dir_h_map_degenerate():
    assert np.all(h_map(E_DIR, 0.5, (1.0, 0.0)) == 0.0)
    with pytest.raises(HypothesisViolationError):
        h_map_inverse(E_DIR, 0.5, (0.5, 0.0))


def test_radial_structure():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.normal(size=2)
        H = h_map(E_GST, 0.5, x)
        assert abs(H[0] * x[1] - H[1] * x[0]) < 1e-14


# ---------------------------------------------------------------------------
# Jacobian eigenvalues
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("e,t,r", [(E_GST, 0.5, 1.0), (E_LEB, 1.0, 1.0),
                                   (E_GAU, 0.7, 1.3)],
                         ids=["gst", "leb", "gau"])
def test_jacobian_vs_finite_difference(e, t, r):
    dr = 1e-5 * r
    vals = [h_map_radial(e, t, r + k * dr) * (r + k * dr)
            for k in (-2, -1, 1, 2)]
    lam_fd = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * dr)
    eig = jacobian_eigs(e, t, (r, 0.0))
    assert eig.lambda_radial == pytest.approx(lam_fd, rel=1e-5)
    assert eig.lambda_tangential == h_map_radial(e, t, r)


def test_jacobian_short_time_identity():
    eig = jacobian_eigs(E_LEB, 0.0, (1.0, 0.0))
    assert eig.lambda_radial == 1.0 and eig.lambda_tangential == 1.0
    eig = jacobian_eigs(E_LEB, 1e-6, (1.0, 0.0))
    assert eig.lambda_radial == pytest.approx(1.0, abs=1e-4)


def test_eigen_sweep_report():
    sweep = eigen_sweep(E_GST, t_grid=[0.25, 0.75],
                        r_grid=np.geomspace(1e-3, 10, 9))
    assert sweep["finite"]
    assert sweep["max_abs_lambda_radial"] < 50.0


# ---------------------------------------------------------------------------
# inverse
# ---------------------------------------------------------------------------

def test_inverse_round_trip():
    for e in (E_GST, E_LEB, E_GAU):
        x = np.array([2.0, 0.5])
        y = h_map(e, 0.5, x)
        x2 = h_map_inverse(e, 0.5, y)
        assert np.max(np.abs(x2 - x)) < 1e-8


def test_inverse_near_identity_short_time():
    got = h_map_inverse(E_LEB, 1e-5, (1.0, 0.0))
    assert got[0] == pytest.approx(1.0, abs=1e-3)


def test_inverse_scalar_root_oracle():
    # solve r/(1 + V_t(r)) = 0.3 independently by bisection on the exact map
    fam = get_evaluator(E_LEB.family)
    fwd = lambda r: r / (1.0 + fam.V(1.0, r))
    lo, hi = 1e-6, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fwd(mid) < 0.3:
            lo = mid
        else:
            hi = mid
    got = h_map_inverse(E_LEB, 1.0, (0.3, 0.0))
    assert got[0] == pytest.approx(0.5 * (lo + hi), rel=1e-9)


def test_inverse_monotonicity_guard():
    grid = np.geomspace(0.05, 8.0, 40)
    vals = [h_map_radial(E_GST, 0.5, r) * r for r in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# harmonicity and first moment
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_harmonicity_residuals():
    hr, Hr = harmonicity_residual(E_LEB, 0.0, 0.5, (1.0, 0.0))
    assert hr < 5e-4
    assert Hr < 1e-3
    hr, Hr = harmonicity_residual(E_GST, 0.0, 0.5, (1.0, 0.0))
    assert Hr < 1e-3


def test_first_moment_identity_leb():
    assert first_moment_residual(E_LEB, 1.0, (1.0, 0.0)) < 1e-3
    with pytest.raises(DomainError):
        first_moment_residual(E_GST, 1.0, (1.0, 0.0))


# ---------------------------------------------------------------------------
# moment probe (small-n smoke; acceptance runs the full sweep)
# ---------------------------------------------------------------------------

def test_moment_probe_gaussian_limit():
    # for near-zero coupling the Leb transition is near-Brownian and H is
    # near the identity, so the m=1 normalized moment is near the trace of
    # the identity diffusion matrix (= 2)
    e = HEval(FamilySpec("leb", 1e-8, 1.0))
    est = moment_scaling_probe(e, 1, 0.0, 0.25, (1.0, 0.0), 4000, seed=5)
    assert est.n == 4000
    assert abs(est.mean - 2.0) < 6 * est.std_error + 0.15


def test_moment_probe_rejects_bad_order():
    with pytest.raises(DomainError):
        moment_scaling_probe(E_LEB, 3, 0.0, 0.25, (1.0, 0.0), 100)


@pytest.mark.slow
def test_moment_probe_factorial_envelope():
    # the m = 2 normalized moment sits below (2!)^2 = 4 times the square
    # of the m = 1 value, the factorial growth of the moment bound
    m1 = moment_scaling_probe(E_LEB, 1, 0.0, 0.25, (1.0, 0.0), 6000, seed=8)
    m2 = moment_scaling_probe(E_LEB, 2, 0.0, 0.25, (1.0, 0.0), 6000, seed=8)
    assert m2.mean <= 4.0 * m1.mean ** 2 + 3 * m2.std_error
