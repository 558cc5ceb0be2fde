"""Point-interaction semigroup kernel

    K_t(x, y) = g_t(x - y) + v_t(x, y)

with interaction part

    v_t(x, y) = 2 pi theta  int_{0<r<s<t} g_r(x) nu'(theta (s-r)) g_{t-s}(y) ds dr.

Only the Gaussian term couples the angles of x and y; v depends on
(|x|, |y|) alone and is symmetric in them, so all planar integrals against
K reduce to one-dimensional radial quadratures.

The (s, r) integral is evaluated through the time-convolution split

    v_t(x, y) = 2 pi int_0^t gbar_r(|x|) Phi_{|y|}(t - r) dr,
    Phi_b(w)  = theta int_0^w nu'(theta u) gbar_{w-u}(b) du,

where Phi is computed from two stable halves: the half with the nu'
endpoint singularity is integrated by parts using nu (whose mass near 0
decays only like 1/log and would otherwise stall adaptive quadrature), and
the half where the Gaussian factor spikes is integrated on a log time grid
where it is positive and smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .quadspec import (DEFAULT_QUAD, DivergenceError, DomainError,
                       QuadratureSpec)
from .radial import LogGridSpline, gauss_angular, quad_checked, quad_scaled
from .specfun import VolterraTable, heat_kernel, heat_radial

__all__ = ["KernelParams", "InteractionEvaluator", "interaction_v",
           "full_kernel", "semigroup_residual", "gst_eigen_residual",
           "gauss_k0_convolution", "k0_convolution_residuals"]


@dataclass(frozen=True)
class KernelParams:
    """Coupling constant and quadrature budget for kernel evaluations."""

    theta: float
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.theta <= 0:
            raise DomainError(f"theta must be positive, got {self.theta}")


def _dgauss_dsigma(sigma, b):
    # d/dsigma of the radial heat kernel gbar_sigma(b)
    return heat_radial(sigma, b) * (b * b - 2.0 * sigma) / (2.0 * sigma * sigma)


def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


_GL128 = _gl(128)
_GL160 = _gl(160)


class InteractionEvaluator:
    """Memoizing evaluator for the interaction term at fixed theta.

    Builds one Volterra table per instance and one Phi profile per radius
    requested through :meth:`phi_profile`.  All caches are write-once per
    key with deterministic values, so concurrent use is safe (last writer
    wins on identical data).
    """

    def __init__(self, theta: float, t_max: float,
                 quad: QuadratureSpec = DEFAULT_QUAD):
        if theta <= 0 or t_max <= 0:
            raise DomainError("theta and t_max must be positive")
        self.theta = theta
        self.t_max = t_max
        self.quad = quad
        self.volterra = VolterraTable(max(theta * t_max * 1.05, 1e-6))
        self._phi_cache: dict = {}

    # -- Phi_b(w) -----------------------------------------------------------

    def phi(self, b: float, w: float) -> float:
        """Phi_b(w) = theta int_0^w nu'(theta u) gbar_(w-u)(b) du, b > 0.

        Fixed-node Gauss-Legendre on two smooth windows, vectorized through
        the Volterra table: the half carrying the integrable nu'
        singularity is first integrated by parts against nu (its raw mass
        near u = 0 decays only like 1/log and defeats direct quadrature),
        the half where the Gaussian factor spikes is taken on a log time
        grid where it is positive and slowly varying.
        """
        th = self.theta
        if w <= 0:
            return 0.0
        if b * b / (2.0 * w) > 700.0:
            return 0.0
        half = 0.5 * w

        # spike half: sigma = w - u in (0, w/2]
        tau_hi = math.log(half)
        tau_lo = max(math.log(b * b / 1500.0), tau_hi - 45.0)
        x, gw = _GL128
        tau = tau_lo + (tau_hi - tau_lo) * x
        sigma = np.exp(tau)
        spike = (tau_hi - tau_lo) * float(np.dot(
            gw, th * self.volterra.nu_prime(th * (w - sigma))
            * heat_radial(sigma, b) * sigma))

        # IBP half: theta int_0^(w/2) nu'(theta u) G(u) du
        #   = nu(theta w/2) G(w/2) - int nu(theta u) G'(u) du,
        # G(u) = gbar_(w-u)(b); on the log grid u = (w/2) e^(-q)
        q_hi = 45.0
        q = q_hi * x
        u = half * np.exp(-q)
        ibp = q_hi * float(np.dot(
            gw, self.volterra.nu(th * u) * _dgauss_dsigma(w - u, b) * u))
        boundary = float(self.volterra.nu(th * half)) \
            * float(heat_radial(half, b))
        return spike + boundary + ibp

    def phi_profile(self, b: float, w_max: float):
        """Spline of w -> Phi_b(w) on (0, w_max]; cached per (b, w_max)."""
        key = (round(b, 15), round(w_max, 15))
        prof = self._phi_cache.get(key)
        if prof is None:
            w_lo = max(b * b / 1500.0, w_max * 1e-10)
            if w_lo >= w_max:
                # the whole profile sits below e^-700: identically zero
                prof = lambda w: np.zeros_like(np.asarray(w, dtype=float))
                self._phi_cache[key] = prof
                return prof
            stiff = b * b / 2.0

            def log_phi_flat(w):
                v = self.phi(b, w)
                if v <= 0.0:
                    return -800.0 + stiff / w
                return math.log(v) + stiff / w

            spl = LogGridSpline(log_phi_flat, w_lo, w_max, rel_tol=1e-8,
                                abs_floor=1.0, n0=81)

            def prof(w):
                w = np.asarray(w, dtype=float)
                out = np.zeros_like(w)
                ok = w > w_lo * (1.0 + 1e-12)
                if np.any(ok):
                    out[ok] = np.exp(spl(w[ok]) - stiff / w[ok])
                return out if out.shape else float(out)

            self._phi_cache[key] = prof
        return self._phi_cache[key]

    # -- v_t ------------------------------------------------------------------

    def vbar(self, t: float, a: float, b: float, profile=None) -> float:
        """Radial interaction term vbar_t(a, b) = v_t(x, y) for |x|=a, |y|=b.

        Arguments are canonicalized (the smaller radius feeds the Phi slot)
        so the symmetry v_t(x,y) = v_t(y,x) holds exactly.
        """
        if t <= 0:
            raise DomainError("vbar requires t > 0")
        if a <= 0 or b <= 0:
            raise DivergenceError(
                "interaction term diverges when an argument sits at the "
                "origin; pass origin_cutoff to interaction_v for the "
                "regularized variant")
        if profile is None:
            a, b = max(a, b), min(a, b)
            profile = self.phi_profile(b, t)
        quad = self.quad

        def f(tau):
            r = math.exp(tau)
            return math.exp(-a * a / (2.0 * r)) * float(profile(t - r))

        tau_hi = math.log(t)
        tau_lo = max(math.log(a * a / 1500.0), tau_hi - 700.0)
        val, _ = quad_scaled(f, tau_lo, tau_hi, quad, limit=120)
        return val

    def vbar_profile(self, t: float, b: float, rho_lo: float, rho_hi: float,
                     rel_tol: float = 1e-7):
        """Spline of rho -> vbar_t(rho, b) with rho in the Gaussian slot."""
        profile = self.phi_profile(b, t)
        floor = float(heat_radial(t, rho_hi)) * 1e-6

        def f(rho):
            return self.vbar(t, rho, b, profile=profile)

        return LogGridSpline(f, rho_lo, rho_hi, rel_tol=rel_tol,
                             abs_floor=floor, n0=97)


def _evaluator(p: KernelParams, t: float) -> InteractionEvaluator:
    return InteractionEvaluator(p.theta, t, p.quad)


def interaction_v(p: KernelParams, t: float, x, y,
                  origin_cutoff: float | None = None,
                  _ev: InteractionEvaluator | None = None) -> float:
    """Interaction term v_t(x, y).

    Diverges (logarithmically in the inner time integral) whenever x or y
    sits exactly at the origin; that case raises :class:`DivergenceError`
    unless ``origin_cutoff`` is given, in which case the Dirac-style
    regularization with lower cutoff epsilon is used for the offending slot.
    Both arguments at the origin are always rejected.
    """
    if t <= 0:
        raise DomainError("interaction_v requires t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = float(np.hypot(*x)), float(np.hypot(*y))
    ev = _ev or _evaluator(p, t)
    if a == 0.0 and b == 0.0:
        raise DivergenceError("interaction term at double origin is always "
                              "divergent")
    if a == 0.0 or b == 0.0:
        if origin_cutoff is None:
            raise DivergenceError(
                "interaction term diverges at a single-origin argument; "
                "supply origin_cutoff for the regularized value")
        r_pos = max(a, b)
        return _vbar_origin_regularized(ev, t, r_pos, origin_cutoff)
    return ev.vbar(t, a, b)


def _vbar_origin_regularized(ev: InteractionEvaluator, t: float, a: float,
                             eps: float) -> float:
    """Regularized v_t(x, 0): int_0^t gbar_r(a) nu_dir_eps(t - r) dr with
    nu_dir_eps(w) = int_eps^w theta nu'(theta (w - s)) / s ds for w > eps."""
    if eps <= 0:
        raise DomainError("origin_cutoff must be positive")
    th = ev.theta
    nu = ev.volterra.nu

    def nu_dir(w):
        if w <= eps:
            return 0.0
        # integration by parts as in families.dirac_time_kernel
        upper = w - eps

        def f(u):
            s = w - u
            return float(nu(th * u)) / (s * s)

        val, _ = integrate.quad(f, 0.0, upper,
                                epsabs=ev.quad.abs_tol, epsrel=ev.quad.rel_tol,
                                limit=ev.quad.max_subdivisions)
        return float(nu(th * upper)) / eps - val

    def f_outer(r):
        return float(heat_radial(r, a)) * nu_dir(t - r)

    val, _ = integrate.quad(f_outer, 0.0, max(t - eps, 0.0),
                            epsabs=ev.quad.abs_tol, epsrel=ev.quad.rel_tol,
                            limit=ev.quad.max_subdivisions)
    return val


def full_kernel(p: KernelParams, t: float, x, y,
                _ev: InteractionEvaluator | None = None) -> float:
    """K_t(x, y) = g_t(x - y) + v_t(x, y); symmetric and > g_t(x - y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return heat_kernel(t, x - y) + interaction_v(p, t, x, y, _ev=_ev)


# ---------------------------------------------------------------------------
# Residual checks: semigroup property and ground-state eigenrelation
# ---------------------------------------------------------------------------

def _gauss_pair_radial(s: float, delta: float, x, y, rho):
    """Angular reduction of int g_s(x-z) g_delta(z-y) dphi_z at |z| = rho."""
    a2 = x[0] ** 2 + x[1] ** 2
    b2 = y[0] ** 2 + y[1] ** 2
    m = x / s + y / delta
    mnorm = math.hypot(m[0], m[1])
    c = a2 / (2.0 * s) + b2 / (2.0 * delta)
    q = 0.5 * (1.0 / s + 1.0 / delta)
    expo = -c - q * rho * rho + mnorm * rho
    return np.exp(expo) * special.i0e(mnorm * rho) / (2.0 * math.pi * s * delta)


def semigroup_residual(p: KernelParams, s: float, t: float, x, y) -> float:
    """Relative Chapman-Kolmogorov residual
    | int K_s(x,z) K_(t-s)(z,y) dz - K_t(x,y) | / K_t(x,y).

    The z integral is split into Gaussian x Gaussian, Gaussian x v,
    v x Gaussian and v x v pieces, each reduced to a radial quadrature.
    """
    if not (0 < s < t):
        raise DomainError("semigroup_residual requires 0 < s < t")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = float(np.hypot(*x)), float(np.hypot(*y))
    if a == 0.0 or b == 0.0:
        raise DivergenceError("semigroup residual needs off-origin endpoints")
    delta = t - s
    quad = p.quad
    ev = _evaluator(p, t)

    rho_hi = max(a, b) + 9.0 * math.sqrt(t) + 2.0
    rho_lo = 1e-7 * min(1.0, math.sqrt(t))
    v_right = ev.vbar_profile(delta, b, rho_lo, rho_hi)   # vbar_delta(rho, b)
    v_left = ev.vbar_profile(s, a, rho_lo, rho_hi)        # vbar_s(rho, a)

    def integrand(rho):
        gg = _gauss_pair_radial(s, delta, x, y, rho)
        g_left = gauss_angular(s, a, rho)
        g_right = gauss_angular(delta, b, rho)
        vl = v_left(rho)
        vr = v_right(rho)
        return rho * (gg + g_left * vr + vl * g_right
                      + 2.0 * math.pi * vl * vr)

    lhs, _ = quad_checked(integrand, 0.0, rho_hi, quad, "semigroup lhs",
                          points=[min(a, b), max(a, b)])
    rhs = full_kernel(p, t, x, y, _ev=ev)
    return abs(lhs - rhs) / rhs


def gauss_k0_convolution(theta: float, t: float, a: float,
                         quad: QuadratureSpec, tail: float = 0.0) -> float:
    """Radial quadrature of int g_t(x - y) K_0(sqrt(2 theta) |y|, tail) dy
    at |x| = a, used by the eigenrelation and convolution-identity
    residuals."""
    root = math.sqrt(2.0 * theta)

    def f(rho):
        if rho <= 0:
            return 0.0
        z = root * rho
        if tail == 0.0:
            k_val = float(special.k0(z))
        else:
            from .specfun import incomplete_bessel_k
            k_val = incomplete_bessel_k(0, z, tail, quad.inner()).value
        return rho * gauss_angular(t, a, rho) * k_val

    hi = a + 9.0 * math.sqrt(t) + 12.0 / root + 2.0
    val, _ = quad_checked(f, 0.0, hi, quad, "gauss*K0", points=[a])
    return val


def gst_eigen_residual(p: KernelParams, t: float, x) -> float:
    """Relative residual of the ground-state eigenrelation
    int K_t(x,y) K_0(sqrt(2 theta)|y|) dy = e^(theta t) K_0(sqrt(2 theta)|x|)."""
    x = np.asarray(x, dtype=float)
    a = float(np.hypot(*x))
    if a == 0.0:
        raise DomainError("eigenrelation residual needs x != 0")
    if t <= 0:
        raise DomainError("gst_eigen_residual requires t > 0")
    theta = p.theta
    root = math.sqrt(2.0 * theta)
    ev = _evaluator(p, t)

    gauss_part = gauss_k0_convolution(theta, t, a, p.quad)

    rho_hi = a + 9.0 * math.sqrt(t) + 12.0 / root + 2.0
    rho_lo = 1e-9
    vprof = ev.vbar_profile(t, a, rho_lo, rho_hi)

    def f(rho):
        return rho * vprof(rho) * float(special.k0(root * rho))

    v_part, _ = quad_checked(f, 1e-300, rho_hi, p.quad, "v*K0 part",
                             points=[a])
    v_part *= 2.0 * math.pi
    rhs = math.exp(theta * t) * float(special.k0(root * a))
    return abs(gauss_part + v_part - rhs) / rhs


def k0_convolution_residuals(theta: float, t: float, T: float, a: float,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> tuple:
    """Relative residuals of the two Gaussian-convolution identities

      (i)  int g_t(x-y) K_0(z_y) dy            = e^(theta t) K_0(z_x, theta t)
      (ii) int g_t(x-y) K_0(z_y, theta (T-t)) dy = e^(theta t) K_0(z_x, theta T)

    with z_w = sqrt(2 theta) |w| and |x| = a.
    """
    from .specfun import incomplete_bessel_k
    root = math.sqrt(2.0 * theta)
    lhs_i = gauss_k0_convolution(theta, t, a, quad)
    rhs_i = math.exp(theta * t) * incomplete_bessel_k(0, root * a,
                                                      theta * t, quad).value
    res_i = abs(lhs_i - rhs_i) / rhs_i

    lhs_ii = gauss_k0_convolution(theta, t, a, quad, tail=theta * (T - t))
    rhs_ii = math.exp(theta * t) * incomplete_bessel_k(0, root * a,
                                                       theta * T, quad).value
    res_ii = abs(lhs_ii - rhs_ii) / rhs_ii
    return res_i, res_ii
