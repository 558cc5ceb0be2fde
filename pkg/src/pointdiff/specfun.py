"""Scalar special functions: planar Gaussian heat kernel, the Volterra
function and its derivative, exponential integrals, and (incomplete)
modified Bessel functions of the second kind evaluated from their integral
representations.

Conventions used throughout:

    g_t(x)      = (2 pi t)^-1 exp(-|x|^2 / (2 t))
    nu(a)       = int_0^inf a^s / Gamma(s+1) ds
    nu'(a)      = int_0^inf s a^(s-1) / Gamma(s+1) ds
    E1(x)       = int_x^inf e^-b / b db,   E(x) = e^x E1(x)
    K_v(z)      = 1/2 (z/2)^v int_0^inf a^(-v-1) exp(-a - z^2/(4a)) da
    K_v(z, y)   = same integrand restricted to a in [y, inf)

The incomplete Bessel function is most useful here through the rescaled
tails  Itil_k(r, t) = int_t^inf u^(-1-k) exp(-theta u - r^2/(2u)) du,
related by K_0(sqrt(2 theta) r, theta t) = Itil_0 / 2 and
K_1(sqrt(2 theta) r, theta t) = r Itil_1 / (2 sqrt(2 theta)).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .quadspec import (DEFAULT_QUAD, DomainError, QuadratureSpec,
                       SpecialValue)

EULER_GAMMA = float(np.euler_gamma)
# coefficient of x^2 in the series 1/Gamma(1+x) = 1 + gamma x + C2 x^2 + ...
_C2 = EULER_GAMMA ** 2 / 2.0 - math.pi ** 2 / 12.0

__all__ = [
    "heat_kernel",
    "volterra_nu",
    "volterra_nu_prime",
    "exp_integral_E1",
    "renorm_E",
    "bessel_k",
    "incomplete_bessel_k",
    "renewal_residual",
    "VolterraTable",
    "inc_radial_log",
    "heat_radial",
]


# ---------------------------------------------------------------------------
# Gaussian heat kernel
# ---------------------------------------------------------------------------

def heat_kernel(t: float, x) -> float:
    """Two-dimensional Gaussian heat kernel g_t(x)."""
    if t <= 0:
        raise DomainError(f"heat_kernel requires t > 0, got t={t}")
    x = np.asarray(x, dtype=float)
    r2 = float(x[0]) ** 2 + float(x[1]) ** 2
    return math.exp(-r2 / (2.0 * t)) / (2.0 * math.pi * t)


def heat_radial(t, r):
    """Radial profile of g_t: accepts arrays, returns exp(-r^2/2t)/(2 pi t)."""
    r = np.asarray(r, dtype=float)
    return np.exp(-r * r / (2.0 * t)) / (2.0 * math.pi * t)


# ---------------------------------------------------------------------------
# Volterra function nu and its derivative
# ---------------------------------------------------------------------------

def _nu_small(a: float, quad: QuadratureSpec):
    # substitution s = u / log(1/a): concentrates the integrand mass near
    # s = O(1/log(1/a)) where it actually lives for a << 1
    L = math.log(1.0 / a)

    def f(u):
        return math.exp(-u) / special.gamma(u / L + 1.0)

    val, err = integrate.quad(f, 0.0, np.inf,
                              epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                              limit=quad.max_subdivisions)
    return val / L, err / L


def _nu_large(a: float, quad: QuadratureSpec):
    lna = math.log(a)

    def f(s):
        return math.exp(s * lna - special.gammaln(s + 1.0))

    # geometric tail bound: the integrand ratio over one unit of s is
    # a/(s+1) <= 1/2 once s >= 2a - 1, so the tail is < 2 f(s_max)
    s_max = max(12.0, 2.0 * a + 10.0)
    target = quad.abs_tol * 1e-3
    while f(s_max) * 2.0 > target and s_max < 1e7:
        s_max *= 1.4
    val, err = integrate.quad(f, 0.0, s_max,
                              epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                              limit=quad.max_subdivisions)
    return val, err + 2.0 * f(s_max)


def volterra_nu(a: float, quad: QuadratureSpec = DEFAULT_QUAD) -> SpecialValue:
    """Volterra function nu(a); monotone increasing, nu(0) = 0."""
    if a < 0:
        raise DomainError(f"volterra_nu requires a >= 0, got a={a}")
    if a == 0:
        return SpecialValue(0.0, 0.0)
    if a < 0.5:
        val, err = _nu_small(a, quad)
    else:
        val, err = _nu_large(a, quad)
    return quad.check(val, err, "volterra_nu")


def volterra_nu_prime(a: float, quad: QuadratureSpec = DEFAULT_QUAD) -> SpecialValue:
    """Derivative nu'(a); strictly positive, diverges as a -> 0."""
    if a <= 0:
        raise DomainError(f"volterra_nu_prime requires a > 0 (nu' blows up "
                          f"at 0), got a={a}")
    if a < 0.5:
        L = math.log(1.0 / a)

        def f(u):
            return u * math.exp(-u) / special.gamma(u / L + 1.0)

        val, err = integrate.quad(f, 0.0, np.inf,
                                  epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                                  limit=quad.max_subdivisions)
        scale = 1.0 / (a * L * L)
        return quad.check(val * scale, err * scale, "volterra_nu_prime")

    lna = math.log(a)

    def f(s):
        if s <= 0:
            return 0.0
        return math.exp(math.log(s) + (s - 1.0) * lna - special.gammaln(s + 1.0))

    s_max = max(12.0, 2.0 * a + 10.0)
    target = quad.abs_tol * 1e-3
    while f(s_max) * 2.0 > target and s_max < 1e7:
        s_max *= 1.4
    val, err = integrate.quad(f, 0.0, s_max,
                              epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                              limit=quad.max_subdivisions)
    return quad.check(val, err + 2.0 * f(s_max), "volterra_nu_prime")


# ---------------------------------------------------------------------------
# Exponential integral and its renormalization
# ---------------------------------------------------------------------------

def exp_integral_E1(x: float) -> float:
    """Classical exponential integral E1(x) for x > 0."""
    if x <= 0:
        raise DomainError(f"exp_integral_E1 requires x > 0, got x={x}")
    return float(special.exp1(x))


def renorm_E(x: float) -> float:
    """Exponentially renormalized exponential integral E(x) = e^x E1(x)."""
    if x <= 0:
        raise DomainError(f"renorm_E requires x > 0, got x={x}")
    if x > 500.0:
        # e^x E1(x) ~ (1/x)(1 - 1/x + 2/x^2 - 6/x^3 + 24/x^4); exp1
        # underflows long before the truncation error here is visible
        inv = 1.0 / x
        return inv * (1.0 - inv * (1.0 - inv * (2.0 - inv * (6.0 - 24.0 * inv))))
    return math.exp(x) * float(special.exp1(x))


def renewal_residual(x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Relative residual of the renewal identity
    int_0^x nu'(b) E(x-b) db = e^x.

    The b->0 end converges too slowly for direct quadrature (its mass decays
    only like 1/log), so that half is integrated by parts using nu; the b->x
    end has the log singularity of E and is handled by an exponential
    substitution.
    """
    if x <= 0:
        raise DomainError("renewal_residual requires x > 0")
    inner = quad.inner()
    half = 0.5 * x

    def nu(b):
        return volterra_nu(b, inner).value

    def nup(b):
        return volterra_nu_prime(b, inner).value

    # int_0^{x/2} nu'(b) E(x-b) db = nu(x/2) E(x/2) + int_0^{x/2} nu(b) E'(x-b) db
    # with E'(y) = E(y) - 1/y smooth on [x/2, x]
    def f_low(b):
        if b <= 0:
            return 0.0
        y = x - b
        return nu(b) * (renorm_E(y) - 1.0 / y)

    low, err_low = integrate.quad(f_low, 0.0, half,
                                  epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                                  limit=quad.max_subdivisions)
    low += nu(half) * renorm_E(half)

    # int_{x/2}^x nu'(b) E(x-b) db with b = x - e^-p
    p0 = math.log(2.0 / x)

    def f_high(p):
        w = math.exp(-p)
        return nup(x - w) * renorm_E(w) * w

    high, err_high = integrate.quad(f_high, p0, p0 + 60.0,
                                    epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                                    limit=quad.max_subdivisions)
    total = low + high
    return abs(total - math.exp(x)) / math.exp(x)


# ---------------------------------------------------------------------------
# Modified Bessel K and its incomplete (upper-tail) version
# ---------------------------------------------------------------------------

def _bessel_tail(order: int, z: float, y: float, quad: QuadratureSpec):
    """log-substituted quadrature of 1/2 (z/2)^v int_y^inf a^(-v-1) e^(-a - z^2/4a) da.

    The integrand is rescaled by its peak value so the reported quadrature
    error stays meaningful when the result underflows relative magnitude.
    """
    if order not in (0, 1):
        raise DomainError(f"bessel order must be 0 or 1, got {order}")
    if z <= 0:
        raise DomainError(f"bessel_k requires z > 0, got z={z}")
    if y < 0:
        raise DomainError(f"incomplete bessel requires y >= 0, got y={y}")

    a_star = max(y, 0.5 * z) if y > 0 else 0.5 * z
    peak = -a_star - z * z / (4.0 * a_star) - order * math.log(a_star)

    def f(u):
        # exponent relative to the integrand peak (Jacobian du = a du folded in)
        if abs(u) > 700.0:
            return 0.0
        a = math.exp(u)
        expo = (-a - z * z / (4.0 * a) - order * u) - peak
        return math.exp(expo) if expo > -745.0 else 0.0

    lo = math.log(y) if y > 0 else -np.inf
    val, err = integrate.quad(f, lo, np.inf,
                              epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                              limit=quad.max_subdivisions)
    pref = 0.5 * (0.5 * z) ** order
    scale = pref * math.exp(peak) if peak > -745.0 else 0.0
    return val * scale, err * max(scale, pref * 1e-300)


def bessel_k(order: int, z: float, quad: QuadratureSpec = DEFAULT_QUAD) -> SpecialValue:
    """Modified Bessel function K_v(z), v in {0, 1}, from the integral form."""
    val, err = _bessel_tail(order, z, 0.0, quad)
    return quad.check(val, err, "bessel_k")


def incomplete_bessel_k(order: int, z: float, y: float,
                        quad: QuadratureSpec = DEFAULT_QUAD) -> SpecialValue:
    """Incomplete modified Bessel function K_v(z, y): the tail over a >= y.

    K_v(z, 0) = K_v(z) and K_v(z, .) decreases to 0.
    """
    val, err = _bessel_tail(order, z, y, quad)
    return quad.check(val, err, "incomplete_bessel_k")


# ---------------------------------------------------------------------------
# Fast vectorized tail integrals for the ground-state family
# ---------------------------------------------------------------------------

_GL_NODES = 320
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_NODES)


def inc_radial_log(k: int, theta: float, t: float, r):
    """log of Itil_k(r, t) = int_t^inf u^(-1-k) exp(-theta u - r^2/(2u)) du.

    Vectorized over r (any shape); t > 0.  Evaluated by Gauss-Legendre on
    u = t e^v with log-sum-exp accumulation, so it is safe far into the
    tails where the integral underflows.
    """
    if t <= 0:
        raise DomainError("inc_radial_log requires t > 0")
    if theta <= 0:
        raise DomainError("inc_radial_log requires theta > 0")
    r = np.asarray(r, dtype=float)
    r_max = float(np.max(r)) if r.size else 0.0
    u_peak = max(t, r_max / math.sqrt(2.0 * theta))
    u_cut = u_peak + (90.0 + 2.0 * abs(math.log(max(u_peak, 1e-300)))) / theta
    V = math.log(u_cut / t)
    v = 0.5 * V * (_gl_x + 1.0)
    w = 0.5 * V * _gl_w
    u = t * np.exp(v)
    # log integrand including the du = u dv Jacobian
    base = -theta * u - k * np.log(u)
    expo = base - np.multiply.outer(r * r, 1.0 / (2.0 * u))
    m = np.max(expo, axis=-1, keepdims=True)
    out = np.log(np.sum(w * np.exp(expo - m), axis=-1)) + np.squeeze(m, axis=-1)
    return out if out.shape else float(out)


def inc_tail_fields(theta: float, t, r, nodes: int = 192):
    """(log Itil_0, Itil_1/Itil_0) for elementwise arrays t, r (t > 0).

    Same integrals as :func:`inc_radial_log` but with a per-element log
    time grid, for vectorized evaluation along simulated paths where every
    path carries its own remaining time.  The ratio gives the conditioned
    drift:  grad log K_0(sqrt(2 theta)|x|, theta t) = -|x| Itil_1/Itil_0 xhat.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(t <= 0):
        raise DomainError("inc_tail_fields requires t > 0")
    glx, glw = np.polynomial.legendre.leggauss(nodes)
    u_peak = np.maximum(t, r / math.sqrt(2.0 * theta))
    u_cut = u_peak + (90.0 + 2.0 * np.abs(np.log(np.maximum(u_peak, 1e-300)))) / theta
    V = np.log(u_cut / t)
    v = 0.5 * V[:, None] * (glx[None, :] + 1.0)
    w = 0.5 * V[:, None] * glw[None, :]
    u = t[:, None] * np.exp(v)
    expo = -theta * u - (r * r)[:, None] / (2.0 * u)
    m = np.max(expo, axis=1, keepdims=True)
    e = w * np.exp(expo - m)
    s0 = np.sum(e, axis=1)
    s1 = np.sum(e / u, axis=1)
    log_i0 = np.log(s0) + m[:, 0]
    return log_i0, s1 / s0


# ---------------------------------------------------------------------------
# Memoized Volterra evaluator for hot loops
# ---------------------------------------------------------------------------

class VolterraTable:
    """Cubic-spline table of nu and nu' on a logarithmic grid.

    Both functions are slowly varying in log(b), so splining nu(e^tau) and
    b*nu'(e^tau) against tau gives near machine precision at a tiny cost per
    call.  Below ``b_lo`` the asymptotics

        nu(b)  ~ (1/L)(1 + gamma/L + 2 C2/L^2),        L = log(1/b)
        nu'(b) ~ (1/(b L^2))(1 + 2 gamma/L + 6 C2/L^2)

    are used.  The table is immutable after construction, so concurrent
    reads are safe.
    """

    B_LO = 1e-12

    def __init__(self, b_max: float, points_per_decade: int = 64,
                 quad: QuadratureSpec | None = None):
        if b_max <= self.B_LO:
            raise DomainError("VolterraTable needs b_max > 1e-12")
        quad = quad or QuadratureSpec(abs_tol=1e-12, rel_tol=1e-11)
        self.b_max = float(b_max) * 1.05
        # log-spaced nodes where nu is log-smooth, linear nodes above b = 1/4
        # where nu grows like e^b and log spacing becomes too coarse
        tau_lo = math.log(self.B_LO)
        tau_hi = math.log(min(0.25, self.b_max))
        n_log = max(8, int(points_per_decade * (tau_hi - tau_lo) / math.log(10.0)))
        b = np.exp(np.linspace(tau_lo, tau_hi, n_log))
        if self.b_max > 0.25:
            n_lin = max(24, int(96 * (self.b_max - 0.25)) + 1)
            b = np.concatenate([b, np.linspace(0.25, self.b_max, n_lin)[1:]])
        tau = np.log(b)
        nu_vals = np.array([volterra_nu(bi, quad).value for bi in b])
        nup_vals = np.array([volterra_nu_prime(bi, quad).value for bi in b])
        self._nu = CubicSpline(tau, nu_vals)
        self._q = CubicSpline(tau, nup_vals * b)

    def nu(self, b):
        b = np.asarray(b, dtype=float)
        out = np.empty_like(b)
        small = b < self.B_LO
        mid = ~small & (b > 0)
        if np.any(b > self.b_max):
            raise DomainError("VolterraTable queried beyond its range")
        if np.any(mid):
            out[mid] = self._nu(np.log(b[mid]))
        if np.any(small):
            bs = b[small]
            out[small] = 0.0
            pos = bs > 0
            L = np.log(1.0 / bs[pos])
            vals = (1.0 + EULER_GAMMA / L + 2.0 * _C2 / (L * L)) / L
            tmp = np.zeros_like(bs)
            tmp[pos] = vals
            out[small] = tmp
        return out if out.shape else float(out)

    def nu_prime(self, b):
        b = np.asarray(b, dtype=float)
        if np.any(b <= 0):
            raise DomainError("nu' requires b > 0")
        if np.any(b > self.b_max):
            raise DomainError("VolterraTable queried beyond its range")
        out = np.empty_like(b)
        small = b < self.B_LO
        if np.any(~small):
            bb = b[~small]
            out[~small] = self._q(np.log(bb)) / bb
        if np.any(small):
            bs = b[small]
            L = np.log(1.0 / bs)
            out[small] = (1.0 + 2.0 * EULER_GAMMA / L + 6.0 * _C2 / (L * L)) \
                / (bs * L * L)
        return out if out.shape else float(out)
