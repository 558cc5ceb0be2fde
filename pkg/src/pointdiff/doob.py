"""Doob-transformed transition densities, survival probabilities,
hitting-time laws, cross-family reweighting, and the conditioned dynamics.

For a driving family h on horizon T the unconditioned process has

    d_(s,t)(x, y)  = h_(T-t)(y) / h_(T-s)(x) * K_(t-s)(x, y)

while conditioning on survival replaces h by the heat-kernel convolution
of its initial profile:

    dcirc_(s,t)(x, y) = (h_0 * g_(T-t))(y) / (h_0 * g_(T-s))(x) * g_(t-s)(x-y)

    p_t(x)     = (h_0 * g_t)(x) / h_t(x)            survival through t
    tau | hit  ~ family closed-form density on (0, T)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .families import (DriftVector, FamilyEvaluator, FamilySpec,
                       drift_eval, get_evaluator)
from .kernel import InteractionEvaluator, KernelParams, full_kernel
from .quadspec import (ApproximateLimitWarning, DomainError,
                       OriginSingularityError, QuadratureSpec)
from .radial import gauss_angular, quad_checked
from .specfun import heat_kernel, heat_radial

__all__ = ["DensityEval", "HitLaw", "transition_density",
           "conditional_density", "survival_probability", "hit_time_law",
           "rn_derivative", "conditional_drift"]


@dataclass(frozen=True)
class DensityEval:
    """Evaluation context binding one driving family to the kernel with the
    same coupling, so nested quadratures share a tolerance budget."""

    family: FamilySpec
    kernel: KernelParams = None
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.kernel is None:
            object.__setattr__(self, "kernel",
                               KernelParams(self.family.theta, self.quad))
        if self.kernel.theta != self.family.theta:
            raise DomainError("family and kernel must share theta")
        object.__setattr__(self, "_caches", {})

    @property
    def T(self) -> float:
        return self.family.horizon_T

    @property
    def theta(self) -> float:
        return self.family.theta

    @property
    def fam(self) -> FamilyEvaluator:
        return get_evaluator(self.family)

    def interaction(self, t_max: float | None = None) -> InteractionEvaluator:
        key = ("int",)
        ev = self._caches.get(key)
        if ev is None:
            ev = InteractionEvaluator(self.theta, t_max or self.T, self.quad)
            self._caches[key] = ev
        return ev


def _radius(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.hypot(x[0], x[1]))


def _check_window(d: DensityEval, s: float, t: float):
    if not (0 <= s < t <= d.T * (1 + 1e-12)):
        raise DomainError(f"need 0 <= s < t <= T, got s={s}, t={t}, T={d.T}")


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def transition_density(d: DensityEval, s: float, t: float, x, y) -> float:
    """Unconditioned transition density d_(s,t)(x, y).

    x at the origin is handled by extrapolating the radial limit from
    |x| in {1e-4, 5e-5, 2.5e-5} (quadratic in 1/log(1/|x|)); the result is
    flagged with :class:`ApproximateLimitWarning`.  y at the origin with
    T - t > 0 is not evaluable (h blows up there).
    """
    _check_window(d, s, t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = _radius(y)
    if b == 0.0 and t < d.T:
        raise OriginSingularityError(
            "transition density not evaluable at y = 0 before the horizon")
    a = _radius(x)
    if a == 0.0:
        radii = (1e-4, 5e-5, 2.5e-5)
        direction = y / b if b > 0 else np.array([1.0, 0.0])
        vals = [transition_density(d, s, t, r * direction, y) for r in radii]
        u = np.array([1.0 / math.log(1.0 / r) for r in radii])
        coeff = np.polyfit(u, vals, 2)
        warnings.warn("transition density at x = 0 extrapolated from the "
                      "radial limit", ApproximateLimitWarning, stacklevel=2)
        return float(coeff[-1])
    num = d.fam.h(d.T - t, b)
    den = d.fam.h(d.T - s, a)
    return num / den * full_kernel(d.kernel, t - s, x, y,
                                   _ev=d.interaction())


def conditional_density(d: DensityEval, s: float, t: float, x, y) -> float:
    """Survival-conditioned transition density dcirc_(s,t)(x, y)."""
    _check_window(d, s, t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    num = d.fam.base_conv(d.T - t, _radius(y))
    den = d.fam.base_conv(d.T - s, _radius(x))
    return num / den * heat_kernel(t - s, x - y)


def survival_probability(d: DensityEval, t: float, x) -> float:
    """p_t(x) = (h_0 * g_t)(x) / h_t(x), the probability of avoiding the
    origin through time t; extended by p(0) = 0 at the origin."""
    if t < 0 or t > d.T * (1 + 1e-12):
        raise DomainError("t outside [0, T]")
    r = _radius(x)
    if r == 0.0:
        return 0.0
    if t == 0.0:
        return 1.0
    return d.fam.base_conv(t, r) / d.fam.h(t, r)


# ---------------------------------------------------------------------------
# Hitting-time law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HitLaw:
    """Hitting law from x0: survive with probability survive_prob, else tau
    has density density_on_hit on (0, T)."""

    x0: tuple
    survive_prob: float
    density_on_hit: object        # callable t -> density, vectorized
    cdf_on_hit: object            # callable t -> P[tau <= t | hit]
    provenance: str

    def normalization_residual(self, quad: QuadratureSpec | None = None,
                               T: float | None = None) -> float:
        """|int_0^T density - 1| by direct adaptive quadrature."""
        quad = quad or QuadratureSpec(abs_tol=1e-9, rel_tol=1e-8)
        T = T if T is not None else self._T
        val, _ = integrate.quad(lambda u: float(self.density_on_hit(u)),
                                0.0, T, epsabs=quad.abs_tol,
                                epsrel=quad.rel_tol, limit=400,
                                points=[T * (1 - 1e-6)])
        return abs(val - 1.0)

    _T: float = 0.0


def hit_time_law(d: DensityEval, x) -> HitLaw:
    """Closed-form conditional hitting-time law for the family of ``d``."""
    r = _radius(x)
    if r == 0.0:
        raise DomainError("hit law needs x != 0")
    T = d.T
    theta = d.theta
    kind = d.family.kind
    surv = survival_probability(d, T, x)

    if kind == "gst":
        from .specfun import incomplete_bessel_k
        z = math.sqrt(2.0 * theta) * r
        k0_full = incomplete_bessel_k(0, z, 0.0, d.quad).value
        k0_T = incomplete_bessel_k(0, z, theta * T, d.quad).value
        C = k0_full - k0_T

        def density(t):
            scalar = np.ndim(t) == 0
            t = np.atleast_1d(np.asarray(t, dtype=float))
            out = np.exp(-theta * t - r * r / (2.0 * t)) / (2.0 * t) / C
            return float(out[0]) if scalar else out

        def cdf(t):
            scalar = np.ndim(t) == 0
            t = np.atleast_1d(np.asarray(t, dtype=float))
            out = np.empty_like(t)
            for i, ti in enumerate(t):
                k0_t = incomplete_bessel_k(0, z, theta * ti, d.quad).value
                out[i] = (k0_full - k0_t) / C
            return float(out[0]) if scalar else out

        prov = "gst closed form (truncated GIG)"
        return HitLaw(tuple(np.asarray(x, float)), surv, density, cdf, prov,
                      _T=T)

    fam = d.fam
    tk = fam._time_kernel_cached()
    if kind == "leb":
        norm = fam.V(T, r)
        prov = "leb closed form"
    elif kind == "dir":
        norm = fam.V(T, r)
        prov = f"dir closed form, eps-regularized (eps={d.family.eps:g})"
    else:
        norm = fam.V(T, r)
        prov = "gau closed form"

    def density(t, _tk=tk, _norm=norm):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        pos = (t > 0) & (t < T)
        if pos.any():
            out[pos] = np.array([
                float(heat_radial(ti, r)) * _tk(T - ti) for ti in t[pos]
            ]) / _norm
        return float(out[0]) if scalar else out

    # cumulative quadrature on a dense geometric-plus-linear grid; monotone
    # interpolation keeps the inverse-CDF bisection well posed
    t_min = max(r * r / 1500.0, T * 1e-12)
    grid = np.unique(np.concatenate([
        np.geomspace(t_min, T, 220),
        np.linspace(t_min, T, 220),
        T - np.geomspace(T * 1e-9, T - t_min, 220)[::-1],
    ]))
    masses = [0.0]
    for lo, hi in zip(grid[:-1], grid[1:]):
        m, _ = integrate.quad(lambda u: float(density(u)), lo, hi,
                              epsabs=1e-12, epsrel=1e-9, limit=100)
        masses.append(m)
    cum = np.cumsum(masses)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # flat segments (zero hit mass) make PCHIP divide by zero internally;
        # the resulting derivative is correctly clamped to 0
        pch = PchipInterpolator(grid, cum, extrapolate=False)

    def cdf(t, _pch=pch, _grid=grid):
        t = np.clip(np.asarray(t, dtype=float), _grid[0], _grid[-1])
        out = _pch(t)
        return out if out.shape else float(out)

    return HitLaw(tuple(np.asarray(x, float)), surv, density, cdf, prov, _T=T)


# ---------------------------------------------------------------------------
# Reweighting and conditioned drift
# ---------------------------------------------------------------------------

def rn_derivative(dh: DensityEval, dhbar: DensityEval, x0, xT) -> float:
    """Radon-Nikodym density of the h-law w.r.t. the hbar-law on F_T:
    [h_0(X_T) / hbar_0(X_T)] * [hbar_T(x0) / h_T(x0)].

    Infinity/zero signals from singular initial profiles (the Dirac family's
    h_0 is a delta) propagate through the pointwise arithmetic.
    """
    if dh.T != dhbar.T or dh.theta != dhbar.theta:
        raise DomainError("rn_derivative requires matching theta and T")
    r0, rT = _radius(x0), _radius(xT)
    if r0 == 0.0 or rT == 0.0:
        raise DomainError("rn_derivative needs off-origin endpoints")
    num = dh.fam.h(0.0, rT) * dhbar.fam.h(dh.T, r0)
    den = dhbar.fam.h(0.0, rT) * dh.fam.h(dh.T, r0)
    return num / den


def conditional_drift(d: DensityEval, t: float, x) -> DriftVector:
    """Drift of the survival-conditioned diffusion with time-to-horizon t:
    grad log (h_0 * g_t)(x)."""
    if t < 0 or t > d.T * (1 + 1e-12):
        raise DomainError("t outside [0, T]")
    r = _radius(x)
    kind = d.family.kind
    if kind == "leb":
        return DriftVector((0.0, 0.0), 0.0)
    if r == 0.0:
        raise DomainError("conditional drift undefined at the origin for "
                          "this family")
    rad = d.fam.conditional_drift_radial(t, r)
    return DriftVector.radial(rad, x)


# ---------------------------------------------------------------------------
# Quadrature diagnostics (normalization, Chapman-Kolmogorov, PDE residuals)
# ---------------------------------------------------------------------------

def _h_ratio_profiles(d: DensityEval, s: float, t: float, a: float,
                      r_hi: float, rel_tol: float = 1e-8):
    r_lo = min(1e-7, a * 1e-3)
    h_out = d.fam.h_profile(d.T - t, r_lo, r_hi, rel_tol=rel_tol)
    h_in = d.fam.h(d.T - s, a)
    return h_out, h_in, r_lo


def transition_normalization(d: DensityEval, s: float, t: float, x) -> float:
    """|int d_(s,t)(x, y) dy - 1| via the radial reduction."""
    _check_window(d, s, t)
    a = _radius(x)
    if a == 0.0:
        raise DomainError("normalization check needs x != 0")
    delta = t - s
    r_hi = a + 10.0 * math.sqrt(delta) + 2.0
    h_out, h_in, r_lo = _h_ratio_profiles(d, s, t, a, r_hi)
    ev = d.interaction()
    vprof = ev.vbar_profile(delta, a, min(r_lo, 1e-7), r_hi)

    def f(rho):
        if rho <= 0.0:
            return 0.0
        return rho * float(h_out(rho)) * (
            float(gauss_angular(delta, a, rho))
            + 2.0 * math.pi * float(vprof(rho)))

    val, _ = quad_checked(f, 0.0, r_hi, d.quad, "transition normalization",
                          points=[a])
    return abs(val / h_in - 1.0)


def chapman_kolmogorov_residual(d: DensityEval, s: float, u: float, t: float,
                                x, y) -> float:
    """Relative residual of int d_(s,u)(x,z) d_(u,t)(z,y) dz = d_(s,t)(x,y).

    The intermediate h_(T-u)(z) factors cancel algebraically in the product,
    leaving the kernel semigroup integral times the outer h-ratio; the
    z-integral below is that reduced form.
    """
    from .kernel import semigroup_residual
    _check_window(d, s, t)
    if not (s < u < t):
        raise DomainError("need s < u < t")
    return semigroup_residual(d.kernel, u - s, t - s, x, y)


def p_pde_residual(d: DensityEval, t: float, x, dlog: float = 1e-3) -> float:
    """Finite-difference residual of dp/dt = 1/2 lap p + b . grad p."""
    r = _radius(x)
    if r == 0.0:
        raise DomainError("PDE residual needs x != 0")
    dt = dlog * t
    dr = dlog * r

    def p(tt, rr):
        return survival_probability(d, tt, (rr, 0.0))

    stencil = np.array([-2, -1, 0, 1, 2], dtype=float)
    p_t = (p(t - 2 * dt, r) - 8 * p(t - dt, r) + 8 * p(t + dt, r)
           - p(t + 2 * dt, r)) / (12 * dt)
    pr = np.array([p(t, r + k * dr) for k in stencil])
    p_r = (pr[0] - 8 * pr[1] + 8 * pr[3] - pr[4]) / (12 * dr)
    p_rr = (-pr[0] + 16 * pr[1] - 30 * pr[2] + 16 * pr[3] - pr[4]) \
        / (12 * dr * dr)
    lap = p_rr + p_r / r
    b_rad = drift_eval(d.family, t, (r, 0.0)).radial_part
    resid = p_t - 0.5 * lap - b_rad * p_r
    return abs(resid) / max(abs(p_t), 1e-300)


def p_gradient_residual(d: DensityEval, t: float, x,
                        dlog: float = 1e-4) -> float:
    """Finite-difference check of grad p = p (bcirc - b)."""
    r = _radius(x)
    dr = dlog * r

    def p(rr):
        return survival_probability(d, t, (rr, 0.0))

    p_r = (p(r - 2 * dr) - 8 * p(r - dr) + 8 * p(r + dr) - p(r + 2 * dr)) \
        / (12 * dr)
    b_rad = drift_eval(d.family, t, (r, 0.0)).radial_part
    bc_rad = conditional_drift(d, t, (r, 0.0)).radial_part
    claim = p(r) * (bc_rad - b_rad)
    return abs(p_r - claim) / max(abs(p_r), 1e-300)


def forward_equation_residual(d: DensityEval, s: float, t: float, x, y,
                              dlog: float = 2e-3) -> float:
    """Coarse finite-difference residual of the forward Kolmogorov equation
    for d_(s,t)(x, .) at the interior point y."""
    _check_window(d, s, t)
    y = np.asarray(y, dtype=float)
    b = _radius(y)
    dt = dlog * (t - s)
    db = dlog * b

    def dens(tt, yy):
        return transition_density(d, s, tt, x, yy)

    d_t = (dens(t - 2 * dt, y) - 8 * dens(t - dt, y) + 8 * dens(t + dt, y)
           - dens(t + 2 * dt, y)) / (12 * dt)

    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    vals1 = np.array([dens(t, y + k * db * e1) for k in (-2, -1, 0, 1, 2)])
    vals2 = np.array([dens(t, y + k * db * e2) for k in (-2, -1, 0, 1, 2)])
    lap = ((-vals1[0] + 16 * vals1[1] - 30 * vals1[2] + 16 * vals1[3]
            - vals1[4])
           + (-vals2[0] + 16 * vals2[1] - 30 * vals2[2] + 16 * vals2[3]
              - vals2[4])) / (12 * db * db)

    # div(b d) = (b_r' + b_r/|y|) d + b . grad d for the radial field b
    tau = d.T - t
    b_rad = drift_eval(d.family, tau, y).radial_part
    h_fd = 1e-4 * b
    b_plus = drift_eval(d.family, tau, y * (1 + h_fd / b)).radial_part
    b_minus = drift_eval(d.family, tau, y * (1 - h_fd / b)).radial_part
    div_b = (b_plus - b_minus) / (2 * h_fd) + b_rad / b
    grad_d = np.array([
        (vals1[3] - vals1[1]) / (2 * db),
        (vals2[3] - vals2[1]) / (2 * db),
    ])
    div_bd = div_b * vals1[2] + b_rad * float((y / b) @ grad_d)
    resid = d_t - 0.5 * lap + div_bd
    return abs(resid) / max(abs(d_t), 1e-300)
