"""The space-time harmonic transformation H_t and its machinery.

    H_t(x) = (hhat_0 * g_t)(x) / h_t(x),     hhat_0(x) = x h_0(x),

extended by H_t(0) = 0.  H is radial as a vector field, H_t(x) =
Hbar_t(|x|) x, and its Jacobian splits orthogonally into a radial
eigenvalue  lambda = d/dr [r Hbar(r)]  and a tangential eigenvalue
lambda_perp = Hbar(r).

Closed forms (z = sqrt(2 theta) r):

    leb   Hbar = 1 / (1 + V_t(r))
    gst   Hbar = [K_0(z, theta t) - ... ] / K_0(z)
               = (Itil_0 - t Itil_1) / (2 K_0(z))
    gau   Hbar = alpha/(alpha+t) * gbar_(alpha+t)(r) / h_t(r)
    dir   H == 0   (hhat_0 = x delta_0 vanishes; H is degenerate and
                    non-invertible, so inversion raises)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .doob import DensityEval, transition_normalization
from .families import FamilySpec, get_evaluator
from .quadspec import (DomainError, HypothesisViolationError, QuadratureSpec,
                       ToleranceError)
from .radial import gauss_angular_cos, quad_checked
from .specfun import heat_radial, inc_radial_log

__all__ = ["HEval", "JacobianEigs", "h_map", "h_map_radial", "jacobian_eigs",
           "h_map_inverse", "harmonicity_residual", "first_moment_residual",
           "moment_scaling_probe", "eigen_sweep"]


@dataclass(frozen=True)
class HEval:
    """Evaluation context for the harmonic map of one driving family."""

    family: FamilySpec
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    @property
    def T(self) -> float:
        return self.family.horizon_T

    @property
    def theta(self) -> float:
        return self.family.theta

    @property
    def fam(self):
        return get_evaluator(self.family)


@dataclass(frozen=True)
class JacobianEigs:
    """Radial/tangential eigenvalues of the H-map Jacobian at one point."""

    lambda_radial: float
    lambda_tangential: float


def _check_t(e: HEval, t: float):
    if t < 0 or t > e.T * (1 + 1e-12):
        raise DomainError(f"t={t} outside [0, T={e.T}]")


def h_map_radial(e: HEval, t: float, r: float) -> float:
    """Radial profile Hbar_t(r) with H_t(x) = Hbar_t(|x|) x."""
    _check_t(e, t)
    if r < 0:
        raise DomainError("radius must be nonnegative")
    kind = e.family.kind
    if kind == "dir":
        return 0.0
    if t == 0.0:
        return 1.0
    if r == 0.0:
        # finite limit; only the product Hbar * r must vanish at 0
        r = 1e-300
    th = e.theta
    if kind == "gst":
        rr = np.asarray(r, dtype=float)
        i0 = math.exp(inc_radial_log(0, th, t, rr))
        i1 = math.exp(inc_radial_log(1, th, t, rr))
        return (i0 - t * i1) / (2.0 * float(special.k0(math.sqrt(2 * th) * r)))
    if kind == "leb":
        return 1.0 / (1.0 + e.fam.V(t, r))
    # gau
    alpha = e.family.alpha
    return alpha / (alpha + t) * float(heat_radial(alpha + t, r)) \
        / e.fam.h(t, r)


def h_map(e: HEval, t: float, x) -> np.ndarray:
    """H_t(x); H_t(0) = 0 by continuous extension."""
    x = np.asarray(x, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    if r == 0.0:
        return np.zeros(2)
    return h_map_radial(e, t, r) * x


def jacobian_eigs(e: HEval, t: float, x) -> JacobianEigs:
    """Eigenvalues of the Jacobian of H_t at x != 0; analytic for the named
    families, 5-point stencil on the radial profile otherwise."""
    x = np.asarray(x, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    if r == 0.0:
        raise DomainError("Jacobian eigenvalues need x != 0")
    _check_t(e, t)
    kind = e.family.kind
    hbar = h_map_radial(e, t, r)
    if kind == "dir":
        return JacobianEigs(0.0, 0.0)
    if t == 0.0:
        return JacobianEigs(1.0, 1.0)
    th = e.theta
    if kind == "gst":
        rr = np.asarray(r, dtype=float)
        i0 = math.exp(inc_radial_log(0, th, t, rr))
        i1 = math.exp(inc_radial_log(1, th, t, rr))
        i2 = math.exp(inc_radial_log(2, th, t, rr))
        z = math.sqrt(2.0 * th) * r
        k0 = float(special.k0(z))
        k1 = float(special.k1(z))
        n = 0.5 * r * (i0 - t * i1)
        n_prime = 0.5 * (i0 - t * i1) - 0.5 * r * r * (i1 - t * i2)
        lam = n_prime / k0 + n * math.sqrt(2.0 * th) * k1 / (k0 * k0)
        return JacobianEigs(lam, hbar)
    if kind == "leb":
        V = e.fam.V(t, r)
        Vp = e.fam.V_dr(t, r)
        lam = 1.0 / (1.0 + V) - r * Vp / (1.0 + V) ** 2
        return JacobianEigs(lam, hbar)
    if kind == "gau":
        alpha = e.family.alpha
        c = alpha / (alpha + t)
        g = float(heat_radial(alpha + t, r))
        gp = -(r / (alpha + t)) * g
        h = e.fam.h(t, r)
        hp = gp + e.fam.V_dr(t, r)
        lam = c * ((gp * r + g) * h - g * r * hp) / (h * h)
        return JacobianEigs(lam, hbar)
    # stencil fallback for composite-style profiles
    dr = max(1e-6, 1e-4 * r)
    vals = np.array([h_map_radial(e, t, r + k * dr) * (r + k * dr)
                     for k in (-2, -1, 0, 1, 2)])
    lam = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * dr)
    return JacobianEigs(float(lam), hbar)


def h_map_inverse(e: HEval, t: float, y) -> np.ndarray:
    """Solve H_t(x) = y for x (radially: r Hbar_t(r) = |y|).

    The radial map is bracketed, checked for monotonicity on the bracket
    (the bijectivity hypothesis has no proof; a non-monotone bracket raises
    :class:`HypothesisViolationError` carrying the bracket), then solved by
    Brent's method; the round trip must return |y| to 1e-9 (1 + |y|).
    """
    y = np.asarray(y, dtype=float)
    target = float(np.hypot(y[0], y[1]))
    if target == 0.0:
        raise DomainError("inverse at 0 is the origin for every family; "
                          "request a nonzero target")
    if e.family.kind == "dir":
        raise HypothesisViolationError(
            "the Dirac family's H-map is identically 0 and not invertible")
    _check_t(e, t)

    def fwd(r):
        return h_map_radial(e, t, r) * r

    r_lo, r_hi = 0.5 * target, 2.0 * target
    while fwd(r_lo) >= target and r_lo > 1e-280:
        r_lo *= 0.25
    while fwd(r_hi) <= target and r_hi < 1e12:
        r_hi *= 4.0
    grid = np.geomspace(r_lo, r_hi, 33)
    vals = np.array([fwd(g) for g in grid])
    if not np.all(np.diff(vals) > 0):
        raise HypothesisViolationError(
            "radial map r -> r Hbar(r) non-monotone on inversion bracket",
            bracket=(r_lo, r_hi))
    root = optimize.brentq(lambda r: fwd(r) - target, r_lo, r_hi,
                           xtol=1e-14, rtol=1e-15, maxiter=200)
    if abs(fwd(root) - target) > 1e-9 * (1.0 + target):
        raise ToleranceError("inverse round trip failed", best=root,
                             err=abs(fwd(root) - target))
    return root * y / target


# ---------------------------------------------------------------------------
# Harmonicity and first-moment identities
# ---------------------------------------------------------------------------

def harmonicity_residual(e: HEval, s: float, t: float, x) -> tuple:
    """Relative residuals of the two space-time harmonicity identities:

    h:  int K_(t-s)(x,y) h_(T-t)(y) dy = h_(T-s)(x)
    H:  int d_(s,t)(x,y) H_(T-t)(y) dy = H_(T-s)(x)

    The interaction part of the H identity vanishes exactly by odd angular
    symmetry (v depends on |y| alone), so only the Gaussian part is
    integrated there.
    """
    d = DensityEval(e.family, quad=e.quad)
    h_res = transition_normalization(d, s, t, x)

    x = np.asarray(x, dtype=float)
    a = float(np.hypot(x[0], x[1]))
    if a == 0.0:
        raise DomainError("harmonicity residual needs x != 0")
    delta = t - s
    T = e.T
    r_hi = a + 10.0 * math.sqrt(delta) + 2.0
    r_lo = min(1e-7, a * 1e-3)
    h_out = d.fam.h_profile(T - t, r_lo, r_hi, rel_tol=1e-8)

    def f(rho):
        if rho <= 0.0:
            return 0.0
        return rho * rho * float(h_out(rho)) * h_map_radial(e, T - t, rho) \
            * float(gauss_angular_cos(delta, a, rho))

    val, _ = quad_checked(f, 0.0, r_hi, e.quad, "H harmonicity", points=[a])
    lhs = val / d.fam.h(T - s, a)
    rhs = h_map_radial(e, T - s, a) * a
    H_res = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return h_res, H_res


def first_moment_residual(e: HEval, t: float, x) -> float:
    """Lebesgue-family instance of the hhat identity: the first moment of
    K_t(x, .) equals x (the interaction part integrates to zero by angular
    symmetry).  Returns | int K_t(x,y) (y . xhat) dy - |x| | / |x|."""
    if e.family.kind != "leb":
        raise DomainError("first-moment identity is checked on the "
                          "Lebesgue family, whose hhat_0 * g is the identity")
    x = np.asarray(x, dtype=float)
    a = float(np.hypot(x[0], x[1]))
    if a == 0.0:
        raise DomainError("needs x != 0")

    def f(rho):
        return rho * rho * float(gauss_angular_cos(t, a, rho))

    hi = a + 10.0 * math.sqrt(t) + 2.0
    val, _ = quad_checked(f, 0.0, hi, e.quad, "first moment", points=[a])
    return abs(val - a) / a


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------

def moment_scaling_probe(e: HEval, m: int, s: float, t: float, x,
                         n_paths: int, seed: int = 0,
                         workers: int = 1):
    """Monte Carlo estimate of
    E |H_(T-t)(Y) - H_(T-s)(x)|^(2m) / (t-s)^m  with Y ~ d_(s,t)(x, .).

    Returns an McEstimate of the normalized moment.  Across a dyadic sweep
    of t-s the ratio max/min stays bounded for admissible families; the
    bound itself is existential, so callers assert boundedness, not a
    constant.
    """
    from .sampler import McEstimate, sample_transition_batch
    if m not in (1, 2):
        raise DomainError("probe supports m in {1, 2}")
    d = DensityEval(e.family, quad=e.quad)
    ys = sample_transition_batch(d, s, t, x, n_paths, seed=seed,
                                 workers=workers)
    ref = h_map(e, e.T - s, x)
    hv = np.array([h_map(e, e.T - t, y) for y in ys])
    dist2 = np.sum((hv - ref) ** 2, axis=1)
    vals = dist2 ** m / (t - s) ** m
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return McEstimate(mean=mean, std_error=se, n=len(vals))


def eigen_sweep(e: HEval, t_grid=None, r_grid=None) -> dict:
    """Empirical sweep of both Jacobian eigenvalues; reports the maxima
    (the uniform bound is existential, so this is a report, not an assert)."""
    t_grid = np.asarray(t_grid if t_grid is not None
                        else np.linspace(0.1, e.T, 7), dtype=float)
    r_grid = np.asarray(r_grid if r_grid is not None
                        else np.geomspace(1e-3, 10.0, 25), dtype=float)
    lam_max = perp_max = -math.inf
    for t in t_grid:
        for r in r_grid:
            eig = jacobian_eigs(e, t, (r, 0.0))
            lam_max = max(lam_max, abs(eig.lambda_radial))
            perp_max = max(perp_max, abs(eig.lambda_tangential))
    return {"max_abs_lambda_radial": lam_max,
            "max_abs_lambda_tangential": perp_max,
            "finite": bool(np.isfinite(lam_max) and np.isfinite(perp_max))}
