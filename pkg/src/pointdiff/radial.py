"""Shared radial-coordinate machinery: angular reductions of planar
integrals against Gaussians, adaptive log-grid spline caches, and a small
quadrature wrapper.

Every planar integrand in this package is of the form
``f(|y|) * g_t(x - y)`` or ``f(|y|) * unit-vector terms``, so the angular
integral is always one of

    int_0^2pi g_d(x - y) dphi          = (1/d) e^(-(a-rho)^2/2d) i0e(a rho / d)
    int_0^2pi g_d(x - y) cos(phi) dphi = (1/d) e^(-(a-rho)^2/2d) i1e(a rho / d)

with a = |x|, rho = |y| and phi the angle of y relative to x.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .quadspec import QuadratureSpec, ToleranceError


def gauss_angular(delta: float, a: float, rho):
    """Angular integral of the heat kernel, int_0^2pi g_delta(x - y) dphi."""
    rho = np.asarray(rho, dtype=float)
    d = a - rho
    return np.exp(-d * d / (2.0 * delta)) * special.i0e(a * rho / delta) / delta


def gauss_angular_cos(delta: float, a: float, rho):
    """Angular integral weighted by cos(phi), for first-moment reductions."""
    rho = np.asarray(rho, dtype=float)
    d = a - rho
    return np.exp(-d * d / (2.0 * delta)) * special.i1e(a * rho / delta) / delta


def quad_scaled(f, lo: float, hi: float, quad: QuadratureSpec,
                points=None, probes: int = 9, limit: int | None = None):
    """Adaptive quadrature with the absolute tolerance floored at the
    integrand's probed magnitude.

    Deep in Gaussian tails the integrand can sit hundreds of orders of
    magnitude below ``abs_tol``; without the floor, QUADPACK burns its full
    subdivision budget chasing roundoff.  The probe keeps the requested
    accuracy relative to the actual scale of the integral.
    """
    xs = np.linspace(lo, hi, probes + 2)[1:-1]
    fmax = max(abs(f(xi)) for xi in xs)
    epsabs = max(quad.abs_tol, fmax * (hi - lo) * quad.rel_tol * 0.02)
    kwargs = dict(epsabs=epsabs, epsrel=quad.rel_tol,
                  limit=limit or quad.max_subdivisions)
    if points is not None:
        kwargs["points"] = points
    import warnings as _warnings
    with np.errstate(over="ignore"), _warnings.catch_warnings():
        # tails probe far below the float floor; accuracy there is enforced
        # by the oracle tests, not by QUADPACK's roundoff heuristics
        _warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, lo, hi, **kwargs)
    return val, err


def quad_checked(f, lo: float, hi: float, quad: QuadratureSpec, context: str,
                 points=None):
    """scipy.integrate.quad with the package's tolerance contract."""
    kwargs = dict(epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                  limit=quad.max_subdivisions)
    if points is not None and np.isfinite(lo) and np.isfinite(hi):
        kwargs["points"] = points
    val, err = integrate.quad(f, lo, hi, **kwargs)
    if not (err <= quad.tolerance_for(val) * 50.0):
        # 50x slack: composite radial integrals sum several pieces whose
        # individual estimates are conservative
        raise ToleranceError(f"{context}: quadrature did not converge",
                             best=val, err=err)
    return val, err


class LogGridSpline:
    """Adaptive cubic spline of a positive-argument scalar function on a
    logarithmic grid, refined until midpoint interpolation error passes
    ``rel_tol`` (relative to the local scale ``abs_floor + |f|``).

    Instances are immutable after construction and therefore safe for
    concurrent reads.
    """

    def __init__(self, fn, r_lo: float, r_hi: float, rel_tol: float = 1e-7,
                 abs_floor: float = 0.0, n0: int = 65, max_depth: int = 6,
                 vectorized: bool = False):
        if not (0 < r_lo < r_hi):
            raise ValueError("need 0 < r_lo < r_hi")
        self.r_lo, self.r_hi = float(r_lo), float(r_hi)
        self._fn = fn
        call = fn if vectorized else (
            lambda r: np.array([fn(ri) for ri in np.atleast_1d(r)]))
        tau = np.linspace(math.log(r_lo), math.log(r_hi), n0)
        vals = np.asarray(call(np.exp(tau)), dtype=float)
        for _ in range(max_depth):
            spline = CubicSpline(tau, vals)
            mids = 0.5 * (tau[:-1] + tau[1:])
            ref = np.asarray(call(np.exp(mids)), dtype=float)
            err = np.abs(spline(mids) - ref)
            bad = err > rel_tol * (abs_floor + np.abs(ref))
            if not bad.any():
                break
            tau = np.concatenate([tau, mids[bad]])
            vals = np.concatenate([vals, ref[bad]])
            order = np.argsort(tau)
            tau, vals = tau[order], vals[order]
        self._spline = CubicSpline(tau, vals)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        inside = (r >= self.r_lo) & (r <= self.r_hi)
        out[inside] = self._spline(np.log(r[inside]))
        if (~inside).any():
            out[~inside] = [self._fn(ri) for ri in r[~inside]]
        return float(out[0]) if scalar else out
