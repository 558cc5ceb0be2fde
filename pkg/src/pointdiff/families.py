"""Driving families and their radial calculus.

Four named families are supported, all radially symmetric:

    gst          h_t(x) = e^(theta t) K_0(sqrt(2 theta) |x|)
    leb          h_t(x) = 1 + V_t(x),          V from a single time convolution
    dir:eps=e    h_t(x) = g_t(x) + V_t(x),     time kernel regularized below e
    gau:alpha=a  h_t(x) = g_(t+alpha)(x) + V_t(x)

with the Volterra-type kernels

    V_t(x)        = int_0^t gbar_u(|x|) k(t - u) du
    k_leb(w)      = 2 pi nu(theta w)
    k_dir_eps(w)  = int_eps^w theta nu'(theta (w-s)) / s ds   (0 for w <= eps)
    k_gau(w)      = int_0^w theta nu'(theta (w-s)) / (s + alpha) ds

The unregularized Dirac kernel diverges logarithmically at s = 0 (its
codomain genuinely includes +inf), so a positive cutoff is mandatory and
every Dirac-family quantity built from V is an eps-dependent diagnostic.
The nu' singularities inside k_dir/k_gau are removed exactly by
integration by parts against nu.

Positive linear combinations of families are supported through
:class:`CompositeFamily`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .quadspec import (DEFAULT_QUAD, DivergenceError, DomainError,
                       QuadratureSpec)
from .radial import LogGridSpline, quad_scaled
from .specfun import VolterraTable, heat_radial, inc_radial_log

__all__ = ["FamilySpec", "DriftVector", "CompositeFamily", "FamilyEvaluator",
           "parse_family", "family_label", "h_eval", "volterra_V",
           "drift_eval", "base_conv"]

_KINDS = ("gst", "leb", "dir", "gau")


def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


_GL160 = _gl(160)


class OriginDriftError(DomainError):
    """Drift evaluation exactly at the origin."""


@dataclass(frozen=True)
class FamilySpec:
    """Which driving family, plus coupling, horizon and quadrature budget."""

    kind: str
    theta: float
    horizon_T: float
    eps: float | None = None      # dir only
    alpha: float | None = None    # gau only
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.theta <= 0:
            raise DomainError("theta must be positive")
        if self.horizon_T <= 0:
            raise DomainError("horizon_T must be positive")
        if self.kind == "dir":
            if self.eps is None or not (0 < self.eps < self.horizon_T):
                raise DomainError("dir family needs cutoff eps in (0, T)")
        elif self.eps is not None:
            raise DomainError("eps is only meaningful for the dir family")
        if self.kind == "gau":
            if self.alpha is None or self.alpha <= 0:
                raise DomainError("gau family needs alpha > 0")
        elif self.alpha is not None:
            raise DomainError("alpha is only meaningful for the gau family")


def parse_family(text: str, theta: float, horizon_T: float,
                 quad: QuadratureSpec = DEFAULT_QUAD) -> FamilySpec:
    """Parse the CLI family grammar: gst | leb | dir:eps=<f> | gau:alpha=<f>."""
    head, _, rest = text.strip().lower().partition(":")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise DomainError(f"malformed family parameter {item!r}")
            kwargs[key.strip()] = float(val)
    if head == "gst" or head == "leb":
        if kwargs:
            raise DomainError(f"family {head!r} takes no parameters")
        return FamilySpec(head, theta, horizon_T, quad=quad)
    if head == "dir":
        if set(kwargs) != {"eps"}:
            raise DomainError("dir family requires exactly eps=<float>")
        return FamilySpec("dir", theta, horizon_T, eps=kwargs["eps"], quad=quad)
    if head == "gau":
        if set(kwargs) != {"alpha"}:
            raise DomainError("gau family requires exactly alpha=<float>")
        return FamilySpec("gau", theta, horizon_T, alpha=kwargs["alpha"],
                          quad=quad)
    raise DomainError(f"unknown family {text!r}")


def family_label(spec: FamilySpec) -> str:
    if spec.kind == "dir":
        return f"dir:eps={spec.eps:g}"
    if spec.kind == "gau":
        return f"gau:alpha={spec.alpha:g}"
    return spec.kind


@dataclass(frozen=True)
class DriftVector:
    """A radial vector field value: components = radial_part * x_hat."""

    components: tuple
    radial_part: float

    @staticmethod
    def radial(radial_part: float, x) -> "DriftVector":
        x = np.asarray(x, dtype=float)
        r = math.hypot(x[0], x[1])
        if r == 0.0:
            raise DomainError("radial drift direction undefined at the origin")
        return DriftVector((radial_part * x[0] / r, radial_part * x[1] / r),
                           radial_part)


# ---------------------------------------------------------------------------
# Evaluator with per-(t) radial caches
# ---------------------------------------------------------------------------

class FamilyEvaluator:
    """Scalar radial evaluator for one driving family.

    Exact methods integrate to the family's quadrature budget; the
    ``*_profile`` methods return validated log-grid splines for hot loops
    (samplers, planar quadratures).  Caches are keyed by rounded times and
    hold immutable splines, so concurrent reads are safe and duplicate
    concurrent builds are harmless.
    """

    def __init__(self, spec: FamilySpec):
        self.spec = spec
        self.theta = spec.theta
        b_max = max(spec.theta * spec.horizon_T * 1.05, 1e-6)
        self.volterra = VolterraTable(b_max)
        self._tk_spline = None
        self._gau_spl = None
        self._dir_spl = None
        self._profiles: dict = {}

    # -- time kernels -------------------------------------------------------

    def time_kernel(self, w: float) -> float:
        """The kernel k(w) multiplying gbar in V; exact quadrature."""
        kind = self.spec.kind
        th = self.theta
        if kind == "leb":
            return 2.0 * math.pi * float(self.volterra.nu(th * w)) if w > 0 else 0.0
        if kind == "dir":
            return self._nu_dir(w)
        if kind == "gau":
            return self._nu_gau(w)
        raise DomainError(f"family {kind!r} has no Volterra time kernel")

    def _nu_dir(self, w: float) -> float:
        eps = self.spec.eps
        th = self.theta
        if w <= eps:
            return 0.0
        upper = w - eps
        nu = self.volterra.nu

        def f(u):
            d = w - u
            return float(nu(th * u)) / (d * d)

        quad = self.spec.quad.inner()
        val, _ = quad_scaled(f, 0.0, upper, quad, limit=120)
        return float(nu(th * upper)) / eps - val

    def _nu_gau(self, w: float) -> float:
        if w <= 0:
            return 0.0
        alpha = self.spec.alpha
        th = self.theta
        nu = self.volterra.nu

        def f(u):
            d = w - u + alpha
            return float(nu(th * u)) / (d * d)

        quad = self.spec.quad.inner()
        val, _ = quad_scaled(f, 0.0, w, quad, limit=120)
        return float(nu(th * w)) / alpha - val

    def _time_kernel_cached(self):
        """Spline of the time kernel on (w_lo, T]; exact below the spline
        floor and at the Dirac kink."""
        if self._tk_spline is None:
            T = self.spec.horizon_T
            kind = self.spec.kind
            if kind == "leb":
                vt = self.volterra
                th = self.theta
                self._tk_spline = lambda w: 2.0 * math.pi * float(vt.nu(th * max(w, 0.0)))
            elif kind == "gau":
                self._gau_spl = LogGridSpline(self._nu_gau, T * 1e-10, T,
                                              rel_tol=1e-9, abs_floor=1e-12,
                                              n0=97)
                spl = self._gau_spl
                self._tk_spline = lambda w: float(spl(w)) if w > T * 1e-10 \
                    else self._nu_gau(w)
            else:  # dir: spline in w - eps to absorb the kink at eps
                eps = self.spec.eps
                span = T - eps
                self._dir_spl = LogGridSpline(lambda d: self._nu_dir(eps + d),
                                              span * 1e-10, span,
                                              rel_tol=1e-9, abs_floor=1e-12,
                                              n0=97)

                def tk(w, _spl=self._dir_spl, _eps=eps, _span=span):
                    d = w - _eps
                    if d <= _span * 1e-10:
                        return self._nu_dir(w)
                    return float(_spl(d))

                self._tk_spline = tk
        return self._tk_spline

    # -- V and its radial derivative -----------------------------------------

    def _tk_vec(self, w):
        """Vectorized time kernel on w > 0 (spline-backed for dir/gau).

        Below the spline floors the leading small-w asymptotics are used;
        the affected region carries a dw-measure of order 1e-10 T.
        """
        w = np.asarray(w, dtype=float)
        kind = self.spec.kind
        th = self.theta
        if kind == "leb":
            return 2.0 * math.pi * self.volterra.nu(np.maximum(th * w, 0.0))
        self._time_kernel_cached()
        T = self.spec.horizon_T
        if kind == "gau":
            floor = T * 1e-10
            out = np.zeros_like(w)
            big = w > floor
            small = (w > 0) & ~big
            if big.any():
                out[big] = self._gau_spl(w[big])
            if small.any():
                out[small] = self.volterra.nu(th * w[small]) / self.spec.alpha
            return out
        # dir
        eps = self.spec.eps
        d = w - eps
        span = T - eps
        out = np.zeros_like(w)
        small = (d > 0) & (d <= span * 1e-10)
        big = d > span * 1e-10
        if small.any():
            out[small] = self.volterra.nu(th * d[small]) / eps
        if big.any():
            out[big] = self._dir_spl(d[big])
        return out

    def _v_windows(self, t: float, r: float):
        """Integration windows for V: the u = t - w variable splits at
        t_eff/2 where t_eff removes the Dirac kernel's dead zone w <= eps,
        so both Gauss-Legendre windows see smooth integrands.

        Left window: u on a log grid (Gaussian shoulder at u ~ r^2).
        Right window: d = w - eps0 on a log grid (1/log rise of the time
        kernel at its support edge).
        """
        eps0 = self.spec.eps if self.spec.kind == "dir" else 0.0
        t_eff = t - eps0
        if t_eff <= 0:
            return None
        tau_hi = math.log(0.5 * t_eff)
        tau_lo = max(math.log(r * r / 1500.0), tau_hi - 46.0)
        q_hi = math.log(0.5 * t_eff)
        q_lo = math.log(t_eff) - 28.0
        return eps0, tau_lo, tau_hi, q_lo, q_hi

    def _v_quad(self, t: float, r: float, du_power: int) -> float:
        win = self._v_windows(t, r)
        if win is None:
            return 0.0
        eps0, tau_lo, tau_hi, q_lo, q_hi = win
        x, gw = _GL160
        u = np.exp(tau_lo + (tau_hi - tau_lo) * x)
        left = (tau_hi - tau_lo) * float(np.dot(
            gw, np.exp(-r * r / (2.0 * u)) * u ** (-du_power)
            * self._tk_vec(t - u)))
        d = np.exp(q_lo + (q_hi - q_lo) * x)
        uu = t - eps0 - d
        right = (q_hi - q_lo) * float(np.dot(
            gw, np.exp(-r * r / (2.0 * uu)) * uu ** (-1 - du_power)
            * self._tk_vec(eps0 + d) * d))
        return (left + right) / (2.0 * math.pi)

    def V(self, t: float, r: float) -> float:
        """Volterra-type kernel V_t at radius r (> 0); fixed-node GL on two
        smooth windows against the vectorized time kernel."""
        if t <= 0:
            return 0.0
        if r <= 0:
            raise DivergenceError("V diverges at the origin for t > 0")
        if r * r / (2.0 * t) > 700.0:
            return 0.0
        return self._v_quad(t, r, 0)

    def V_dr(self, t: float, r: float) -> float:
        """d/dr of V_t(r), differentiating under the integral sign."""
        if t <= 0:
            return 0.0
        if r <= 0:
            raise DivergenceError("V' undefined at the origin")
        if r * r / (2.0 * t) > 700.0:
            return 0.0
        return -r * self._v_quad(t, r, 1)

    # -- h, base convolution, drift ------------------------------------------

    def h(self, t: float, r: float) -> float:
        kind = self.spec.kind
        th = self.theta
        if r < 0:
            raise DomainError("radius must be nonnegative")
        if kind == "gst":
            if r == 0.0:
                return math.inf
            return math.exp(th * t) * float(special.k0(math.sqrt(2.0 * th) * r))
        if kind == "leb":
            if t == 0.0:
                return 1.0
            if r == 0.0:
                return math.inf
            return 1.0 + self.V(t, r)
        if kind == "dir":
            if t == 0.0:
                return math.inf if r == 0.0 else 0.0
            if r == 0.0:
                return math.inf
            return float(heat_radial(t, r)) + self.V(t, r)
        # gau
        if t == 0.0:
            return float(heat_radial(self.spec.alpha, r))
        if r == 0.0:
            return math.inf
        return float(heat_radial(self.spec.alpha + t, r)) + self.V(t, r)

    def base_conv(self, t: float, r: float) -> float:
        """(h_0 * g_t) at radius r; closed forms per family."""
        kind = self.spec.kind
        th = self.theta
        if kind == "leb":
            return 1.0
        if kind == "gst":
            if t == 0.0:
                return math.inf if r == 0.0 else \
                    float(special.k0(math.sqrt(2.0 * th) * r))
            return math.exp(th * t) * 0.5 * math.exp(
                float(inc_radial_log(0, th, t, np.asarray(r, dtype=float))))
        if kind == "dir":
            if t == 0.0:
                return math.inf if r == 0.0 else 0.0
            return float(heat_radial(t, r))
        return float(heat_radial(self.spec.alpha + t, r))

    def drift_radial(self, t: float, r: float) -> float:
        """Radial component of grad log h_t; negative (drift points inward)."""
        if r <= 0:
            raise DomainError("drift singular at the origin")
        kind = self.spec.kind
        th = self.theta
        if kind == "gst":
            z = math.sqrt(2.0 * th) * r
            return -math.sqrt(2.0 * th) * float(special.k1e(z) / special.k0e(z))
        if t <= 0:
            raise DomainError("drift of a measure family needs t > 0")
        if kind == "leb":
            return self.V_dr(t, r) / (1.0 + self.V(t, r))
        if kind == "dir":
            g = float(heat_radial(t, r))
            return (-(r / t) * g + self.V_dr(t, r)) / (g + self.V(t, r))
        s = self.spec.alpha + t
        g = float(heat_radial(s, r))
        return (-(r / s) * g + self.V_dr(t, r)) / (g + self.V(t, r))

    def conditional_drift_radial(self, t: float, r: float) -> float:
        """Radial component of grad log (h_0 * g_t)."""
        kind = self.spec.kind
        th = self.theta
        if kind == "leb":
            return 0.0
        if kind == "dir":
            if t <= 0:
                raise DomainError("bridge drift undefined at t = 0")
            return -r / t
        if kind == "gau":
            return -r / (self.spec.alpha + t)
        if t == 0.0:
            if r <= 0:
                raise DomainError("drift singular at the origin")
            z = math.sqrt(2.0 * th) * r
            return -math.sqrt(2.0 * th) * float(special.k1e(z) / special.k0e(z))
        rr = np.asarray(r, dtype=float)
        return float(-rr * np.exp(inc_radial_log(1, th, t, rr)
                                  - inc_radial_log(0, th, t, rr)))

    # -- cached radial profiles ----------------------------------------------

    def h_profile(self, t: float, r_lo: float, r_hi: float,
                  rel_tol: float = 1e-7):
        key = ("h", round(t, 14), round(r_lo, 14), round(r_hi, 14))
        prof = self._profiles.get(key)
        if prof is None:
            prof = LogGridSpline(lambda r: self.h(t, r), r_lo, r_hi,
                                 rel_tol=rel_tol, n0=97)
            self._profiles[key] = prof
        return prof

    def base_profile(self, t: float, r_lo: float, r_hi: float):
        key = ("base", round(t, 14), round(r_lo, 14), round(r_hi, 14))
        prof = self._profiles.get(key)
        if prof is None:
            kind = self.spec.kind
            if kind in ("leb", "dir", "gau"):
                fn = lambda r: self.base_conv(t, r)
                prof = np.vectorize(fn)
            else:
                prof = LogGridSpline(lambda r: self.base_conv(t, r), r_lo,
                                     r_hi, rel_tol=1e-9, n0=97)
            self._profiles[key] = prof
        return prof


_EVALUATORS: dict = {}


def get_evaluator(spec: FamilySpec) -> FamilyEvaluator:
    ev = _EVALUATORS.get(spec)
    if ev is None:
        ev = _EVALUATORS[spec] = FamilyEvaluator(spec)
    return ev


# ---------------------------------------------------------------------------
# Composite families (positive linear combinations)
# ---------------------------------------------------------------------------

class CompositeFamily:
    """Positive linear combination  sum_i  c_i * h^(i)  of named families.

    All members must share theta and horizon_T.  Evaluation is linear by
    construction: h, V and base_conv are coefficient-weighted sums and the
    drift is the h-weighted combination of member drifts.
    """

    kind = "composite"

    def __init__(self, members):
        members = [(float(c), spec) for c, spec in members]
        if not members or any(c <= 0 for c, _ in members):
            raise DomainError("composite needs strictly positive weights")
        thetas = {spec.theta for _, spec in members}
        horizons = {spec.horizon_T for _, spec in members}
        if len(thetas) != 1 or len(horizons) != 1:
            raise DomainError("composite members must share theta and T")
        self.members = members
        self.theta = thetas.pop()
        self.horizon_T = horizons.pop()
        self.quad = members[0][1].quad

    def h(self, t, x):
        return sum(c * h_eval(spec, t, x) for c, spec in self.members)

    def base_conv(self, t, x):
        return sum(c * base_conv(spec, t, x) for c, spec in self.members)

    def drift(self, t, x):
        num = np.zeros(2)
        den = 0.0
        for c, spec in self.members:
            hv = h_eval(spec, t, x)
            bv = drift_eval(spec, t, x)
            num += c * hv * np.asarray(bv.components)
            den += c * hv
        x = np.asarray(x, dtype=float)
        r = math.hypot(x[0], x[1])
        rad = float(num @ (x / r)) / den
        return DriftVector((num[0] / den, num[1] / den), rad)


# ---------------------------------------------------------------------------
# Module-level operations (spec surface)
# ---------------------------------------------------------------------------

def _radius(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.hypot(x[0], x[1]))


def _check_time(spec: FamilySpec, t: float, allow_zero: bool = True):
    if t < 0 or t > spec.horizon_T * (1 + 1e-12):
        raise DomainError(f"time {t} outside [0, T={spec.horizon_T}]")
    if not allow_zero and t == 0:
        raise DomainError("time must be positive")


def h_eval(spec, t: float, x) -> float:
    """Driving function h_t(x).  Returns +inf at the origin (t > 0): the
    blow-up is the family's defining feature, signalled by a typed IEEE
    infinity rather than an exception."""
    if isinstance(spec, CompositeFamily):
        return spec.h(t, x)
    _check_time(spec, t)
    return get_evaluator(spec).h(t, _radius(x))


def volterra_V(spec: FamilySpec, t: float, x) -> float:
    """Volterra-type kernel V_t(x) for the measure-driven families."""
    if spec.kind == "gst":
        raise DomainError("the ground-state family has no Volterra kernel")
    _check_time(spec, t, allow_zero=False)
    r = _radius(x)
    if r == 0.0:
        raise DivergenceError("V diverges at the origin")
    return get_evaluator(spec).V(t, r)


def drift_eval(spec, t: float, x) -> DriftVector:
    """Drift b_t(x) = grad log h_t(x); radial, pointing at the origin."""
    if isinstance(spec, CompositeFamily):
        return spec.drift(t, x)
    _check_time(spec, t)
    r = _radius(x)
    if r == 0.0:
        raise OriginDriftError("drift blows up at the origin")
    rad = get_evaluator(spec).drift_radial(t, r)
    return DriftVector.radial(rad, x)


def base_conv(spec, t: float, x) -> float:
    """(h_0 * g_t)(x): the spatial convolution of the initial profile with
    the heat kernel, in closed form for each family."""
    if isinstance(spec, CompositeFamily):
        return spec.base_conv(t, x)
    _check_time(spec, t)
    return get_evaluator(spec).base_conv(t, _radius(x))
