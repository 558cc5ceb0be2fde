"""Planar point-interaction diffusions: the singular semigroup kernel, the
Doob-transformed transition laws of four driving families, survival and
hitting-time laws, the space-time harmonic map, and Monte Carlo samplers.
"""

from .doob import (DensityEval, HitLaw, conditional_density,
                   conditional_drift, hit_time_law, rn_derivative,
                   survival_probability, transition_density)
from .families import (CompositeFamily, DriftVector, FamilySpec, base_conv,
                       drift_eval, h_eval, parse_family, volterra_V)
from .hmap import (HEval, JacobianEigs, h_map, h_map_inverse, jacobian_eigs,
                   harmonicity_residual, moment_scaling_probe)
from .kernel import (KernelParams, full_kernel, gst_eigen_residual,
                     interaction_v, semigroup_residual)
from .quadspec import (DivergenceError, DomainError, HypothesisViolationError,
                       PointDiffError, QuadratureSpec, SpecialValue,
                       StuckPathError, ToleranceError)
from .sampler import (McEstimate, PathSample, sample_conditional_path,
                      sample_hit_time, sample_path_marginal,
                      sample_transition, submartingale_probe)
from .specfun import (bessel_k, exp_integral_E1, heat_kernel,
                      incomplete_bessel_k, renorm_E, volterra_nu,
                      volterra_nu_prime)

__version__ = "0.1.0"

__all__ = [
    "DensityEval", "HitLaw", "conditional_density", "conditional_drift",
    "hit_time_law", "rn_derivative", "survival_probability",
    "transition_density", "CompositeFamily", "DriftVector", "FamilySpec",
    "base_conv", "drift_eval", "h_eval", "parse_family", "volterra_V",
    "HEval", "JacobianEigs", "h_map", "h_map_inverse", "jacobian_eigs",
    "harmonicity_residual", "moment_scaling_probe", "KernelParams",
    "full_kernel", "gst_eigen_residual", "interaction_v",
    "semigroup_residual", "DivergenceError", "DomainError",
    "HypothesisViolationError", "PointDiffError", "QuadratureSpec",
    "SpecialValue", "StuckPathError", "ToleranceError", "McEstimate",
    "PathSample", "sample_conditional_path", "sample_hit_time",
    "sample_path_marginal", "sample_transition", "submartingale_probe",
    "bessel_k", "exp_integral_E1", "heat_kernel", "incomplete_bessel_k",
    "renorm_E", "volterra_nu", "volterra_nu_prime",
]
