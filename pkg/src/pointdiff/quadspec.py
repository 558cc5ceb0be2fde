"""Quadrature configuration, tagged scalar results, and the error taxonomy
shared by every numerical routine in the package.

All integrals in this package are evaluated with an explicit tolerance
budget.  Routines either return a value whose reported error estimate meets
``max(abs_tol, rel_tol * |value|)`` or raise :class:`ToleranceError`
carrying the best estimate obtained so far.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum


class PointDiffError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PointDiffError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class DivergenceError(PointDiffError, ArithmeticError):
    """The requested quantity is genuinely infinite (documented divergence)."""


class OriginSingularityError(PointDiffError, ArithmeticError):
    """Evaluation requested at the origin where the quantity is singular."""


class HypothesisViolationError(PointDiffError, RuntimeError):
    """An empirically checked regularity hypothesis failed (e.g. the radial
    map was found non-monotone on an inversion bracket)."""

    def __init__(self, message: str, bracket: tuple | None = None):
        super().__init__(message)
        self.bracket = bracket


class StuckPathError(PointDiffError, RuntimeError):
    """The adaptive SDE step controller could not advance a path."""

    def __init__(self, message: str, state=None, time=None):
        super().__init__(message)
        self.state = state
        self.time = time


class ToleranceError(PointDiffError, RuntimeError):
    """Quadrature failed to meet the requested tolerance.

    ``best`` is the best available value and ``err`` the associated error
    estimate, so callers may still proceed deliberately.
    """

    def __init__(self, message: str, best: float, err: float):
        super().__init__(f"{message} (best={best!r}, err={err!r})")
        self.best = best
        self.err = err


class EnvelopeError(PointDiffError, RuntimeError):
    """Rejection-sampler envelope violated even after a resweep."""


class ApproximateLimitWarning(UserWarning):
    """The returned value was obtained by extrapolating a radial limit."""


class EndpointRule(Enum):
    """How endpoint singularities of an integrand are to be treated."""

    NONE = "none"
    LOG_SUBSTITUTION = "log_substitution"
    EXP_TAIL = "exp_tail"


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and limits for adaptive quadrature.

    ``abs_tol + rel_tol`` must be positive; results are accepted only when
    the reported error estimate is below ``max(abs_tol, rel_tol * |value|)``.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    endpoint_rule: EndpointRule = EndpointRule.LOG_SUBSTITUTION

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be nonnegative")
        if self.abs_tol + self.rel_tol <= 0:
            raise DomainError("abs_tol + rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")

    def tolerance_for(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))

    def inner(self, factor: float = 0.1) -> "QuadratureSpec":
        """Tighter spec for the inner integral of a nested quadrature.

        The nested budget keeps the outer tolerance at least 10x the inner
        one so inner truncation error never dominates the outer estimate.
        """
        return replace(self, abs_tol=self.abs_tol * factor,
                       rel_tol=self.rel_tol * factor)

    def check(self, value: float, err: float, context: str) -> "SpecialValue":
        if not (err <= self.tolerance_for(value)):
            raise ToleranceError(f"{context}: quadrature did not converge",
                                 best=value, err=err)
        return SpecialValue(value, err)


@dataclass(frozen=True)
class SpecialValue:
    """A scalar together with an upper bound on its truncation error."""

    value: float
    err_estimate: float

    def __post_init__(self):
        if self.err_estimate < 0:
            raise DomainError("err_estimate must be nonnegative")

    def __float__(self) -> float:
        return self.value


DEFAULT_QUAD = QuadratureSpec()
