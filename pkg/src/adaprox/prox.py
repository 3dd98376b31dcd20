"""Closed-form proximal operators, the gradient-mapping residual, and the
subgradient implied by a prox-gradient step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CompositeProblem, ProxTerm, UsageError, Vector, as_point


@dataclass(frozen=True)
class Zero:
    """h == 0."""


@dataclass(frozen=True)
class L1:
    """h(x) = weight * ||x||_1."""

    weight: float

    def __post_init__(self):
        if not self.weight > 0.0:
            raise UsageError(f"L1 weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class NonnegIndicator:
    """Indicator of the nonnegative orthant."""


@dataclass(frozen=True, eq=False)
class BoxIndicator:
    """Indicator of the box [lo, hi]; a coordinate with lo_i == hi_i is pinned."""

    lo: Vector
    hi: Vector

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi)
        if lo.shape != hi.shape:
            raise UsageError("box bounds must share a shape")
        if np.any(lo > hi):
            raise UsageError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class L2Squared:
    """h(x) = (weight / 2) * ||x||^2."""

    weight: float

    def __post_init__(self):
        if not self.weight > 0.0:
            raise UsageError(f"L2Squared weight must be positive, got {self.weight}")


ProxKind = Zero | L1 | NonnegIndicator | BoxIndicator | L2Squared


def prox_apply(kind: ProxKind, x: Vector, t: float) -> Vector:
    """Exact minimizer of h(y) + ||y - x||^2 / (2t) for the supported kinds.

    Soft-threshold ties (|x_i| equal to the threshold) output 0; the closed
    form is continuous there.
    """
    if not t > 0.0:
        raise UsageError(f"prox step length must be positive, got {t}")
    x = as_point(x)
    if isinstance(kind, Zero):
        return x.copy()
    if isinstance(kind, L1):
        thresh = t * kind.weight
        return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)
    if isinstance(kind, NonnegIndicator):
        return np.maximum(x, 0.0)
    if isinstance(kind, BoxIndicator):
        if x.shape != kind.lo.shape:
            raise UsageError("box dimension mismatch")
        return np.clip(x, kind.lo, kind.hi)
    if isinstance(kind, L2Squared):
        return x / (1.0 + t * kind.weight)
    raise UsageError(f"unsupported prox kind: {kind!r}")


def prox_value(kind: ProxKind, x: Vector) -> float:
    """h(x) for the supported kinds; +inf outside an indicator's domain."""
    x = as_point(x)
    if isinstance(kind, Zero):
        return 0.0
    if isinstance(kind, L1):
        return kind.weight * float(np.sum(np.abs(x)))
    if isinstance(kind, NonnegIndicator):
        return 0.0 if np.all(x >= 0.0) else np.inf
    if isinstance(kind, BoxIndicator):
        ok = np.all(x >= kind.lo) and np.all(x <= kind.hi)
        return 0.0 if ok else np.inf
    if isinstance(kind, L2Squared):
        return 0.5 * kind.weight * float(np.dot(x, x))
    raise UsageError(f"unsupported prox kind: {kind!r}")


def make_prox_term(kind: ProxKind) -> ProxTerm:
    return ProxTerm(
        value=lambda x, _k=kind: prox_value(_k, x),
        prox=lambda x, t, _k=kind: prox_apply(_k, x, t),
    )


def gradient_mapping(problem: CompositeProblem, x: Vector, eta: float) -> Vector:
    """G_eta(x) = (x - prox_{eta h}(x - eta grad f(x))) / eta.

    Equals grad f(x) when h == 0. Uses raw oracles: a diagnostic evaluation,
    not part of a solver run's counted work.
    """
    if not eta > 0.0:
        raise UsageError(f"eta must be positive, got {eta}")
    x = as_point(x)
    problem.check_point(x)
    g = problem.smooth.gradient(x)
    y = problem.nonsmooth.prox(x - eta * g, eta)
    return (x - y) / eta


def implied_subgradient(x_k: Vector, x_next: Vector, grad_k: Vector, lambda_k: float) -> Vector:
    """h'(x_next) = (x_k - x_next)/lambda_k - grad_k.

    Valid subgradient of h at x_next provided x_next was produced by the prox
    step with the same lambda_k.
    """
    if not lambda_k > 0.0:
        raise UsageError(f"lambda_k must be positive, got {lambda_k}")
    return (as_point(x_k) - as_point(x_next)) / lambda_k - as_point(grad_k)
