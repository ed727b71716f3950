"""Deterministic quadrature, bracketed root finding, and scalar maximization.

Every reduction in this module uses a fixed, thread-independent summation
(compensated ascending-index accumulation), so repeated runs produce
bit-identical results regardless of BLAS thread counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Bracket",
    "BracketError",
    "ConvergenceError",
    "EvaluationError",
    "QuadratureRule",
    "composite_gauss_legendre",
    "find_root",
    "gauss_legendre",
    "integrate",
    "maximize_scalar",
]


class EvaluationError(ValueError):
    """A target function returned a non-finite value."""


class BracketError(ValueError):
    """The supplied bracket does not enclose a root."""


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted. Carries the best iterate found."""

    def __init__(self, message: str, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for integration over the interval [lo, hi]."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    lo: float
    hi: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if self.order < 1:
            raise ValueError("order must be positive")
        if not (self.lo < self.hi):
            raise ValueError("need lo < hi")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] <= self.lo or nodes[-1] >= self.hi:
            raise ValueError("nodes must lie strictly inside (lo, hi)")
        if np.any(weights <= 0):
            raise ValueError("weights must all be positive")
        length = self.hi - self.lo
        if abs(math.fsum(weights) - length) > 1e-12 * length:
            raise ValueError("weights must sum to the interval length")


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError("need lo < hi")


def gauss_legendre(lo: float, hi: float, order: int) -> QuadratureRule:
    """Gauss-Legendre rule with `order` nodes mapped onto [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    return QuadratureRule(
        nodes=half * x + 0.5 * (hi + lo),
        weights=half * w,
        order=order,
        lo=lo,
        hi=hi,
    )


def composite_gauss_legendre(lo: float, hi: float, order: int, panels: int) -> QuadratureRule:
    """Panel-wise Gauss-Legendre rule; doubling `panels` is the refinement knob."""
    if panels < 1:
        raise ValueError("panels must be >= 1")
    edges = np.linspace(lo, hi, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sub = gauss_legendre(a, b, order)
        nodes.append(sub.nodes)
        weights.append(sub.weights)
    return QuadratureRule(
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        order=order * panels,
        lo=lo,
        hi=hi,
    )


def _evaluate_on_nodes(integrand: Callable[[float], float], rule: QuadratureRule) -> np.ndarray:
    try:
        values = np.asarray(integrand(rule.nodes), dtype=float)
        if values.shape != rule.nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        values = np.array([float(integrand(x)) for x in rule.nodes])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        j = int(bad[0])
        raise EvaluationError(
            f"integrand is not finite at node {j} (x = {rule.nodes[j]!r})"
        )
    return values


def integrate(integrand: Callable[[float], float], rule: QuadratureRule) -> float:
    """Return sum_i w_i * integrand(x_i), accumulated in ascending node order."""
    values = _evaluate_on_nodes(integrand, rule)
    return math.fsum(rule.weights * values)


def find_root(
    g: Callable[[float], float],
    bracket: Bracket,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Bracketed secant/bisection hybrid (Illinois variant).

    Stops when |g(x)| <= tol or the bracket width falls below tol; the
    bisection fallback guarantees convergence for any sign-changing g.
    """
    a, b = bracket.lo, bracket.hi
    fa, fb = float(g(a)), float(g(b))
    for x, fx in ((a, fa), (b, fb)):
        if not math.isfinite(fx):
            raise EvaluationError(f"g is not finite at {x!r}")
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise BracketError(f"no sign change on [{a!r}, {b!r}]: g={fa!r}, {fb!r}")

    side = 0
    x = 0.5 * (a + b)
    for _ in range(max_iter):
        if fb != fa:
            x = b - fb * (b - a) / (fb - fa)
        if not (a < x < b):
            x = 0.5 * (a + b)
        fx = float(g(x))
        if not math.isfinite(fx):
            raise EvaluationError(f"g is not finite at {x!r}")
        if abs(fx) <= tol or (b - a) <= tol:
            return x
        if fa * fx < 0.0:
            b, fb = x, fx
            if side == -1:
                fa *= 0.5  # Illinois: damp the stale endpoint
            side = -1
        else:
            a, fa = x, fx
            if side == +1:
                fb *= 0.5
            side = +1
    raise ConvergenceError(
        f"root not located to tol={tol!r} in {max_iter} iterations", best=x
    )


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def maximize_scalar(
    g: Callable[[float], float],
    bracket: Bracket,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[float, float]:
    """Golden-section maximization of a unimodal g; returns (argmax, max).

    Comparison-based search cannot place the argmax more accurately than
    about sqrt(machine eps / |g''|), whatever tol is; the maximum value
    itself is flat to second order and so is machine-accurate.
    """

    def checked(x: float) -> float:
        v = float(g(x))
        if not math.isfinite(v):
            raise EvaluationError(f"g is not finite at {x!r}")
        return v

    a, b = bracket.lo, bracket.hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = checked(c), checked(d)
    for _ in range(max_iter):
        if (b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = checked(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = checked(d)
    xm = 0.5 * (a + b)
    return xm, checked(xm)
