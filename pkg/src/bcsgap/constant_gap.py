"""Scalar gap solvers for a constant coupling.

For a constant coupling u the gap depends on temperature only: Delta(T)
solves 1 = u * int_I tanh(sqrt(xi^2 + Delta^2)/2T) / sqrt(xi^2 + Delta^2) dxi,
and tau(u) is the temperature where the gap vanishes. These scalar curves
bound the function-valued problem from below (u = U_min) and above
(u = U_max).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Bracket, QuadratureRule, find_root, gauss_legendre

__all__ = ["ConstantGapCurve", "NoSolutionError", "delta_const", "gap_curve", "tau"]

# Order for the module's internal quadrature; the integrands are analytic on
# I so Gauss-Legendre converges spectrally and 256 nodes reach ~1e-14.
DEFAULT_ORDER = 256

# Below this fraction of the Debye energy the tanh factor is within 1 ulp of
# its T -> 0 limit; use the limit form to avoid dividing by 2T.
_ZERO_T_FRACTION = 1e-8


class NoSolutionError(ValueError):
    """The coupling is too weak for the gap to open at any temperature."""


def _default_rule(model) -> QuadratureRule:
    return gauss_legendre(model.epsilon, model.debye, DEFAULT_ORDER)


def _tanh_over_xi_sum(coupling: float, T: float, rule: QuadratureRule) -> float:
    x, w = rule.nodes, rule.weights
    return coupling * float(np.sum(w * np.tanh(x / (2.0 * T)) / x))


def tau(coupling: float, model, rule: QuadratureRule | None = None) -> float:
    """Temperature at which the constant-coupling gap closes.

    Solves 1 = u * int_I tanh(xi/2 tau)/xi dxi. Raises NoSolutionError if
    even the T -> 0 limit of the left side stays below 1.
    """
    if coupling <= 0:
        raise ValueError("coupling must be positive")
    rule = rule or _default_rule(model)
    x, w = rule.nodes, rule.weights
    sup = coupling * float(np.sum(w / x))
    if sup < 1.0:
        raise NoSolutionError(
            f"coupling {coupling!r} too weak: u * int dxi/xi = {sup!r} < 1"
        )

    def g(t: float) -> float:
        return _tanh_over_xi_sum(coupling, t, rule) - 1.0

    lo = model.debye * 1e-6
    while g(lo) <= 0.0:
        lo *= 0.5
        if lo < model.debye * 1e-300:
            raise NoSolutionError("no positive solution for tau")
    hi = model.debye
    while g(hi) >= 0.0:
        hi *= 2.0
    return find_root(g, Bracket(lo, hi), tol=1e-14)


def delta_const(
    coupling: float,
    T: float,
    model,
    rule: QuadratureRule | None = None,
    tau_value: float | None = None,
) -> float:
    """Gap value Delta(T) for a constant coupling; exactly 0 for T >= tau."""
    if T < 0:
        raise ValueError("temperature must be nonnegative")
    rule = rule or _default_rule(model)
    t_vanish = tau(coupling, model, rule) if tau_value is None else tau_value
    if T >= t_vanish:
        return 0.0
    x, w = rule.nodes, rule.weights
    zero_t = T < _ZERO_T_FRACTION * model.debye

    def g(d: float) -> float:
        E = np.sqrt(x * x + d * d)
        th = 1.0 if zero_t else np.tanh(E / (2.0 * T))
        return coupling * float(np.sum(w * th / E)) - 1.0

    # Within rounding of tau the sign of g(0) is noise; the gap there is
    # indistinguishable from zero.
    if g(0.0) <= 0.0:
        return 0.0
    # At d_hi the integral is at most |I|/d_hi = 1/(2u), so g(d_hi) < 0:
    # the bracket is guaranteed to change sign.
    d_hi = 2.0 * coupling * (model.debye - model.epsilon)
    return find_root(g, Bracket(0.0, d_hi), tol=1e-15)


@dataclass(frozen=True)
class ConstantGapCurve:
    """Sampled gap curve for one constant coupling."""

    coupling: float
    tau: float
    temperatures: np.ndarray
    gaps: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=float)
        d = np.asarray(self.gaps, dtype=float)
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "gaps", d)
        if t.shape != d.shape or t.ndim != 1:
            raise ValueError("temperatures and gaps must be matching 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("temperatures must be strictly ascending")
        below = t < self.tau
        if np.any(d[~below] != 0.0):
            raise ValueError("gap must vanish at and above tau")
        if np.any(np.diff(d[below]) >= 0):
            raise ValueError("gap must decrease strictly below tau")


def gap_curve(coupling: float, t_grid, model, rule: QuadratureRule | None = None) -> ConstantGapCurve:
    """Evaluate the constant-coupling gap on an ascending temperature grid."""
    rule = rule or _default_rule(model)
    t_grid = np.asarray(t_grid, dtype=float)
    t_vanish = tau(coupling, model, rule)
    gaps = np.array(
        [delta_const(coupling, t, model, rule, tau_value=t_vanish) for t in t_grid]
    )
    return ConstantGapCurve(coupling=coupling, tau=t_vanish, temperatures=t_grid, gaps=gaps)
