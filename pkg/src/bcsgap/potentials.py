"""Interaction kernels U(x, xi) on I^2 and the admissibility checks that
gate the solver.

A kernel is admissible when it is positive and bounded, U_min <= U <= U_max,
with ratio bound a = (U_max/U_min)^2. The smallness check asks that
a^(1/4) * max_x int_I U(x, xi)/xi * tanh(xi/2T) dxi stay at or below 1; the
temperature map T -> that integral is strictly decreasing, so certifying it
at the lowest working temperature certifies the whole range above.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constant_gap import delta_const, tau
from .numerics import Bracket, QuadratureRule, find_root, gauss_legendre, integrate, maximize_scalar

__all__ = [
    "HypothesisError",
    "HypothesisReport",
    "ModelParams",
    "Potential",
    "check_smallness",
    "compute_t0",
    "constant_potential",
    "load_table_csv",
    "polynomial_potential",
    "potential_from_callable",
    "scan_bounds",
    "separable_potential",
    "slope_bound",
    "table_potential",
]

# Boltzmann constant is fixed to 1 throughout; temperatures share energy units.
K_BOLTZMANN = 1.0

_SMALLNESS_RULE_ORDER = 256


class HypothesisError(ValueError):
    """The potential violates an admissibility hypothesis."""


@dataclass(frozen=True)
class ModelParams:
    """Energy window I = [epsilon, debye] for the gap equation."""

    epsilon: float
    debye: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < self.debye):
            raise ValueError("need 0 < epsilon < debye")


@dataclass(frozen=True)
class Potential:
    """A positive kernel on I^2 together with its derived bounds.

    `evaluate` must broadcast: evaluate(x[:, None], xi[None, :]) returns the
    kernel matrix. u_min/u_max are extracted by a product-grid scan with
    local refinement; ratio_bound = (u_max/u_min)^2 >= 1 controls how much
    admissible fields may vary in x.
    """

    kind: str
    params: dict
    u_min: float
    u_max: float
    ratio_bound: float
    smooth: bool
    evaluate: Callable = field(repr=False)

    def matrix(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.asarray(self.evaluate(x[:, None], xi[None, :]), dtype=float)
        return np.broadcast_to(out, (x.size, xi.size)).copy()


def scan_bounds(
    func: Callable,
    model: ModelParams,
    grid_points: int = 257,
    refine_points: int = 65,
) -> tuple[float, float]:
    """Extremal kernel values over I^2 from a product-grid scan.

    A coarse scan locates the extremal cells; one nested local refinement
    pass (two zoom levels) recovers smooth interior extrema to ~1e-8.
    Raises HypothesisError when the minimum is not strictly positive.
    """

    def values_on(xg: np.ndarray, yg: np.ndarray) -> np.ndarray:
        return np.asarray(func(xg[:, None], yg[None, :]), dtype=float)

    def refine(xg, yg, vals, pick) -> float:
        i, j = np.unravel_index(pick(vals), vals.shape)
        best = vals[i, j]
        for _ in range(2):
            x_lo = xg[max(i - 1, 0)]
            x_hi = xg[min(i + 1, xg.size - 1)]
            y_lo = yg[max(j - 1, 0)]
            y_hi = yg[min(j + 1, yg.size - 1)]
            xg = np.linspace(x_lo, x_hi, refine_points)
            yg = np.linspace(y_lo, y_hi, refine_points)
            vals = values_on(xg, yg)
            i, j = np.unravel_index(pick(vals), vals.shape)
            best = vals[i, j]
        return float(best)

    xg = np.linspace(model.epsilon, model.debye, grid_points)
    vals = values_on(xg, xg)
    if not np.all(np.isfinite(vals)):
        raise HypothesisError("kernel is not finite on I^2")
    u_min = refine(xg, xg, vals, np.argmin)
    u_max = refine(xg, xg, vals, np.argmax)
    if u_min <= 0.0:
        raise HypothesisError(f"kernel minimum {u_min!r} is not positive")
    return u_min, u_max


def _build(kind, params, func, model, smooth, grid_points=257) -> Potential:
    u_min, u_max = scan_bounds(func, model, grid_points=grid_points)
    return Potential(
        kind=kind,
        params=params,
        u_min=u_min,
        u_max=u_max,
        ratio_bound=(u_max / u_min) ** 2,
        smooth=smooth,
        evaluate=func,
    )


def constant_potential(value: float, model: ModelParams) -> Potential:
    if value <= 0:
        raise HypothesisError("constant kernel must be positive")

    def func(x, xi):
        return np.full(np.broadcast(x, xi).shape, float(value))

    return _build("constant", {"value": float(value)}, func, model, smooth=True)


def separable_potential(coeffs, model: ModelParams) -> Potential:
    """U(x, xi) = h(x) h(xi) for a polynomial factor h."""
    c = [float(v) for v in coeffs]

    def h(z):
        return np.polynomial.polynomial.polyval(z, c)

    def func(x, xi):
        return h(x) * h(xi)

    return _build("separable", {"coeffs": c}, func, model, smooth=True)


def polynomial_potential(coeffs2d, model: ModelParams) -> Potential:
    """U(x, xi) = sum_mn c[m][n] x^m xi^n."""
    c = np.asarray(coeffs2d, dtype=float)

    def func(x, xi):
        return np.polynomial.polynomial.polyval2d(
            *np.broadcast_arrays(x, xi), c
        )

    return _build("polynomial", {"coeffs2d": c.tolist()}, func, model, smooth=True)


def table_potential(x_grid, xi_grid, values, model: ModelParams) -> Potential:
    """Bilinear interpolation of tabulated kernel values on a rectilinear grid."""
    xg = np.asarray(x_grid, dtype=float)
    yg = np.asarray(xi_grid, dtype=float)
    vv = np.asarray(values, dtype=float)
    if vv.shape != (xg.size, yg.size):
        raise ValueError("table shape must be (len(x_grid), len(xi_grid))")
    if np.any(np.diff(xg) <= 0) or np.any(np.diff(yg) <= 0):
        raise ValueError("table grids must be strictly ascending")

    def func(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        i = np.clip(np.searchsorted(xg, x) - 1, 0, xg.size - 2)
        j = np.clip(np.searchsorted(yg, xi) - 1, 0, yg.size - 2)
        tx = np.clip((x - xg[i]) / (xg[i + 1] - xg[i]), 0.0, 1.0)
        ty = np.clip((xi - yg[j]) / (yg[j + 1] - yg[j]), 0.0, 1.0)
        return (
            vv[i, j] * (1 - tx) * (1 - ty)
            + vv[i + 1, j] * tx * (1 - ty)
            + vv[i, j + 1] * (1 - tx) * ty
            + vv[i + 1, j + 1] * tx * ty
        )

    pot = _build("table", {"shape": list(vv.shape)}, func, model, smooth=False)
    return pot


def load_table_csv(path, model: ModelParams) -> Potential:
    """Read (x, xi, U) triples on a rectilinear grid from a CSV file."""
    xs, ys, us = [], [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            x, y, u = (float(v) for v in row[:3])
            xs.append(x)
            ys.append(y)
            us.append(u)
    xg = np.unique(xs)
    yg = np.unique(ys)
    if xg.size * yg.size != len(us):
        raise ValueError("table CSV is not a full rectilinear grid")
    vals = np.full((xg.size, yg.size), np.nan)
    for x, y, u in zip(xs, ys, us):
        vals[np.searchsorted(xg, x), np.searchsorted(yg, y)] = u
    if np.any(np.isnan(vals)):
        raise ValueError("table CSV has duplicate or missing grid entries")
    return table_potential(xg, yg, vals, model)


def potential_from_callable(
    func: Callable,
    model: ModelParams,
    kind: str = "callable",
    smooth: bool = False,
    params: dict | None = None,
) -> Potential:
    return _build(kind, params or {}, func, model, smooth=smooth)


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the admissibility and smallness checks."""

    u_min: float
    u_max: float
    ratio_bound: float
    t0: float
    margin: float
    smoothness: str  # "guaranteed" for closed-form kinds, "unchecked" for tables
    passed: bool

    def as_dict(self) -> dict:
        return {
            "u_min": self.u_min,
            "u_max": self.u_max,
            "ratio_bound": self.ratio_bound,
            "t0": self.t0,
            "margin": self.margin,
            "smoothness": self.smoothness,
            "passed": self.passed,
        }


def _smallness_rule(model: ModelParams, rule: QuadratureRule | None) -> QuadratureRule:
    return rule or gauss_legendre(model.epsilon, model.debye, _SMALLNESS_RULE_ORDER)


def kernel_row_values(
    potential: Potential,
    T: float,
    model: ModelParams,
    x_points: int = 129,
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """int_I U(x, xi)/xi * tanh(xi/2T) dxi on an x grid of given size."""
    rule = _smallness_rule(model, rule)
    xg = np.linspace(model.epsilon, model.debye, x_points)
    u = potential.matrix(xg, rule.nodes)
    k = rule.weights * np.tanh(rule.nodes / (2.0 * T)) / rule.nodes
    return np.einsum("ij,j->i", u, k, optimize=False)


def smallness_margin(
    potential: Potential,
    T: float,
    model: ModelParams,
    x_points: int = 129,
    rule: QuadratureRule | None = None,
) -> float:
    vals = kernel_row_values(potential, T, model, x_points, rule)
    return 1.0 - potential.ratio_bound**0.25 * float(np.max(vals))


def check_smallness(
    potential: Potential,
    t0: float,
    model: ModelParams,
    x_points: int = 129,
    rule: QuadratureRule | None = None,
    tc: float | None = None,
    full_scan: bool = False,
    t_points: int = 65,
) -> HypothesisReport:
    """Evaluate the kernel smallness condition at the working floor t0.

    The margin is 1 minus a^(1/4) times the largest kernel row integral.
    Because tanh(xi/2T)/xi decreases strictly in T, the maximum over the
    working rectangle is attained at the lowest temperature, so evaluating
    at t0 suffices; `full_scan=True` (with `tc`) verifies that by scanning
    temperatures up to tc as well.
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    margin = smallness_margin(potential, t0, model, x_points, rule)
    if full_scan:
        if tc is None:
            raise ValueError("full_scan requires tc")
        for t in np.linspace(t0, max(tc, t0), t_points):
            margin = min(margin, smallness_margin(potential, t, model, x_points, rule))
    return HypothesisReport(
        u_min=potential.u_min,
        u_max=potential.u_max,
        ratio_bound=potential.ratio_bound,
        t0=t0,
        margin=margin,
        smoothness="guaranteed" if potential.smooth else "unchecked",
        passed=bool(margin >= 0.0 and potential.u_min > 0.0),
    )


def compute_t0(
    potential: Potential,
    model: ModelParams,
    safety: float = 1.0,
    x_points: int = 129,
    rule: QuadratureRule | None = None,
    tc: float | None = None,
    require_below_tc: bool = False,
) -> float:
    """Lowest temperature at which the smallness margin is nonnegative.

    The margin is strictly increasing in T, so a single bracketed root
    locates the onset; the result is multiplied by `safety` (>= 1) and kept
    strictly above tau(u_min). For a non-constant kernel the onset sits at
    or above the transition temperature (the row maximum exceeds the unit
    spectral radius there), which is why `require_below_tc` defaults to
    False; set it to True to insist on the stricter reading and fail when
    no temperature below `tc` qualifies.
    """
    if safety < 1.0:
        raise ValueError("safety must be >= 1")
    rule = _smallness_rule(model, rule)
    tau1 = tau(potential.u_min, model, rule)

    def g(t: float) -> float:
        return smallness_margin(potential, t, model, x_points, rule)

    lo = tau1 * 0.5
    while g(lo) >= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            break
    hi = tau(potential.u_max, model, rule)
    while g(hi) <= 0.0:
        hi *= 2.0
    onset = find_root(g, Bracket(lo, hi), tol=1e-14)
    if require_below_tc:
        if tc is None:
            raise ValueError("require_below_tc needs tc")
        if onset >= tc:
            best = g(tc)
            raise HypothesisError(
                f"smallness condition holds at no temperature below tc={tc!r}; "
                f"best margin there is {best!r}"
            )
    t0 = max(onset * safety, tau1 * (1.0 + 1e-12))
    return t0


def slope_bound(
    potential: Potential,
    model: ModelParams,
    tc: float,
    delta2_at_zero: float,
    rule: QuadratureRule | None = None,
) -> float:
    """Uniform bound M on -df/dT over the admissible set.

    M = 4 a U_max (max_z z/cosh z)^2 /
        [ eps U_min (tanh w - w sech^2 w) int_I dxi/(xi^2 + D^2)^(3/2) ],
    with w = eps/(2 tc) and D the upper gap at zero temperature.
    """
    rule = _smallness_rule(model, rule)
    _, peak = maximize_scalar(lambda z: z / math.cosh(z), Bracket(0.0, 3.0), tol=1e-12)
    w = model.epsilon / (2.0 * tc)
    shape_factor = math.tanh(w) - w / math.cosh(w) ** 2
    d2 = delta2_at_zero * delta2_at_zero
    kernel_integral = integrate(lambda x: (x * x + d2) ** -1.5, rule)
    value = (4.0 * potential.ratio_bound * potential.u_max * peak * peak) / (
        model.epsilon * potential.u_min * shape_factor * kernel_integral
    )
    if not (value > 0.0):
        raise ValueError("slope bound must be positive")
    return value


def hypothesis_report(
    potential: Potential,
    model: ModelParams,
    safety: float = 1.0,
    x_points: int = 129,
    rule: QuadratureRule | None = None,
) -> HypothesisReport:
    """Convenience: compute the working floor, then check smallness there."""
    t0 = compute_t0(potential, model, safety=safety, x_points=x_points, rule=rule)
    return check_smallness(potential, t0, model, x_points=x_points, rule=rule)


def constant_gap_identity(
    coupling: float,
    T: float,
    model: ModelParams,
    rule: QuadratureRule | None = None,
) -> float:
    """u * int_I tanh(sqrt(xi^2+D^2)/2T)/sqrt(xi^2+D^2) dxi on the gap curve.

    For a constant kernel this equals 1 at every T <= tau(u) (and a = 1, so
    the a^(1/4)-weighted version is also 1): the constant case satisfies the
    operator bounds through this identity rather than through the smallness
    margin, which is only nonnegative above tau.
    """
    rule = rule or gauss_legendre(model.epsilon, model.debye, _SMALLNESS_RULE_ORDER)
    d = delta_const(coupling, T, model, rule)
    x, w = rule.nodes, rule.weights
    E = np.sqrt(x * x + d * d)
    return coupling * float(np.sum(w * np.tanh(E / (2.0 * T)) / E))
