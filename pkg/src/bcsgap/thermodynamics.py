"""Transition temperature, thermodynamic potential difference, and the
second-order transition verdict.

The transition temperature is the point where the linearized kernel
L_T g(x) = int_I U(x, xi)/xi tanh(xi/2T) g(xi) dxi reaches unit spectral
radius; for constant and rank-one kernels this reduces exactly to the
scalar vanishing-temperature relation. The grand-potential difference uses
the standard mean-field form with the squared gap substituted through the
gap identity, which vanishes identically in the normal state and
reproduces the textbook weak-coupling specific-heat jump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constant_gap import tau
from .gap_operator import GapField, evaluate_at, solve_row
from .numerics import Bracket, QuadratureRule, find_root, gauss_legendre
from .potentials import ModelParams, Potential

__all__ = [
    "DegenerateFitError",
    "NearTcFit",
    "NoTransitionError",
    "ThermoCurve",
    "critical_temperature",
    "near_tc_fit",
    "normal_specific_heat",
    "omega_difference",
    "spectral_radius",
    "sqrt_exponent",
    "thermo_curves",
    "write_thermo_csv",
]


class NoTransitionError(ValueError):
    """The kernel stays subcritical down to the zero-temperature proxy."""


class DegenerateFitError(ValueError):
    """The near-tc fit window contains no usable rows."""


def spectral_radius(
    potential: Potential,
    T: float,
    model: ModelParams,
    rule: QuadratureRule,
    tol: float = 1e-14,
    max_iters: int = 20000,
) -> float:
    """Largest eigenvalue of the quadrature-discretized linear kernel.

    The kernel matrix is strictly positive, so power iteration from a
    uniform start converges to the principal eigenvalue.
    """
    xs, ws = rule.nodes, rule.weights
    kern = potential.matrix(xs, xs) * (ws * np.tanh(xs / (2.0 * T)) / xs)[None, :]
    v = np.ones(xs.size)
    rho = 0.0
    for _ in range(max_iters):
        v_new = np.einsum("ij,j->i", kern, v, optimize=False)
        rho_new = float(np.max(v_new))
        v = v_new / rho_new
        if abs(rho_new - rho) <= tol * rho_new:
            return rho_new
        rho = rho_new
    return rho


def critical_temperature(
    potential: Potential,
    model: ModelParams,
    rule: QuadratureRule | None = None,
    tol: float = 1e-12,
) -> float:
    """Temperature where the linearized kernel has unit spectral radius.

    rho(L_T) decreases strictly in T, so the root is bisected inside the
    bracket [tau(U_min), tau(U_max)]. Raises NoTransitionError when the
    kernel is already subcritical at the zero-temperature proxy
    T = 1e-6 * debye.
    """
    rule = rule or gauss_legendre(model.epsilon, model.debye, 64)
    t_proxy = 1e-6 * model.debye
    if spectral_radius(potential, t_proxy, model, rule) < 1.0:
        raise NoTransitionError(
            "spectral radius below 1 at the zero-temperature proxy: no transition"
        )
    lo = tau(potential.u_min, model, rule) * (1.0 - 1e-9)
    hi = tau(potential.u_max, model, rule) * (1.0 + 1e-9)
    return find_root(
        lambda t: spectral_radius(potential, t, model, rule) - 1.0,
        Bracket(lo, hi),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# grand potential


def _omega_from_row(f_row: np.ndarray, T: float, rule: QuadratureRule) -> float:
    xs, ws = rule.nodes, rule.weights
    E = np.sqrt(xs * xs + f_row)
    cond = xs - E + f_row / (2.0 * E) * np.tanh(E / (2.0 * T))
    entropy_part = np.log1p(np.exp(-E / T)) - np.log1p(np.exp(-xs / T))
    return float(np.sum(ws * cond) - 2.0 * T * np.sum(ws * entropy_part))


def _row_at(field: GapField, potential: Potential, T: float, tol_scale: float = 1e-12) -> np.ndarray:
    """Field row at temperature T, re-solved from the nearest stored row.

    Rows are independent fixed-point problems, so re-solving (instead of
    interpolating between rows) keeps sample values at solver accuracy;
    interpolation error would dominate the finite differences taken by the
    curve routines. Stored rows are accepted only if they actually satisfy
    the fixed point: thermodynamic differences are meaningless on an
    unconverged field.
    """
    t_nodes = field.grid.t_nodes
    tc = field.grid.tc
    if T >= tc:
        return np.zeros(field.grid.x_rule.nodes.size)
    k = int(np.argmin(np.abs(t_nodes - T)))
    if math.isclose(t_nodes[k], T, rel_tol=1e-14, abs_tol=0.0):
        row = field.values[k]
        applied = evaluate_at(field, potential, float(t_nodes[k]), field.grid.x_rule.nodes)
        if np.max(np.abs(applied - row)) > 1e-6 * float(np.max(field.values)):
            raise ValueError(f"field row at T={T!r} is not a converged fixed point")
        return row
    start = field.values[min(k, t_nodes.size - 2)]
    if np.max(start) <= 0.0:
        start = field.values[max(k - 1, 0)]
    if np.max(start) <= 0.0:
        start = np.max(field.values) * np.ones_like(start) * (tc - T) / tc
    tol = tol_scale * float(np.max(field.values))
    row, _ = solve_row(potential, field.grid.x_rule, T, start, tol)
    return row


def omega_difference(field: GapField, potential: Potential, model: ModelParams, T: float) -> float:
    """Grand-potential difference (superconducting minus normal) at T.

    Exactly zero at and above tc, where the field vanishes. The field must
    be a converged fixed point; pass the solver output, not an iterate.
    """
    if T >= field.grid.tc:
        return 0.0
    row = _row_at(field, potential, T)
    return _omega_from_row(row, T, field.grid.x_rule)


def normal_specific_heat(model: ModelParams, T: float, rule: QuadratureRule, h_factor: float = 1e-3) -> float:
    """C_N = -T d^2(Omega_N)/dT^2 by centered differences with one
    Richardson step; Omega_N = -2T int_I ln(1 + exp(-xi/T)) dxi."""
    xs, ws = rule.nodes, rule.weights

    def omega_n(t: float) -> float:
        return -2.0 * t * float(np.sum(ws * np.log1p(np.exp(-xs / t))))

    def second(h: float) -> float:
        return (omega_n(T + h) - 2.0 * omega_n(T) + omega_n(T - h)) / (h * h)

    h = h_factor * T
    return -T * (4.0 * second(h / 2.0) - second(h)) / 3.0


@dataclass(frozen=True)
class ThermoCurve:
    """Sampled thermodynamic differences across the transition."""

    t_samples: np.ndarray
    omega_diff: np.ndarray
    entropy_diff: np.ndarray
    specific_heat_diff: np.ndarray
    jump_at_tc: float
    classification: str  # second_order | not_second_order | inconclusive
    tc: float
    tol_omega: float
    tol_entropy: float
    jump_floor: float
    c_normal_at_tc: float
    omega_left: float
    entropy_left: float

    def verdict_dict(self) -> dict:
        return {
            "tc": self.tc,
            "jump": self.jump_at_tc,
            "classification": self.classification,
            "tolerances": {
                "omega": self.tol_omega,
                "entropy": self.tol_entropy,
                "jump_floor": self.jump_floor,
            },
            "omega_left": self.omega_left,
            "entropy_left": self.entropy_left,
            "c_normal_at_tc": self.c_normal_at_tc,
            "jump_over_c_normal": (
                self.jump_at_tc / self.c_normal_at_tc if self.c_normal_at_tc else math.nan
            ),
        }


def thermo_curves(
    field: GapField,
    potential: Potential,
    model: ModelParams,
    half_width: float,
    n_samples: int,
    center: float | None = None,
) -> ThermoCurve:
    """Entropy and specific-heat differences on samples straddling tc.

    S = -dOmega/dT and C = -T d^2 Omega/dT^2 by centered differences on
    the uniform sample grid, one-sided into tc from each branch. The
    specific-heat jump is the left limit at tc, Richardson-extrapolated
    from the two finest spacings. Classification is second order when the
    potential and entropy differences vanish at tc within spacing-scaled
    tolerances while the jump is positive and above the floor.
    """
    if n_samples < 17:
        raise ValueError("need at least 17 samples (8 per side of tc)")
    tc = field.grid.tc
    center = tc if center is None else center
    m = n_samples // 2
    hs = half_width / m
    t_samples = center + hs * (np.arange(n_samples) - m)
    if t_samples[0] <= 0:
        raise ValueError("sample range extends below zero temperature")
    rule = field.grid.x_rule

    omega = np.array(
        [omega_difference(field, potential, model, t) for t in t_samples]
    )

    below = t_samples < tc - 1e-14 * tc
    if not np.any(below) or bool(np.all(below)):
        # the sample window does not straddle the transition: no verdict
        zeros = np.zeros_like(omega)
        c_n = normal_specific_heat(model, tc, rule)
        return ThermoCurve(
            t_samples=t_samples, omega_diff=omega, entropy_diff=zeros,
            specific_heat_diff=zeros, jump_at_tc=0.0, classification="inconclusive",
            tc=tc, tol_omega=0.0, tol_entropy=0.0, jump_floor=1e-6 * c_n,
            c_normal_at_tc=c_n, omega_left=0.0, entropy_left=0.0,
        )
    n_below = int(np.sum(below))
    if n_below < 8 or n_samples - n_below - 1 < 0:
        raise ValueError("fewer than 8 samples per side of tc")

    # index of the sample at (or nearest above) tc
    kc = int(np.argmin(np.abs(t_samples - tc)))

    entropy = np.zeros_like(omega)
    c_diff = np.zeros_like(omega)
    # left branch: centered stencils strictly below tc, one-sided at its edge
    for k in range(1, kc):
        entropy[k] = -(omega[k + 1] - omega[k - 1]) / (2.0 * hs)
        c_diff[k] = -t_samples[k] * (omega[k + 1] - 2.0 * omega[k] + omega[k - 1]) / (hs * hs)
    entropy[0] = -(omega[1] - omega[0]) / hs
    c_diff[0] = c_diff[1]

    def one_sided_c(step: int) -> float:
        o0 = omega[kc]
        o1 = omega[kc - step]
        o2 = omega[kc - 2 * step]
        o3 = omega[kc - 3 * step]
        d2 = (2.0 * o0 - 5.0 * o1 + 4.0 * o2 - o3) / (step * hs) ** 2
        return -tc * d2

    jump = (4.0 * one_sided_c(1) - one_sided_c(2)) / 3.0
    c_diff[kc] = jump

    entropy_left = -(3.0 * omega[kc] - 4.0 * omega[kc - 1] + omega[kc - 2]) / (2.0 * hs)
    entropy[kc] = 0.0
    omega_left = float(omega[kc - 1])

    c_n = normal_specific_heat(model, tc, rule)
    scale_s = float(np.max(np.abs(entropy[: kc + 1]))) or 1.0
    scale_c = float(np.max(np.abs(c_diff[: kc + 1]))) / tc or 1.0
    tol_omega = 10.0 * hs * scale_s
    tol_entropy = 10.0 * hs * scale_c
    jump_floor = 1e-6 * c_n

    if abs(omega_left) <= tol_omega and abs(entropy_left) <= tol_entropy and jump > jump_floor:
        classification = "second_order"
    else:
        classification = "not_second_order"

    return ThermoCurve(
        t_samples=t_samples,
        omega_diff=omega,
        entropy_diff=entropy,
        specific_heat_diff=c_diff,
        jump_at_tc=float(jump),
        classification=classification,
        tc=tc,
        tol_omega=tol_omega,
        tol_entropy=tol_entropy,
        jump_floor=jump_floor,
        c_normal_at_tc=c_n,
        omega_left=omega_left,
        entropy_left=float(entropy_left),
    )


# ---------------------------------------------------------------------------
# near-tc structure of the field


@dataclass(frozen=True)
class NearTcFit:
    """Least-squares linear coefficient of the vanishing squared gap."""

    coefficients: np.ndarray  # c(x): f ~ c(x) * (tc - T)
    residual: float  # sup over x of the rms misfit
    rows_used: int


def near_tc_fit(field: GapField, window_rows: int = 6) -> NearTcFit:
    """Fit f(T, x) ~ c(x) (tc - T) through the origin on the nearest rows."""
    t_nodes = field.grid.t_nodes
    tc = field.grid.tc
    if window_rows < 4:
        raise ValueError("window must span at least 4 rows")
    rows = np.arange(t_nodes.size - 1)[-window_rows:]
    if rows.size < 4:
        raise DegenerateFitError("fewer than 4 grid rows below tc")
    s = tc - t_nodes[rows]
    f = field.values[rows]
    if np.max(f) <= 0.0:
        raise DegenerateFitError("fit window rows are all zero")
    coeff = np.einsum("k,kx->x", s, f, optimize=False) / float(np.sum(s * s))
    misfit = f - coeff[None, :] * s[:, None]
    residual = float(np.max(np.sqrt(np.mean(misfit * misfit, axis=0))))
    return NearTcFit(coefficients=coeff, residual=residual, rows_used=int(rows.size))


def sqrt_exponent(field: GapField, decade: float = 10.0) -> float:
    """Log-log slope of sup_x sqrt(f) against (tc - T) over the rows nearest
    tc spanning one decade; 1/2 is the square-root vanishing signature."""
    t_nodes = field.grid.t_nodes
    tc = field.grid.tc
    s = tc - t_nodes[:-1]
    u = np.sqrt(np.max(field.values[:-1], axis=1))
    keep = (s <= decade * s[-1]) & (u > 0)
    if np.sum(keep) < 3:
        raise DegenerateFitError("not enough rows within the nearest decade")
    slope, _ = np.polyfit(np.log(s[keep]), np.log(u[keep]), 1)
    return float(slope)


def write_thermo_csv(curve: ThermoCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("temperature,omega_diff,entropy_diff,specific_heat_diff\n")
        for t, o, s, c in zip(
            curve.t_samples, curve.omega_diff, curve.entropy_diff, curve.specific_heat_diff
        ):
            fh.write(f"{t:.17g},{o:.17g},{s:.17g},{c:.17g}\n")
