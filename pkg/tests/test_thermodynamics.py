import numpy as np
import pytest

from bcsgap import (
    GapField,
    GridSpec,
    ModelParams,
    constant_potential,
    critical_temperature,
    delta_const,
    gauss_legendre,
    make_temperature_grid,
    near_tc_fit,
    normal_specific_heat,
    omega_difference,
    slope_at_tc,
    solve_fixed_point,
    spectral_radius,
    sqrt_exponent,
    tau,
    thermo_curves,
)
from bcsgap.thermodynamics import DegenerateFitError, NoTransitionError

# Oracle: rank-one reduction int h(xi)^2 tanh(xi/2T)/xi dxi = 1, solved with
# scipy.optimize.brentq on a 1024-node rule.
TC_SEPARABLE = 0.030569918020195683


@pytest.fixture(scope="module")
def const_solution(const_pot, model, rule64):
    tc = critical_temperature(const_pot, model, rule64)
    nodes = make_temperature_grid(0.3 * tc, tc, 48, s_min=1e-3 * tc)
    grid = GridSpec(t_nodes=nodes, x_rule=rule64)
    field, report = solve_fixed_point(const_pot, grid)
    return field, tc


class TestCriticalTemperature:
    def test_constant_reduces_to_tau(self, const_pot, model, rule64):
        tc = critical_temperature(const_pot, model, rule64)
        assert tc == pytest.approx(tau(0.3, model, rule64), abs=1e-8)

    def test_separable_rank_one_oracle(self, sep_pot, model, rule64):
        tc = critical_temperature(sep_pot, model, rule64)
        assert tc == pytest.approx(TC_SEPARABLE, abs=1e-9)

    def test_bracketed_by_extremal_taus(self, sep_pot, model, rule64):
        tc = critical_temperature(sep_pot, model, rule64)
        assert tau(sep_pot.u_min, model, rule64) <= tc <= tau(sep_pot.u_max, model, rule64)

    def test_spectral_radius_decreasing(self, sep_pot, model, rule64):
        temps = np.linspace(0.01, 0.08, 9)
        rhos = [spectral_radius(sep_pot, t, model, rule64) for t in temps]
        assert np.all(np.diff(rhos) < 0.0)

    def test_no_transition_error(self, model, rule64):
        # u ln(debye/eps) < 1: subcritical even at the zero-temperature proxy
        weak = constant_potential(0.12, model)
        with pytest.raises(NoTransitionError):
            critical_temperature(weak, model, rule64)


class TestOmegaDifference:
    def test_zero_at_and_above_tc(self, const_pot, model, const_solution):
        field, tc = const_solution
        assert omega_difference(field, const_pot, model, tc) == 0.0
        assert omega_difference(field, const_pot, model, 1.5 * tc) == 0.0

    def test_negative_below_tc(self, const_pot, model, const_solution):
        field, tc = const_solution
        for t in (0.5 * tc, 0.8 * tc, 0.97 * tc):
            assert omega_difference(field, const_pot, model, t) < 0.0

    def test_vanishes_continuously_at_tc(self, const_pot, model, const_solution):
        field, tc = const_solution
        values = [abs(omega_difference(field, const_pot, model, tc * (1 - s)))
                  for s in (1e-2, 1e-3, 1e-4)]
        assert values[1] < 0.05 * values[0]
        assert values[2] < 0.05 * values[1]

    def test_unconverged_field_refused(self, const_pot, model, const_solution):
        field, tc = const_solution
        fake = GapField(values=field.values * 3.0, grid=field.grid)
        with pytest.raises(ValueError, match="not a converged fixed point"):
            omega_difference(fake, const_pot, model, float(field.grid.t_nodes[5]))

    def test_matches_scalar_model(self, const_pot, model, rule64, const_solution):
        # same integral evaluated directly on the scalar gap curve
        field, tc = const_solution
        t = 0.7 * tc
        d2 = delta_const(0.3, t, model, rule64) ** 2
        xs, ws = rule64.nodes, rule64.weights
        E = np.sqrt(xs**2 + d2)
        cond = np.sum(ws * (xs - E + d2 / (2 * E) * np.tanh(E / (2 * t))))
        entr = -2 * t * np.sum(ws * (np.log1p(np.exp(-E / t)) - np.log1p(np.exp(-xs / t))))
        assert omega_difference(field, const_pot, model, t) == pytest.approx(
            float(cond + entr), rel=1e-9
        )


class TestGradientDecomposition:
    def test_total_derivative_splits_into_frozen_plus_chain(
        self, const_pot, model, rule64, const_solution
    ):
        field, tc = const_solution
        t = 0.7 * tc
        xs, ws = rule64.nodes, rule64.weights

        def omega_at(tt):
            return omega_difference(field, const_pot, model, tt)

        h = 1e-5 * tc
        total_fd = (omega_at(t + h) - omega_at(t - h)) / (2 * h)

        d2 = delta_const(0.3, t, model, rule64) ** 2
        E = np.sqrt(xs**2 + d2)
        ch2 = np.cosh(E / (2 * t)) ** 2
        fermi = lambda z: 1.0 / (1.0 + np.exp(z / t))
        frozen = float(
            np.sum(ws * (-d2 / (4 * t * t * ch2)))
            - 2.0 * np.sum(ws * (np.log1p(np.exp(-E / t)) - np.log1p(np.exp(-xs / t))))
            - (2.0 / t) * np.sum(ws * (E * fermi(E) - xs * fermi(xs)))
        )
        # dOmega/df = -f tanh(E/2T)/(4E^3) + f sech^2(E/2T)/(8 T E^2)
        domega_df = -d2 * np.tanh(E / (2 * t)) / (4 * E**3) + d2 / (8 * t * E**2 * ch2)
        hh = 1e-4 * tc
        f_t = (
            delta_const(0.3, t + hh, model, rule64) ** 2
            - delta_const(0.3, t - hh, model, rule64) ** 2
        ) / (2 * hh)
        chain = float(np.sum(ws * domega_df) * f_t)
        assert total_fd == pytest.approx(frozen + chain, rel=1e-3)
        # the chain term does not vanish for this (identity-substituted)
        # grand-potential form; it carries a finite share of the slope
        assert abs(chain) > 1e-3 * abs(total_fd)

    def test_explicit_interaction_form_is_stationary_in_the_gap(self, model, rule64):
        # keeping the interaction term explicit (d2/(2u) for the one-sided
        # measure, whose gap identity reads sum w tanh/(2E) = 1/(2u)) makes
        # the gap derivative vanish on the solution curve
        u = 0.3
        t_v = tau(u, model, rule64)
        t = 0.7 * t_v
        xs, ws = rule64.nodes, rule64.weights

        def omega_explicit(d2, tt):
            E = np.sqrt(xs**2 + d2)
            return (
                d2 / (2 * u)
                + float(np.sum(ws * (xs - E)))
                - 2 * tt * float(np.sum(ws * np.log1p(np.exp(-E / tt))))
            )

        d2 = delta_const(u, t, model, rule64) ** 2
        eps_f = 1e-6 * d2
        grad_f = (omega_explicit(d2 + eps_f, t) - omega_explicit(d2 - eps_f, t)) / (2 * eps_f)
        # stationarity: the f-gradient is ~0 on the scale of its pieces, 1/(2u)
        assert abs(grad_f) <= 1e-6 / (2 * u)


@pytest.fixture(scope="module")
def weak_run():
    """Converged weak-coupling run: u = 0.25, eps = 1e-4."""
    model = ModelParams(1e-4, 1.0)
    pot = constant_potential(0.25, model)
    rule = gauss_legendre(model.epsilon, model.debye, 64)
    tc = critical_temperature(pot, model, rule)
    nodes = make_temperature_grid(0.25 * tc, tc, 96, s_min=1e-3 * tc)
    field, _ = solve_fixed_point(pot, GridSpec(t_nodes=nodes, x_rule=rule))
    return model, pot, rule, tc, field


class TestThermoCurves:
    def test_second_order_classification(self, weak_run):
        model, pot, rule, tc, field = weak_run
        curve = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=33)
        assert curve.classification == "second_order"
        assert abs(curve.omega_left) <= curve.tol_omega
        assert abs(curve.entropy_left) <= curve.tol_entropy
        assert curve.jump_at_tc > curve.jump_floor > 0.0

    def test_curve_invariants(self, weak_run):
        model, pot, rule, tc, field = weak_run
        curve = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=33)
        below = curve.t_samples < tc
        assert np.all(curve.omega_diff[below] < 0.0)
        assert np.all(curve.omega_diff[~below] == 0.0)
        assert np.isfinite(curve.jump_at_tc)

    def test_entropy_bound_shrinks_with_spacing(self, weak_run):
        model, pot, rule, tc, field = weak_run
        coarse = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=33)
        fine = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=65)
        assert abs(fine.entropy_left) <= 0.7 * abs(coarse.entropy_left)

    def test_jump_stable_under_halving(self, weak_run):
        model, pot, rule, tc, field = weak_run
        coarse = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=33)
        fine = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=65)
        assert fine.jump_at_tc == pytest.approx(coarse.jump_at_tc, rel=0.05)

    def test_weak_coupling_jump_ratio(self, weak_run):
        model, pot, rule, tc, field = weak_run
        curve = thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=33)
        ratio = curve.jump_at_tc / curve.c_normal_at_tc
        assert 1.35 <= ratio <= 1.50  # brackets the universal 12/(7 zeta(3))

    def test_normal_specific_heat_sommerfeld(self, weak_run):
        model, pot, rule, tc, field = weak_run
        c_n = normal_specific_heat(model, tc, rule)
        assert c_n == pytest.approx(np.pi**2 * tc / 3.0, rel=1e-4)

    def test_all_samples_above_tc_inconclusive(self, weak_run):
        model, pot, rule, tc, field = weak_run
        curve = thermo_curves(
            field, pot, model, half_width=0.01 * tc, n_samples=33, center=1.05 * tc
        )
        assert curve.classification == "inconclusive"
        assert np.all(curve.omega_diff == 0.0)

    def test_all_samples_below_tc_inconclusive(self, weak_run):
        model, pot, rule, tc, field = weak_run
        curve = thermo_curves(
            field, pot, model, half_width=0.01 * tc, n_samples=33, center=0.9 * tc
        )
        assert curve.classification == "inconclusive"
        assert np.all(curve.omega_diff < 0.0)

    def test_too_few_samples_refused(self, weak_run):
        model, pot, rule, tc, field = weak_run
        with pytest.raises(ValueError, match="17"):
            thermo_curves(field, pot, model, half_width=0.02 * tc, n_samples=9)


class TestNearTcStructure:
    def test_fit_matches_boundary_slope(self, const_pot, model, rule64, const_solution):
        field, tc = const_solution
        fit = near_tc_fit(field)
        g = slope_at_tc(const_pot, tc, model, rule64)
        assert np.max(np.abs(fit.coefficients - g) / g) <= 0.01

    def test_fit_residual_shrinks_quadratically(self, const_pot, model, rule64, const_solution):
        field, tc = const_solution
        wide = near_tc_fit(field, window_rows=10)
        narrow = near_tc_fit(field, window_rows=5)
        # window width roughly halves on the geometric tail; the linear-fit
        # residual is a second-order Taylor remainder
        assert narrow.residual < 0.5 * wide.residual

    def test_sqrt_exponent(self, const_solution):
        field, _ = const_solution
        assert sqrt_exponent(field) == pytest.approx(0.5, abs=0.02)

    def test_degenerate_window_raises(self, const_pot, model, rule64, const_solution):
        field, tc = const_solution
        zero = GapField(values=np.zeros_like(field.values), grid=field.grid)
        with pytest.raises(DegenerateFitError):
            near_tc_fit(zero)
