import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcsgap import ModelParams, delta_const, gap_curve, gauss_legendre, tau
from bcsgap.constant_gap import NoSolutionError

# Frozen oracle values, computed independently with scipy.optimize.brentq on
# 512-node Gauss-Legendre sums (xtol 1e-15).
TAU_03_EPS3 = 0.039946391713511734
TAU_02_EPS3 = 0.0071222531786078284
TAU_025_EPS4 = 0.02071741833788049
DELTA0_025_EPS4 = 0.036543366387343554
DELTA_HALFTAU_025_EPS4 = 0.034969447436983866
DELTA0_03_EPS3 = 0.07042925478049905


class TestTau:
    def test_defining_identity(self, model, rule64):
        for u in (0.2, 0.3, 0.45):
            t = tau(u, model)
            rule = gauss_legendre(model.epsilon, model.debye, 256)
            lhs = u * np.sum(rule.weights * np.tanh(rule.nodes / (2 * t)) / rule.nodes)
            assert abs(lhs - 1.0) <= 1e-10

    def test_frozen_values(self, model):
        assert tau(0.3, model) == pytest.approx(TAU_03_EPS3, abs=1e-10)
        assert tau(0.2, model) == pytest.approx(TAU_02_EPS3, abs=1e-10)
        m4 = ModelParams(1e-4, 1.0)
        assert tau(0.25, m4) == pytest.approx(TAU_025_EPS4, abs=1e-10)

    def test_monotone_in_coupling(self, model):
        assert tau(0.2, model) < tau(0.3, model)

    def test_weak_coupling_no_solution(self, model):
        # u * ln(debye/eps) = 0.1 * ln(1000) < 1: the gap never opens
        with pytest.raises(NoSolutionError, match="<"):
            tau(0.1, model)


class TestDeltaConst:
    def test_zero_at_tau_and_above(self, model):
        t = tau(0.3, model)
        assert delta_const(0.3, t, model) == 0.0
        assert delta_const(0.3, 2 * t, model) == 0.0

    def test_zero_temperature_value(self):
        m = ModelParams(1e-4, 1.0)
        d0 = delta_const(0.25, 0.0, m)
        assert d0 == pytest.approx(DELTA0_025_EPS4, abs=1e-10)
        # weak-coupling estimate 2 exp(-1/u) holds within 3 percent
        approx = 2.0 * np.exp(-4.0)
        assert abs(d0 - approx) / approx < 0.03
        # closed form at T=0: 1 = u (asinh(debye/D) - asinh(eps/D))
        lhs = 0.25 * (np.arcsinh(1.0 / d0) - np.arcsinh(1e-4 / d0))
        assert lhs == pytest.approx(1.0, abs=1e-12)

    def test_monotone_in_coupling(self, model):
        for t in (0.0, 0.002, 0.005):
            assert delta_const(0.2, t, model) <= delta_const(0.3, t, model)

    @given(frac=st.floats(0.02, 0.9), pair=st.tuples(st.floats(0.16, 0.5), st.floats(0.16, 0.5)))
    @settings(max_examples=25, deadline=None)
    def test_randomized_monotonicity(self, frac, pair):
        # decreasing in T at fixed coupling, increasing in coupling at fixed T
        model = ModelParams(1e-3, 1.0)
        u_lo, u_hi = min(pair), max(pair)
        t_v = tau(u_lo, model)
        t1, t2 = frac * t_v, min((frac + 0.05) * t_v, 0.999 * t_v)
        assert delta_const(u_lo, t1, model) >= delta_const(u_lo, t2, model)
        assert delta_const(u_lo, t1, model) <= delta_const(u_hi, t1, model)

    def test_identity_residual_on_samples(self, model):
        u = 0.3
        t_v = tau(u, model)
        rule = gauss_legendre(model.epsilon, model.debye, 256)
        for t in np.linspace(0.1 * t_v, 0.95 * t_v, 7):
            d = delta_const(u, t, model)
            E = np.sqrt(rule.nodes**2 + d * d)
            lhs = u * np.sum(rule.weights * np.tanh(E / (2 * t)) / E)
            assert abs(lhs - 1.0) <= 1e-10


class TestGapCurve:
    def test_curve_invariants_and_midpoint(self):
        m = ModelParams(1e-4, 1.0)
        t_v = tau(0.25, m)
        grid = np.linspace(0.0, 1.2 * t_v, 25)
        curve = gap_curve(0.25, grid, m)
        assert curve.tau == pytest.approx(TAU_025_EPS4, abs=1e-10)
        assert delta_const(0.25, t_v / 2, m) == pytest.approx(
            DELTA_HALFTAU_025_EPS4, abs=1e-8
        )
        below = grid < curve.tau
        assert np.all(curve.gaps[~below] == 0.0)
        # endpoints bracket interior values
        assert np.all(curve.gaps[below] <= curve.gaps[0])

    def test_strictly_decreasing_slope(self, model):
        t_v = tau(0.3, model)
        grid = np.linspace(0.05 * t_v, 0.98 * t_v, 30)
        curve = gap_curve(0.3, grid, model)
        slopes = np.diff(curve.gaps) / np.diff(grid)
        assert np.all(slopes < 0.0)

    def test_weak_coupling_ratio_band(self):
        # 2 Delta(0) / tau brackets the universal value 3.528
        m = ModelParams(1e-4, 1.0)
        ratio = 2.0 * delta_const(0.25, 0.0, m) / tau(0.25, m)
        assert 3.46 <= ratio <= 3.60

    def test_frozen_u03(self, model):
        assert delta_const(0.3, 0.0, model) == pytest.approx(DELTA0_03_EPS3, abs=1e-10)
