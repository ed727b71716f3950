import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcsgap.numerics import (
    Bracket,
    BracketError,
    EvaluationError,
    QuadratureRule,
    composite_gauss_legendre,
    find_root,
    gauss_legendre,
    integrate,
    maximize_scalar,
)


class TestQuadrature:
    def test_polynomial_exactness_trivial(self):
        rule = gauss_legendre(0.0, 1.0, 16)
        assert integrate(lambda x: x, rule) == pytest.approx(0.5, rel=1e-14)

    def test_log_integral(self):
        # 1/x has a near-singularity just left of the interval; order 256
        # (or panel splitting) is needed for full accuracy there
        rule = gauss_legendre(1e-3, 1.0, 256)
        assert integrate(lambda x: 1.0 / x, rule) == pytest.approx(math.log(1000.0), rel=1e-9)
        split = composite_gauss_legendre(1e-3, 1.0, 64, panels=8)
        assert integrate(lambda x: 1.0 / x, split) == pytest.approx(math.log(1000.0), rel=1e-9)

    def test_sine(self):
        rule = gauss_legendre(0.0, math.pi, 64)
        assert integrate(np.sin, rule) == pytest.approx(2.0, rel=1e-13)

    @pytest.mark.parametrize("order", [2, 4, 8, 16])
    def test_monomial_exactness_to_degree_2n_minus_1(self, order):
        a, b = 0.3, 1.7
        rule = gauss_legendre(a, b, order)
        for k in range(2 * order):
            exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
            got = integrate(lambda x, k=k: x**k, rule)
            assert got == pytest.approx(exact, rel=1e-12)

    @given(
        alpha=st.floats(-5, 5, allow_nan=False),
        beta=st.floats(-5, 5, allow_nan=False),
        cf=st.lists(st.floats(-2, 2), min_size=1, max_size=5),
        cg=st.lists(st.floats(-2, 2), min_size=1, max_size=5),
    )
    @settings(max_examples=50, deadline=None)
    def test_linearity(self, alpha, beta, cf, cg):
        rule = gauss_legendre(0.0, 1.0, 24)
        f = lambda x: np.polynomial.polynomial.polyval(x, cf)
        g = lambda x: np.polynomial.polynomial.polyval(x, cg)
        combined = integrate(lambda x: alpha * f(x) + beta * g(x), rule)
        separate = alpha * integrate(f, rule) + beta * integrate(g, rule)
        scale = max(abs(combined), abs(separate), 1.0)
        assert abs(combined - separate) <= 1e-12 * scale

    def test_composite_refinement_matches(self):
        plain = gauss_legendre(0.0, 2.0, 32)
        split = composite_gauss_legendre(0.0, 2.0, 16, panels=4)
        f = lambda x: np.exp(-x) * np.cos(3 * x)
        assert integrate(f, split) == pytest.approx(integrate(f, plain), rel=1e-13)

    def test_nonfinite_integrand_names_node(self):
        rule = gauss_legendre(0.0, 1.0, 8)
        with pytest.raises(EvaluationError, match="node 0"):
            integrate(lambda x: np.where(x < 0.5, np.nan, 1.0), rule)

    def test_rule_invariants_enforced(self):
        good = gauss_legendre(0.0, 1.0, 8)
        with pytest.raises(ValueError):
            QuadratureRule(good.nodes[::-1], good.weights, 8, 0.0, 1.0)
        with pytest.raises(ValueError):
            QuadratureRule(good.nodes, -good.weights, 8, 0.0, 1.0)
        with pytest.raises(ValueError):
            QuadratureRule(good.nodes, 2 * good.weights, 8, 0.0, 1.0)
        with pytest.raises(ValueError):
            QuadratureRule(good.nodes, good.weights, 8, 0.5, 1.0)


class TestFindRoot:
    def test_sqrt_two(self):
        x = find_root(lambda x: x * x - 2.0, Bracket(1.0, 2.0), tol=1e-13)
        assert x == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_atanh_half(self):
        x = find_root(lambda x: math.tanh(x) - 0.5, Bracket(0.0, 2.0), tol=1e-13)
        assert x == pytest.approx(math.atanh(0.5), abs=1e-12)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            find_root(lambda x: x * x + 1.0, Bracket(0.0, 1.0))

    def test_bracket_refinement_independence(self):
        g = lambda x: math.cos(x) - x
        wide = find_root(g, Bracket(0.0, math.pi / 2), tol=1e-13)
        half = find_root(g, Bracket(wide - 0.2, wide + 0.2), tol=1e-13)
        assert abs(wide - half) <= 1e-12

    def test_endpoint_root(self):
        assert find_root(lambda x: x - 1.0, Bracket(1.0, 2.0)) == 1.0

    def test_nonfinite_raises(self):
        with pytest.raises(EvaluationError):
            find_root(lambda x: float("nan"), Bracket(0.0, 1.0))

    @given(root=st.floats(0.1, 0.9), scale=st.floats(0.5, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_random_linear_roots(self, root, scale):
        x = find_root(lambda x: scale * (x - root), Bracket(0.0, 1.0), tol=1e-13)
        assert abs(x - root) <= 1e-11


class TestMaximize:
    def test_z_over_cosh(self):
        # oracle: stationarity cosh z = z sinh z, solved independently
        zstar = find_root(lambda z: math.cosh(z) - z * math.sinh(z), Bracket(0.5, 2.0), tol=1e-13)
        xm, vm = maximize_scalar(lambda z: z / math.cosh(z), Bracket(0.0, 3.0), tol=1e-10)
        assert xm == pytest.approx(zstar, abs=5e-8)  # sqrt-eps argmax floor
        assert xm == pytest.approx(1.19967864025773, abs=5e-8)
        assert vm == pytest.approx(0.662743419349182, rel=1e-10)

    def test_parabola(self):
        xm, vm = maximize_scalar(lambda x: x * (1.0 - x), Bracket(0.0, 1.0), tol=1e-12)
        assert xm == pytest.approx(0.5, abs=1e-7)
        assert vm == pytest.approx(0.25, rel=1e-12)

    def test_constant_function(self):
        xm, vm = maximize_scalar(lambda x: 1.0, Bracket(0.0, 1.0), tol=1e-10)
        assert 0.0 <= xm <= 1.0
        assert vm == 1.0

    def test_nonfinite_raises(self):
        with pytest.raises(EvaluationError):
            maximize_scalar(lambda x: float("inf"), Bracket(0.0, 1.0))
