"""Truncated power-series arithmetic used by the saddle normal form."""

import math

import pytest

from polycycles.series import (DEFAULT_ORDER, PowerSeries, gbt_coefficient,
                               ps_div, ps_exp, ps_integrate, ps_log)


def geometric(order=DEFAULT_ORDER):
    # 1/(1-t) = 1 + t + t^2 + ...
    return PowerSeries([1.0] * order)


class TestArithmetic:
    def test_constructors(self):
        assert PowerSeries.zero().coeffs[0] == 0.0
        assert PowerSeries.constant(4.0).evaluate(0.3) == 4.0
        assert PowerSeries.identity().evaluate(0.3) == 0.3

    def test_mul_against_closed_form(self):
        g = geometric()
        sq = g * g  # 1/(1-t)^2 = sum (k+1) t^k
        assert [sq.coeffs[k] for k in range(6)] == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]

    def test_add_sub_neg(self):
        f = PowerSeries([1.0, 2.0, 3.0])
        g = PowerSeries([0.5, -2.0, 1.0])
        assert (f + g).coeffs[1] == 0.0
        assert (f - g).coeffs[0] == 0.5
        assert (-f).coeffs[2] == -3.0

    def test_shift_and_scale(self):
        # shift multiplies by t^2 but keeps the truncation order
        f = PowerSeries([1.0, 1.0, 0.0, 0.0]).shift(2).scale(3.0)
        assert f.coeffs[2] == 3.0 and f.coeffs[3] == 3.0
        assert f.coeffs[0] == 0.0 and f.order == 3

    def test_derivative(self):
        f = PowerSeries([5.0, 1.0, 2.0, 4.0])
        assert [f.derivative().coeffs[k] for k in range(3)] == [1.0, 4.0, 12.0]

    def test_evaluate_matches_horner(self):
        f = PowerSeries([2.0, -1.0, 0.5, 0.25])
        t = 0.37
        expected = 2.0 - t + 0.5 * t**2 + 0.25 * t**3
        assert f.evaluate(t) == pytest.approx(expected, rel=1e-15)

    def test_tail_evaluate(self):
        f = PowerSeries([1.0, 2.0, 3.0])
        t = 0.2
        assert f.tail_evaluate(t, 1) == pytest.approx(2.0 * t + 3.0 * t**2)


class TestFunctions:
    def test_div(self):
        one = PowerSeries.constant(1.0)
        inv = ps_div(one, PowerSeries([1.0, -1.0]))  # 1/(1-t)
        assert all(c == pytest.approx(1.0) for c in inv.coeffs)

    def test_exp_log_round_trip(self):
        f = PowerSeries([0.0, 0.7, -0.3, 0.1])
        back = ps_log(ps_exp(f))
        for a, b in zip(back.coeffs, f.coeffs):
            assert a == pytest.approx(b, abs=1e-14)

    def test_exp_matches_scalar(self):
        # exp(t) truncation: coefficients 1/k!
        e = ps_exp(PowerSeries.identity())
        for k in range(8):
            assert e.coeffs[k] == pytest.approx(1.0 / math.factorial(k), rel=1e-14)

    def test_log_of_geometric(self):
        # log(1/(1-t)) = sum t^k / k
        lg = ps_log(geometric())
        for k in range(1, 8):
            assert lg.coeffs[k] == pytest.approx(1.0 / k, rel=1e-13)

    def test_integrate_gains_order(self):
        f = PowerSeries([1.0, 2.0, 3.0])
        F = ps_integrate(f)
        assert F.order == f.order + 1
        assert [F.coeffs[k] for k in range(4)] == [0.0, 1.0, 1.0, 1.0]


class TestGeneralizedBinomial:
    def test_integer_alpha(self):
        assert gbt_coefficient(5.0, 2) == pytest.approx(math.comb(5, 2))
        assert gbt_coefficient(5.0, 6) == 0.0

    def test_half(self):
        assert gbt_coefficient(0.5, 0) == 1.0
        assert gbt_coefficient(0.5, 1) == 0.5
        assert gbt_coefficient(0.5, 2) == pytest.approx(-1 / 8)
        assert gbt_coefficient(0.5, 3) == pytest.approx(1 / 16)

    def test_negative_alpha(self):
        # (1+t)^-1: coefficients (-1)^k
        for k in range(6):
            assert gbt_coefficient(-1.0, k) == pytest.approx((-1.0) ** k)
