"""Integration oracle: crossings, transitions, fits, and cycle counting.

The linear saddle x' = x, y' = -2y has the exact transition map
D(s) = D00 * s^2, so every numeric route here can be checked against pencil
and paper; the circle field provides one genuine limit cycle at r = 1.
"""

import math

import numpy as np
import pytest

from polycycles.errors import NumericError, OutOfBasinError
from polycycles.expressions import instantiate, parse_expression
from polycycles.flow import (
    LineSection,
    chart_field,
    count_limit_cycles,
    crossing_map,
    dulac_lattice,
    field_callable,
    fit_expansion,
    numeric_dulac,
    numeric_return,
)
from polycycles.model import bind
from polycycles.saddle import SectionPair, normalize_saddle


def poly(source):
    return instantiate(parse_expression(source), {})


@pytest.fixture(scope="module")
def saddle_fun():
    return field_callable(poly("x"), poly("-2*y"))


@pytest.fixture(scope="module")
def exit_section():
    return LineSection.make((1.0, 0.0), (0.0, 1.0), (0.0, 2.0))


class TestLineSection:
    def test_geometry(self):
        sect = LineSection.make((1.0, 0.0), (0.0, 1.0), (0.0, 2.0))
        np.testing.assert_allclose(sect.point(0.5), [1.0, 0.5])
        assert sect.param((1.0, 0.7)) == pytest.approx(0.7)
        assert sect.residual((1.0, 0.3)) == 0.0
        assert sect.residual((0.5, 0.3)) * sect.residual((1.5, 0.3)) < 0.0

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError, match="direction must be nonzero"):
            LineSection.make((0.0, 0.0), (0.0, 0.0), (0.0, 1.0))


class TestCrossing:
    def test_linear_saddle_transition(self, saddle_fun, exit_section):
        # from (0.01, 1): x = 0.01 e^t hits 1 at t = ln 100, y = 1e-4 there
        u, t = crossing_map(saddle_fun, (0.01, 1.0), exit_section)
        assert u == pytest.approx(1e-4, rel=1e-8)
        assert t == pytest.approx(math.log(100.0), abs=1e-9)

    def test_stable_axis_never_crosses(self, saddle_fun, exit_section):
        with pytest.raises(OutOfBasinError, match="did not return"):
            crossing_map(saddle_fun, (0.0, 1.0), exit_section, t_max=5.0)

    def test_return_start_must_be_in_window(self, saddle_fun, exit_section):
        with pytest.raises(ValueError, match="outside the section window"):
            numeric_return(saddle_fun, exit_section, 5.0)


@pytest.fixture(scope="module")
def chart():
    return normalize_saddle(poly("x"), poly("-2*y"),
                            (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))


class TestNumericDulac:

    def test_curved_sections_exact_map(self, chart):
        # entry (2s, 1), exit (1, 3u): the map is u = 4 s^2 / 3 exactly
        sec = SectionPair.make([0.0, 2.0], [1.0], [1.0], [0.0, 3.0])
        assert numeric_dulac(chart, sec, 0.01) == pytest.approx(
            4.0 / 3.0 * 1e-4, rel=1e-8)

    def test_homogeneity(self, chart):
        sec = SectionPair.default()
        ratio = numeric_dulac(chart, sec, 0.01) / numeric_dulac(chart, sec, 0.005)
        assert ratio == pytest.approx(2.0 ** 2, rel=1e-8)

    def test_domain_guard(self, chart):
        with pytest.raises(ValueError, match="expects s > 0"):
            numeric_dulac(chart, SectionPair.default(), 0.0)

    def test_chart_field_matches_local_velocity(self):
        chart = normalize_saddle(poly("x*(1 + 0.3*x - 0.2*y)"),
                                 poly("-y*(2 - 0.1*x + 0.4*y)"),
                                 (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))
        fun = chart_field(chart)
        np.testing.assert_allclose(fun(0.0, (0.1, 0.2)),
                                   chart.local_velocity(0.1, 0.2), rtol=1e-15)


class TestFitExpansion:
    def test_free_form_recovery(self):
        s = np.geomspace(1e-3, 1e-1, 12)
        fit = fit_expansion(s, s ** 2 * (3.0 + 5.0 * s))
        assert fit.exponent == pytest.approx(2.0, rel=1e-6)
        assert fit.leading == pytest.approx(3.0, rel=1e-6)
        assert fit.second_exponent == pytest.approx(1.0, rel=1e-4)
        assert fit.second_coeff == pytest.approx(5.0, rel=1e-4)
        assert fit.confident

    def test_lattice_fit_is_sharper(self):
        s = np.geomspace(1e-3, 1e-1, 12)
        fit = fit_expansion(s, s ** 2 * (3.0 + 5.0 * s),
                            exponent=2.0, lattice=(0.0, 1.0, 2.0))
        assert fit.leading == pytest.approx(3.0, rel=1e-12)
        assert fit.second_coeff == pytest.approx(5.0, rel=1e-12)
        assert fit.second_exponent == 1.0
        assert fit.rel_residual < 1e-12

    def test_negative_values_allowed(self):
        s = np.geomspace(1e-3, 1e-1, 10)
        fit = fit_expansion(s, -2.0 * s ** 1.5)
        assert fit.exponent == pytest.approx(1.5, rel=1e-6)
        assert fit.leading == pytest.approx(-2.0, rel=1e-6)

    def test_guards(self):
        with pytest.raises(ValueError, match="at least 4 samples"):
            fit_expansion([0.1, 0.2, 0.4], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="nonzero values"):
            fit_expansion([0.1, 0.2, 0.4, 0.8], [1.0, 0.0, 3.0, 4.0])
        with pytest.raises(ValueError, match="needs the leading exponent"):
            fit_expansion([0.1, 0.2, 0.4, 0.8], [1.0, 2.0, 3.0, 4.0],
                          lattice=(0.0, 1.0))

    def test_non_monotone_samples_flagged(self):
        fit = fit_expansion([0.1, 0.2, 0.4, 0.8], [1.0, 2.0, 1.5, 3.0])
        assert not fit.confident
        assert any("not monotone" in n for n in fit.notes)

    def test_lattice_values(self):
        assert dulac_lattice(1.5) == (0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
        # integer ratios collapse onto the integer offsets
        assert dulac_lattice(1.0) == (0.0, 1.0, 2.0, 3.0)
        with pytest.raises(ValueError, match="must be positive"):
            dulac_lattice(0.0)


class TestCountCycles:
    def test_two_roots_with_stability(self):
        count = count_limit_cycles(lambda s: (s - 0.3) * (s - 0.7), 0.1, 1.0)
        assert [c.stability for c in count.cycles] == ["stable", "unstable"]
        assert count.cycles[0].s == pytest.approx(0.3, abs=1e-9)
        assert count.cycles[1].s == pytest.approx(0.7, abs=1e-9)
        assert count.scanned == (0.1, 1.0)

    def test_no_sign_change(self):
        count = count_limit_cycles(lambda s: 1.0 + s, 0.1, 1.0)
        assert count.cycles == ()

    def test_near_zero_samples_warn(self):
        count = count_limit_cycles(lambda s: 1e-12, 0.1, 1.0, tol=1e-10)
        assert count.cycles == ()
        assert any("within tolerance" in w for w in count.warnings)

    def test_failing_samples_are_skipped(self):
        def disp(s):
            if s < 0.2:
                raise RuntimeError("left the basin")
            return s - 0.5

        count = count_limit_cycles(disp, 0.1, 1.0, samples=50)
        assert len(count.cycles) == 1
        assert count.cycles[0].s == pytest.approx(0.5, abs=1e-9)
        assert any("failed" in w for w in count.warnings)

    def test_all_samples_failing(self):
        def disp(s):
            raise RuntimeError("nope")

        with pytest.raises(NumericError, match="too few displacement samples"):
            count_limit_cycles(disp, 0.1, 1.0, samples=10)

    def test_range_guard(self):
        with pytest.raises(ValueError, match="0 < s_min < s_max"):
            count_limit_cycles(lambda s: s, 1.0, 0.5)


@pytest.fixture(scope="module")
def circle(circle_mf):
    model = bind(circle_mf)
    fun = field_callable(model.field_x, model.field_y)
    return fun, circle_mf.base_section


class TestCircleField:
    """r' = r(1 - r^2): one attracting cycle on the unit circle."""

    def test_fixed_point_of_return_map(self, circle):
        fun, section = circle
        # the start sits exactly on the section; one revolution returns
        assert numeric_return(fun, section, 1.0) == pytest.approx(1.0, rel=1e-8)

    def test_one_stable_cycle(self, circle):
        fun, section = circle
        count = count_limit_cycles(lambda s: numeric_return(fun, section, s) - s,
                                   0.3, 2.0, samples=25, tol=1e-9)
        assert len(count.cycles) == 1
        cycle = count.cycles[0]
        assert cycle.stability == "stable"
        assert cycle.s == pytest.approx(1.0, abs=1e-8)
