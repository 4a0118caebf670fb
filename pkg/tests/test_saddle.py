"""Saddle normalization, transverse sections, and closed-form Dulac data.

Linear saddles have exact coefficients (D00 = h1 * h2**-lam, S1 = S2 = 0),
so they pin the whole pipeline without any tolerance games.  The quadratic
and four-saddle values are frozen regression points; the Mellin transform
is checked against its defining ODE.
"""

import math

import numpy as np
import pytest

from polycycles.errors import (
    DegeneracyError,
    ModelError,
    PoleError,
    UnsupportedGeometryError,
)
from polycycles.expressions import instantiate, parse_expression
from polycycles.saddle import (
    Germ,
    SectionPair,
    classify_ratio,
    dulac_coefficients,
    mellin_hat,
    normalize_saddle,
    transition_L,
)
from polycycles.series import PowerSeries


def poly(source):
    return instantiate(parse_expression(source), {})


def linear_saddle(lam, **kwargs):
    return normalize_saddle(poly("x"), poly(f"-{lam}*y"),
                            (0.0, 0.0), (0.0, 1.0), (1.0, 0.0), **kwargs)


class TestNormalize:
    def test_linear_chart_frame(self):
        chart = linear_saddle(1.5)
        assert chart.lam == pytest.approx(1.5, rel=1e-15)
        assert chart.corner == (0.0, 0.0)
        assert chart.linear == ((1.0, 0.0), (0.0, 1.0))
        assert chart.p_poly.evaluate(0.1, 0.2) == pytest.approx(1.0)
        assert chart.q_poly.evaluate(0.1, 0.2) == pytest.approx(-1.5)

    def test_shifted_corner_roundtrip(self):
        chart = normalize_saddle(poly("x - 1"), poly("-2*(y - 2)"),
                                 (1.0, 2.0), (0.0, 1.0), (1.0, 0.0))
        assert chart.lam == pytest.approx(2.0)
        np.testing.assert_allclose(chart.to_local((1.3, 2.4)), [0.3, 0.4], atol=1e-15)
        np.testing.assert_allclose(chart.to_model(chart.to_local((1.3, 2.4))),
                                   [1.3, 2.4], atol=1e-15)

    def test_swapped_axes(self):
        # stable separatrix on the x-axis: local u is the model y
        chart = normalize_saddle(poly("-x"), poly("2*y"),
                                 (0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
        assert chart.lam == pytest.approx(0.5)
        np.testing.assert_allclose(chart.to_local((0.3, 0.4)), [0.4, 0.3], atol=1e-15)

    def test_same_axis_rejected(self):
        with pytest.raises(UnsupportedGeometryError, match="same axis"):
            normalize_saddle(poly("x"), poly("-y"),
                             (0.0, 0.0), (0.0, 1.0), (0.0, -1.0))

    def test_oblique_direction_rejected(self):
        d = math.sqrt(0.5)
        with pytest.raises(UnsupportedGeometryError, match="not axis-parallel"):
            normalize_saddle(poly("x"), poly("-y"),
                             (0.0, 0.0), (d, d), (1.0, 0.0))

    def test_missing_invariant_line(self):
        with pytest.raises(UnsupportedGeometryError, match="is not invariant"):
            normalize_saddle(poly("x + 0.5"), poly("-y"),
                             (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))

    def test_zero_eigenvalue(self):
        with pytest.raises(DegeneracyError, match="not hyperbolic"):
            normalize_saddle(poly("x"), poly("-y*y"),
                             (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))

    def test_node_rejected(self):
        with pytest.raises(DegeneracyError, match="not a saddle"):
            normalize_saddle(poly("x"), poly("y"),
                             (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))

    def test_traversal_against_flow(self):
        # incoming along the expanding axis: orientation is backwards
        with pytest.raises(UnsupportedGeometryError, match="unstable axis"):
            normalize_saddle(poly("x"), poly("-y"),
                             (0.0, 0.0), (1.0, 0.0), (0.0, 1.0))

    def test_footprint_guard(self):
        # P(x,0) = 1 - x changes sign inside the requested footprint
        with pytest.raises(UnsupportedGeometryError, match="footprint too large"):
            normalize_saddle(poly("x*(1 - x)"), poly("-y"),
                             (0.0, 0.0), (0.0, 1.0), (1.0, 0.0), footprint=1.2)


class TestSections:
    def test_default_geometry(self):
        sec = SectionPair.default(h=0.25)
        assert sec.sigma1(0.1) == (0.1, 0.25)
        assert sec.sigma2(0.1) == (0.25, 0.1)

    def test_jets(self):
        sec = SectionPair.make([0.0, 2.0], [1.0], [1.0], [0.0, 3.0])
        assert sec.jet(1, 1, 1) == 2.0
        assert sec.jet(1, 2, 0) == 1.0
        assert sec.jet(2, 1, 0) == 1.0
        assert sec.jet(2, 2, 1) == 3.0
        # derivatives beyond the stored degree vanish
        assert sec.jet(1, 1, 5) == 0.0
        # jet(k) carries the k! factor of a true derivative
        quad = SectionPair.make([0.0, 1.0, 0.7], [1.0], [1.0], [0.0, 1.0])
        assert quad.jet(1, 1, 2) == pytest.approx(1.4)

    def test_sigma1_anchor_must_sit_on_stable_axis(self):
        with pytest.raises(ModelError, match="sigma1\\(0\\) must lie"):
            SectionPair.make([0.1, 1.0], [1.0], [1.0], [0.0, 1.0])
        with pytest.raises(ModelError, match="sigma1\\(0\\) must lie"):
            SectionPair.make([0.0, 1.0], [-1.0], [1.0], [0.0, 1.0])

    def test_sigma2_anchor_must_sit_on_unstable_axis(self):
        with pytest.raises(ModelError, match="sigma2\\(0\\) must lie"):
            SectionPair.make([0.0, 1.0], [1.0], [0.0], [0.0, 1.0])

    def test_orientation_into_interior(self):
        with pytest.raises(ModelError, match="sigma1 must point into the interior"):
            SectionPair.make([0.0, -1.0], [1.0], [1.0], [0.0, 1.0])
        with pytest.raises(ModelError, match="sigma2 must point into the interior"):
            SectionPair.make([0.0, 1.0], [1.0], [1.0], [0.0, -2.0])


class TestClassify:
    def test_plain_cases(self):
        assert classify_ratio(0.3) == "below-one"
        assert classify_ratio(1.5) == "above-one"
        assert classify_ratio(1.0) == "at-one"

    def test_dead_band(self):
        assert classify_ratio(1.0 + 5e-10) == "at-one"
        assert classify_ratio(1.0 - 5e-10) == "at-one"
        assert classify_ratio(1.0 + 2e-9) == "above-one"


class TestLinearClosedForms:
    """x' = x, y' = -lam*y: D00 = h1 * h2**-lam exactly, S1 = S2 = 0."""

    def test_above_one(self):
        exp = dulac_coefficients(linear_saddle(1.5))
        assert exp.case == "above-one"
        assert exp.ratio == pytest.approx(1.5, rel=1e-15)
        assert exp.leading == pytest.approx(math.sqrt(2.0), rel=1e-12)
        assert exp.s1 == pytest.approx(0.0, abs=1e-12)
        assert exp.s2 == pytest.approx(0.0, abs=1e-12)
        assert exp.next_exponent == 1.0
        assert exp.d10 == pytest.approx(0.0, abs=1e-12)
        assert exp.d01 is None

    def test_below_one(self):
        exp = dulac_coefficients(linear_saddle(0.4))
        assert exp.case == "below-one"
        assert exp.leading == pytest.approx(0.5 ** 0.6, rel=1e-12)
        assert exp.s1 == pytest.approx(0.0, abs=1e-12)
        assert exp.s2 == pytest.approx(0.0, abs=1e-12)
        assert exp.next_exponent == pytest.approx(0.4)
        assert exp.d01 == pytest.approx(0.0, abs=1e-12)
        assert exp.d10 is None

    def test_section_height_scaling(self):
        sec = SectionPair.make([0.0, 1.0], [0.3], [0.7], [0.0, 1.0])
        exp = dulac_coefficients(linear_saddle(1.5), sec)
        assert exp.leading == pytest.approx(0.3 * 0.7 ** -1.5, rel=1e-12)

    def test_curved_sections(self):
        # sigma1 = (2s, 1), sigma2 = (1, 3s) at lam = 2: D00 = 2**2 / 3
        sec = SectionPair.make([0.0, 2.0], [1.0], [1.0], [0.0, 3.0])
        exp = dulac_coefficients(linear_saddle(2.0), sec)
        assert exp.leading == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_transition_factors_trivial(self):
        value, series = transition_L(linear_saddle(1.5), 1, 0.5)
        assert value == pytest.approx(1.0, rel=1e-12)
        assert series.coeffs[0] == pytest.approx(1.0)
        np.testing.assert_allclose(series.coeffs[1:], 0.0, atol=1e-15)

    def test_resonant_corner(self):
        exp = dulac_coefficients(linear_saddle(1.0))
        assert exp.case == "at-one"
        assert exp.leading == pytest.approx(1.0, rel=1e-12)
        assert exp.next_exponent is None
        assert exp.s1 is None and exp.s2 is None
        assert exp.d10 is None and exp.d01 is None
        assert any("leading term only" in note for note in exp.notes)


@pytest.fixture(scope="module")
def quad_expansion():
    chart = normalize_saddle(poly("x*(1 + 0.3*x - 0.2*y)"),
                             poly("-y*(2 - 0.1*x + 0.4*y)"),
                             (0.0, 0.0), (0.0, 1.0), (1.0, 0.0))
    return dulac_coefficients(chart, SectionPair.default())


class TestQuadraticSaddle:
    """Frozen values for a saddle with quadratic corrections (lam = 2)."""

    def test_frozen_coefficients(self, quad_expansion):
        assert quad_expansion.ratio == pytest.approx(2.0, rel=1e-15)
        assert quad_expansion.leading == pytest.approx(2.290197411685132, rel=1e-10)
        assert quad_expansion.s1 == pytest.approx(-0.326986673475821, rel=1e-10)

    def test_second_coefficient_ties_to_s1(self, quad_expansion):
        assert quad_expansion.next_exponent == 1.0
        assert quad_expansion.next_coeff == pytest.approx(
            quad_expansion.ratio * quad_expansion.leading * quad_expansion.s1,
            rel=1e-14)

    def test_integer_ratio_pole(self, quad_expansion):
        # alpha = lam = 2 sits on a Mellin pole, so S2 is withheld
        assert quad_expansion.s2 is None
        assert any(note.startswith("S2 unavailable") for note in quad_expansion.notes)


class TestMellin:
    """The transform solves x*g' - alpha*g = f with g smooth at 0."""

    @staticmethod
    def monomial(k, order=12):
        coeffs = [0.0] * (order + 1)
        coeffs[k] = 1.0
        return Germ(fun=lambda s, k=k: s ** k, series=PowerSeries(coeffs))

    def test_monomial_solutions(self):
        g = self.monomial(2)
        assert mellin_hat(g, 0.5, 0.3) == pytest.approx(0.3 ** 2 / 1.5, rel=1e-12)
        assert mellin_hat(g, 1.7, 0.4) == pytest.approx(0.4 ** 2 / 0.3, rel=1e-12)
        assert mellin_hat(g, -0.5, 0.3) == pytest.approx(0.3 ** 2 / 2.5, rel=1e-12)

    def test_defining_ode(self):
        coeffs = [1.0 / math.factorial(k) for k in range(13)]
        germ = Germ(fun=math.exp, series=PowerSeries(coeffs))
        alpha, x, h = 0.37, 0.4, 1e-5
        deriv = (mellin_hat(germ, alpha, x + h)
                 - mellin_hat(germ, alpha, x - h)) / (2.0 * h)
        assert x * deriv - alpha * mellin_hat(germ, alpha, x) == pytest.approx(
            math.exp(x), rel=1e-6)

    def test_pole_guards(self):
        g = self.monomial(2)
        with pytest.raises(PoleError, match="pole at 1"):
            mellin_hat(g, 1.0 + 5e-7, 0.3)
        with pytest.raises(PoleError, match="pole at 0"):
            mellin_hat(g, 3e-7, 0.3)
        # negative integers are not poles of the smooth solution
        assert mellin_hat(g, -1.0, 0.3) == pytest.approx(0.3 ** 2 / 3.0, rel=1e-12)

    def test_domain_guard(self):
        with pytest.raises(ValueError, match="expects x > 0"):
            mellin_hat(self.monomial(2), 0.5, 0.0)


# frozen via a direct run of the closed-form route; the numeric
# cross-check of these numbers lives in the flow and pipeline tests
GAME_CORNERS = [
    (1, (0.0, 1.0), "below-one", 0.2962962962962963, 0.016677480416609002,
     -2.3001054272471, -11.373936061515591),
    (2, (0.0, 0.0), "above-one", 1.5, 230.40973358326647,
     -5.173622426086253, -0.47944856811444964),
    (3, (1.0, 0.0), "above-one", 1.5, 169.4306590484169,
     -34.35798143767758, 5.557386105238646),
    (4, (1.0, 1.0), "above-one", 1.5, 0.002193789320397522,
     5.020519411935063, -2260.2814033119475),
]


class TestFourSaddleCorners:
    @pytest.mark.parametrize("idx, corner, case, ratio, leading, s1, s2",
                             GAME_CORNERS)
    def test_frozen_expansions(self, game_corners, idx, corner, case,
                               ratio, leading, s1, s2):
        cd = game_corners[idx - 1]
        assert cd.index == idx
        assert cd.corner == corner
        exp = cd.expansion
        assert exp.case == case
        assert exp.ratio == pytest.approx(ratio, rel=1e-12)
        assert exp.leading == pytest.approx(leading, rel=1e-9)
        assert exp.s1 == pytest.approx(s1, rel=1e-9)
        assert exp.s2 == pytest.approx(s2, rel=1e-9)

    def test_second_coefficients_follow_case(self, game_corners):
        for cd in game_corners:
            exp = cd.expansion
            if exp.case == "above-one":
                assert exp.next_coeff == pytest.approx(
                    exp.ratio * exp.leading * exp.s1, rel=1e-12)
            else:
                assert exp.next_coeff == pytest.approx(
                    -(exp.leading ** 2) * exp.s2, rel=1e-12)

    def test_chart_frames_roundtrip(self, game_corners):
        rng = np.random.default_rng(7)
        for cd in game_corners:
            pts = np.asarray(cd.corner) + rng.uniform(-0.2, 0.2, size=(5, 2))
            for pt in pts:
                np.testing.assert_allclose(cd.chart.to_model(cd.chart.to_local(pt)),
                                           pt, atol=1e-14)
            # the linear part is a signed permutation, hence an isometry
            lin = np.asarray(cd.chart.linear)
            np.testing.assert_allclose(lin @ lin.T, np.eye(2), atol=1e-15)

    def test_graphic_number(self, game_corners):
        r = math.prod(cd.expansion.ratio for cd in game_corners)
        assert r == pytest.approx(1.0, abs=1e-12)
