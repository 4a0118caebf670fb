"""End-to-end pipeline drivers on the bundled models.

Expected numbers are frozen outputs of the closed-form chain; the oracle
drivers are checked for internal consistency (per-sample gaps, pinned
fits) rather than re-deriving the integration here.
"""

import hashlib
import math

import pytest

from polycycles.errors import ModelError
from polycycles.pipeline import analyze, oracle_cycles, oracle_dulac, oracle_return, scan
from polycycles.resultdoc import dumps, loads


@pytest.fixture(scope="module")
def game_doc(game_mf):
    return analyze(game_mf)


@pytest.fixture(scope="module")
def integrable_doc(integrable_mf):
    return analyze(integrable_mf)


@pytest.fixture(scope="module")
def dulac_doc(game_mf):
    return oracle_dulac(game_mf, 1)


@pytest.fixture(scope="module")
def return_doc(game_mf):
    return oracle_return(game_mf)


def prune(node):
    """Drop empty containers, which the line format cannot represent."""
    if isinstance(node, dict):
        out = {}
        for key, value in node.items():
            if isinstance(value, (dict, list)):
                kept = prune(value)
                if kept:
                    out[key] = kept
            else:
                out[key] = value
        return out
    if isinstance(node, list):
        return [prune(v) if isinstance(v, (dict, list)) else v for v in node]
    return node


class TestAnalyzeGame:
    def test_verdict(self, game_doc):
        v = game_doc["verdict"]
        assert (v["lower"], v["upper"]) == (2, 2)
        assert v["summary"] == "cyclicity in [2, 2]"
        assert v["consistent"] is True

    def test_fired_criteria(self, game_doc):
        fired = {it["label"] for it in game_doc["verdict"]["items"] if it["fired"]}
        assert fired == {"return.b", "return.d", "refined.a",
                         "displacement.b", "displacement.d", "displacement.e"}

    def test_return_block(self, game_doc):
        ret = game_doc["return"]
        assert ret["pattern"] == "below-then-above"
        assert ret["split"] == 1
        assert ret["kind"] == "A"
        assert ret["ratio"] == pytest.approx(1.0, abs=1e-12)
        assert ret["leading"] == pytest.approx(1.0, rel=1e-12)
        assert ret["second_exponent"] == pytest.approx(8 / 27, rel=1e-15)
        assert ret["second_coeff"] == pytest.approx(0.34899393115700983, rel=1e-9)
        assert ret["second_scale"] == pytest.approx(0.05628649640605542, rel=1e-9)

    def test_displacement_block(self, game_doc):
        disp = game_doc["displacement"]
        assert disp["rotation"] == 1 and disp["split"] == 3
        assert disp["alpha"] == pytest.approx(0.0, abs=1e-12)
        assert disp["exponents"] == [3.375, 3.375]
        assert disp["psi1"] == pytest.approx(0.0, abs=1e-12)
        assert abs(disp["psi2"]) < 1e-8
        assert disp["psi3"] == pytest.approx(20940989.674412705, rel=1e-9)

    def test_probe_sees_non_identity(self, game_doc):
        assert game_doc["probe"]["not_identity"] is True
        assert game_doc["probe"]["error"] is None

    def test_gradients(self, game_doc):
        grads = game_doc["gradients"]
        assert sorted(grads) == ["leading", "psi1", "psi2", "psi3", "ratio", "second"]
        # r = l1 * (3/2)^3, so dr/dl1 = 27/8 and dr/dm1 = 0
        assert grads["ratio"]["l1"] == pytest.approx(3.375, rel=1e-6)
        assert abs(grads["ratio"]["m1"]) < 1e-9
        assert grads["psi3"]["m1"] == pytest.approx(25203043.77850661, rel=1e-4)

    def test_parameters_and_provenance(self, game_doc, game_mf):
        assert game_doc["parameters"] == {
            "l1": 8 / 27, "l2": 1.5, "l3": 1.5, "l4": 1.5, "m1": 1625 / 162}
        prov = game_doc["provenance"]
        assert prov["input_sha256"] == hashlib.sha256(game_mf.text.encode()).hexdigest()
        assert prov["model_path"].endswith("four_saddle.model")
        assert prov["tolerances"]["zero_tol"] == 1e-9

    def test_corner_blocks(self, game_doc):
        corners = game_doc["corners"]
        assert [c["case"] for c in corners] == [
            "below-one", "above-one", "above-one", "above-one"]
        assert corners[0]["ratio"] == pytest.approx(8 / 27, rel=1e-12)
        assert corners[0]["leading"] == pytest.approx(0.016677480416609002, rel=1e-9)
        assert corners[0]["s1"] == pytest.approx(-2.3001054272471, rel=1e-9)
        assert all(c["h_in"] == 0.5 and c["h_out"] == 0.5 for c in corners)

    def test_document_round_trips(self, game_doc):
        assert loads(dumps(game_doc)) == prune(game_doc)


class TestAnalyzeIntegrable:
    def test_return_is_identity(self, integrable_doc):
        ret = integrable_doc["return"]
        assert ret["pattern"] == "above-then-below"
        assert ret["kind"] == "A"
        assert ret["ratio"] == pytest.approx(1.0, abs=1e-12)
        assert ret["leading"] == pytest.approx(1.0, rel=1e-12)
        assert ret["second_coeff"] == 0.0

    def test_verdict_is_open(self, integrable_doc):
        v = integrable_doc["verdict"]
        assert v["lower"] == 0 and v["upper"] is None
        assert v["summary"] == "cyclicity in [0, inf]"
        assert not any(it["fired"] for it in v["items"])
        assert v["notes"][0].startswith("identity probe inconclusive")

    def test_probe_inconclusive(self, integrable_doc):
        # the flow really is periodic, so displacement sits below tolerance
        assert integrable_doc["probe"]["not_identity"] is None


class TestOracleDulac:
    def test_integration_matches_closed_form(self, dulac_doc):
        assert dulac_doc["deviation"]["leading"] < 1e-4
        assert dulac_doc["deviation"]["leading"] == pytest.approx(
            1.7699143439040199e-06, rel=1e-3)
        assert dulac_doc["deviation"]["exponent"] < 0.01

    def test_closed_form_echo(self, dulac_doc):
        assert dulac_doc["closed_form"]["ratio"] == pytest.approx(8 / 27, rel=1e-12)
        assert dulac_doc["closed_form"]["leading"] == pytest.approx(
            0.016677480416609002, rel=1e-9)

    def test_samples_clean(self, dulac_doc):
        assert len(dulac_doc["samples"]) == 13
        assert all(row["error"] is None for row in dulac_doc["samples"])
        assert dulac_doc["fit_pinned"]["rel_residual"] < 1e-7

    def test_corner_index_guard(self, game_mf):
        with pytest.raises(ModelError, match="out of range 1..4"):
            oracle_dulac(game_mf, 0)
        with pytest.raises(ModelError, match="out of range 1..4"):
            oracle_dulac(game_mf, 5)


class TestOracleReturn:
    def test_closed_form_echo(self, return_doc):
        cf = return_doc["closed_form"]
        assert cf["kind"] == "A"
        assert cf["second_coeff"] == pytest.approx(0.34899393115700983, rel=1e-9)

    def test_section(self, return_doc):
        assert return_doc["section"]["anchor"] == [0.5, 1.0]
        assert return_doc["section"]["direction"] == [0.0, -1.0]
        assert return_doc["section"]["window"][1] == pytest.approx(0.45)

    def test_gap_columns(self, return_doc):
        rows = return_doc["samples"]
        assert all(row["error"] is None for row in rows)
        for row in rows:
            assert row["gap"] == pytest.approx(row["value"] - row["two_term"],
                                               abs=1e-15)
        # the omitted tail decays faster than s, so the relative gap shrinks
        rel = [abs(r["gap"]) / r["s"] for r in rows]
        assert rel[-1] < 0.25 * rel[0]


class TestOracleCycles:
    def test_circle_has_one_stable_cycle(self, circle_mf):
        doc = oracle_cycles(circle_mf, (0.3, 2.0),
                            tol_overrides={"samples": 25, "rtol": 1e-9})
        assert doc["range"] == [0.3, 2.0]
        assert doc["warnings"] == []
        assert len(doc["cycles"]) == 1
        assert doc["cycles"][0]["s"] == pytest.approx(1.0, abs=1e-8)
        assert doc["cycles"][0]["stability"] == "stable"

    def test_empty_clip_rejected(self, circle_mf):
        with pytest.raises(ModelError, match="empty after clipping"):
            oracle_cycles(circle_mf, (3.0, 5.0))


class TestScan:
    def test_ratio_sign_change_along_l1(self, game_mf):
        header, rows = scan(game_mf, {"l1": (0.28, 0.31, 11)})
        assert header == ["l1", "r_minus_1", "leading_minus_1", "second",
                          "psi1", "psi2", "psi3", "error"]
        assert len(rows) == 11
        signs = "".join("+" if row[1] > 0 else "-" for row in rows)
        assert signs == "------+++++"
        # r - 1 = 27/8 * l1 - 1 on this slice
        assert rows[0][1] == pytest.approx(3.375 * 0.28 - 1.0, rel=1e-9)
        assert all(row[-1] is None for row in rows)

    def test_failing_point_reports_error(self, game_mf):
        header, rows = scan(game_mf, {"l1": (0.0, 0.3, 2)})
        bad, good = rows
        assert bad[0] == 0.0
        assert all(math.isnan(v) for v in bad[1:-1])
        assert "not hyperbolic" in bad[-1]
        assert good[-1] is None and not math.isnan(good[1])

    def test_grid_guards(self, game_mf):
        with pytest.raises(ModelError, match="not declared by the model"):
            scan(game_mf, {"qq": (0.0, 1.0, 3)})
        with pytest.raises(ModelError, match="count must be >= 1"):
            scan(game_mf, {"l1": (0.0, 1.0, 0)})
        with pytest.raises(ModelError, match="the limit is 10"):
            scan(game_mf, {"l1": (0.0, 1.0, 4), "l2": (0.0, 1.0, 4)},
                 max_points=10)
        with pytest.raises(ModelError, match="empty grid"):
            scan(game_mf, {})
