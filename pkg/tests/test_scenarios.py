import pytest

from slowosc import io
from slowosc.feedback import FeedbackConstructionError, HppParams, multiscale_params
from slowosc.scenarios import (SCENARIOS, ScenarioReport, run_scenario, scenario_ky_coexistence,
                               scenario_multiscale, scenario_prop42_timeline,
                               scenario_two_sops_stable_zero)

from conftest import EXAMPLE, LONG


def test_report_pass_logic():
    rep = ScenarioReport("demo", {"x": 0.1})
    rep.check("first", True, "1", 1)
    assert rep.passed
    rep.check("second", False, "> 2", 1.5)
    assert not rep.passed
    assert [a.description for a in rep.failed()] == ["second"]
    text = rep.to_text()
    assert "status: FAIL" in text and "[FAIL] second" in text and "x = 0.10000000000000001" in text


def test_registry():
    assert set(SCENARIOS) == {"prop42_timeline", "long_period", "two_sops_stable_zero", "two_sops_hpp",
                              "ky_coexistence", "ky_stable_zero", "multiscale"}
    with pytest.raises(ValueError, match="unknown scenario"):
        run_scenario("nope")


class TestTimeline:
    @pytest.fixture(scope="class")
    @staticmethod
    def rep(tmp_path_factory):
        return scenario_prop42_timeline(EXAMPLE, -2.0, out_dir=tmp_path_factory.mktemp("tl"))

    def test_all_pass(self, rep):
        assert rep.passed, rep.to_text()

    def test_timeline_values(self, rep):
        v = rep.values
        assert v["tau2"] - v["tau1"] == pytest.approx(0.5, abs=2e-3)
        assert v["bound"] == pytest.approx(2.825)
        assert v["tau3"] > 2.825 and 2 * v["tau3"] > 4

    def test_artifacts_exist(self, rep):
        names = sorted(p.rsplit("/", 1)[-1] for p in rep.artifacts)
        assert names == ["sop.txt", "sop_segment.txt", "sop_trace.csv", "trace.csv", "trace.svg", "zeros.csv"]

    def test_long_period(self):
        rep = scenario_prop42_timeline(LONG, -2.0, n_random=1)
        assert rep.passed, rep.to_text()
        assert rep.values["tau3"] > 12 and rep.values["sop"].period > 24

    def test_invalid_params_rejected(self):
        with pytest.raises(FeedbackConstructionError):
            scenario_prop42_timeline(HppParams(1.0, 0.05, 2 / 3, 3.0))


class TestMultiscale:
    def test_two_scales(self):
        rep = scenario_multiscale((5, 1))
        assert rep.passed, rep.to_text()
        amps = [s.amplitude for s in rep.values["sops"]]
        assert 3.75 < amps[0] < 5 and 0.75 < amps[1] < 1

    def test_three_scales(self):
        rep = scenario_multiscale((64, 8, 1))
        assert rep.passed and len(rep.values["sops"]) == 3

    def test_single_scale_matches_timeline(self):
        ms = scenario_multiscale((5,), slope0=-2.0)
        tl = scenario_prop42_timeline(multiscale_params([5])[0], -2.0, n_random=0)
        a, b = ms.values["sops"][0], tl.values["sop"]
        assert a.same_orbit(b, 1e-6)

    def test_missing_scale_named(self):
        # both seeds in the outer funnel: the inner scale goes unfound
        rep = scenario_multiscale((5, 1), seeds=(4.375, 4.0))
        assert not rep.passed
        assert [a.description for a in rep.failed()] == [
            "number of distinct SOPs equals number of scales", "scale 2: SOP with amplitude in (3a, gamma)"]

    def test_ratio_violation(self):
        with pytest.raises(FeedbackConstructionError):
            scenario_multiscale((5, 2))


def test_reproducible_artifacts(tmp_path):
    r1 = scenario_multiscale((5, 1), out_dir=tmp_path / "a")
    r2 = scenario_multiscale((5, 1), out_dir=tmp_path / "b")
    assert r1.assertions == r2.assertions
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_two_sops_rejects_unstable_slope():
    with pytest.raises(ValueError, match="stable"):
        scenario_two_sops_stable_zero(slope0=-2.0)


def test_two_sops_unknown_variant():
    with pytest.raises(ValueError, match="variant"):
        scenario_two_sops_stable_zero("other")


@pytest.mark.slow
class TestKYScenario:
    def test_coexistence(self, tmp_path):
        rep = scenario_ky_coexistence(out_dir=tmp_path)
        assert rep.passed, rep.to_text()
        assert 1.95 < rep.values["ky"].u0 < 3
        _, phase_p = io.read_csv(tmp_path / "phase_p.csv")
        assert phase_p.shape[1] == 3

    def test_stable_zero_two_roots(self):
        rep = run_scenario("ky_stable_zero")
        assert rep.passed, rep.to_text()
        roots = rep.values["ky_roots"]
        assert len(roots) == 2 and roots[0] < 1.95 < roots[1]


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["plateau", "hpp"])
def test_two_sops_witness(variant):
    rep = scenario_two_sops_stable_zero(variant)
    failed = [a.description for a in rep.failed()]
    # a single double-precision orbit cannot linger 50 time units near the
    # boundary; everything else, edge tracking included, must hold
    assert failed == ["boundary orbit stays in the band for >= 50 time units"]
    w, et = rep.values["witness"], rep.values["edge"]
    assert 0 < w.s_star < 1 and w.bracket_width < 2.0 ** -20
    assert w.persistence > 30
    assert et.persistence >= 50 and et.max_jump < 1e-9
