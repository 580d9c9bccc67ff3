"""Deterministic log-time trajectories, invasion phases and early termination."""

import math

import pytest

import valleycross as vc
from valleycross.errors import ModelError


def mk(cfg):
    return vc.load_model(cfg)


class TestFixedPoint:
    def test_certified_profile_is_stationary(self, ex1, esc1):
        trajectory = vc.run_lnk(ex1, esc1.beta_profile)
        assert trajectory.termination.kind == "esc_reached"
        assert trajectory.termination.resident == frozenset({"0"})
        for w, value in esc1.beta_profile.items():
            assert trajectory.final_beta[w] == pytest.approx(value, abs=1e-12)

    def test_phase_has_zero_growth_for_residents(self, ex1, esc1):
        trajectory = vc.run_lnk(ex1, esc1.beta_profile)
        phase = trajectory.phases[0]
        assert phase.sources["0"][2] == 0.0  # resident slope is a structural zero


class TestCycleExample:
    """Re-invasion loop: the resident returns after two substitutions."""

    def test_phase_sequence(self, ex5):
        trajectory = vc.run_lnk(ex5, {"2": 1.0, "4": 2.0 / 3.0})
        residents = [p.residents for p in trajectory.phases]
        assert residents == [
            frozenset({"2"}),
            frozenset({"4"}),
            frozenset({"5"}),
            frozenset({"2"}),
        ]
        assert trajectory.phases[0].t_end == pytest.approx(2.0 / 3.0)
        assert trajectory.phases[1].t_end == pytest.approx(2.0)
        assert trajectory.phases[3].t_end == math.inf

    def test_final_profile(self, ex5):
        trajectory = vc.run_lnk(ex5, {"2": 1.0, "4": 2.0 / 3.0})
        assert trajectory.termination.kind == "esc_reached"
        assert trajectory.termination.resident == frozenset({"2"})
        expected = {"0": 0.0, "1": 0.0, "2": 1.0, "3": 1.0 / 3.0, "4": 0.0, "5": 0.0}
        for w, value in expected.items():
            assert trajectory.final_beta[w] == pytest.approx(value, abs=1e-9)

    def test_envelope_evaluation(self, ex5):
        trajectory = vc.run_lnk(ex5, {"2": 1.0, "4": 2.0 / 3.0})
        beta = trajectory.beta_at(1.0)  # inside the second phase
        assert beta["4"] == pytest.approx(1.0)
        assert trajectory.residents_at(1.0) == frozenset({"4"})
        assert trajectory.residents_at(0.1) == frozenset({"2"})


class TestFixationOutcomes:
    def test_branching_example(self, ex1, esc1):
        assert vc.esc_after_fixation(ex1, esc1, "2a") == frozenset({"2a"})
        # fixation of the branch trait drags the whole tail behind it
        assert vc.esc_after_fixation(ex1, esc1, "2b") == frozenset({"3b"})

    def test_two_routes_same_outcome(self, ex3):
        esc = vc.certify_esc(ex3, {"0"})
        assert vc.esc_after_fixation(ex3, esc, "2a") == frozenset({"4"})
        assert vc.esc_after_fixation(ex3, esc, "2b") == frozenset({"4"})

    def test_plain_substitution(self, ex9):
        esc = vc.certify_esc(ex9, {"0"})
        assert vc.esc_after_fixation(ex9, esc, "3") == frozenset({"3"})

    def test_cycle_returns_to_start(self, ex5):
        esc = vc.certify_esc(ex5, {"2"})
        assert vc.esc_after_fixation(ex5, esc, "4") == frozenset({"2"})

    def test_non_candidate_rejected(self, ex1, esc1):
        with pytest.raises(ModelError):
            vc.esc_after_fixation(ex1, esc1, "3b")


class TestInputValidation:
    def test_exponent_out_of_range(self, ex1):
        with pytest.raises(ModelError):
            vc.run_lnk(ex1, {"0": 1.2})

    def test_no_macroscopic_trait(self, ex1):
        with pytest.raises(ModelError):
            vc.run_lnk(ex1, {"0": 0.5})

    def test_unknown_trait(self, ex1):
        with pytest.raises(ModelError):
            vc.run_lnk(ex1, {"zz": 1.0})


class TestDegenerateTermination:
    def test_simultaneous_invasions(self):
        model = mk(
            {
                "vertices": ["0", "x", "y"],
                "edges": [
                    {"from": "0", "to": "x", "m": 0.5},
                    {"from": "0", "to": "y", "m": 0.5},
                ],
                "birth": {"0": 2.0, "x": 2.0, "y": 2.0},
                "death": {"0": 1.0, "x": 0.5, "y": 0.5},
                "competition": {"equal": 1.0},
                "alpha": 1.5,
            }
        )
        trajectory = vc.run_lnk(model, {"0": 1.0, "x": 2 / 3, "y": 2 / 3})
        assert trajectory.termination.kind == "criterion_a"
        assert trajectory.termination.time == pytest.approx(2 / 3)

    def test_no_unique_stable_support(self):
        # bistable pair: both single-trait equilibria qualify
        model = mk(
            {
                "vertices": ["0", "1"],
                "edges": [],
                "birth": {"0": 2.0, "1": 2.1},
                "death": {"0": 1.0, "1": 1.0},
                "competition": {
                    "0": {"0": 1.0, "1": 2.0},
                    "1": {"0": 2.0, "1": 1.0},
                },
                "alpha": 1.5,
            }
        )
        trajectory = vc.run_lnk(model, {"0": 1.0, "1": 1.0})
        assert trajectory.termination.kind == "criterion_b"
        assert trajectory.termination.time == 0.0
        assert trajectory.phases == ()

    def test_extinction_at_invasion_time(self):
        model = mk(
            {
                "vertices": ["0", "x", "z"],
                "edges": [{"from": "0", "to": "x", "m": 1.0}],
                "birth": {"0": 2.0, "x": 2.0, "z": 2.0},
                "death": {"0": 1.0, "x": 0.5, "z": 1.5},
                "competition": {"equal": 1.0},
                "alpha": 1.5,
            }
        )
        trajectory = vc.run_lnk(model, {"0": 1.0, "x": 2 / 3, "z": 1 / 3})
        assert trajectory.termination.kind == "criterion_c"
        assert trajectory.termination.time == pytest.approx(2 / 3)
        assert "z" in trajectory.termination.detail

    def test_trait_birth_at_invasion_time(self):
        model = mk(
            {
                "vertices": ["0", "x", "w", "y"],
                "edges": [
                    {"from": "0", "to": "x", "m": 0.5},
                    {"from": "0", "to": "w", "m": 0.5},
                    {"from": "w", "to": "y", "m": 1.0},
                ],
                "birth": {"0": 2.0, "x": 2.0, "w": 2.0, "y": 2.0},
                "death": {"0": 1.0, "x": 0.5, "w": 0.5, "y": 2.9},
                "competition": {"equal": 1.0},
                "alpha": 1.5,
            }
        )
        trajectory = vc.run_lnk(model, {"0": 1.0, "x": 2 / 3, "w": 1 / 3})
        assert trajectory.termination.kind == "criterion_d"
        assert trajectory.termination.time == pytest.approx(2 / 3)

    def test_phase_cap(self, ex5):
        trajectory = vc.run_lnk(ex5, {"2": 1.0, "4": 2.0 / 3.0}, max_phases=1)
        assert trajectory.termination.kind == "horizon"


class TestSerialization:
    def test_dict_and_csv(self, ex5):
        trajectory = vc.run_lnk(ex5, {"2": 1.0, "4": 2.0 / 3.0})
        doc = trajectory.to_dict()
        assert doc["termination"]["kind"] == "esc_reached"
        assert doc["phases"][0]["residents"] == ["2"]
        csv = trajectory.to_csv()
        assert csv.splitlines()[0] == "t,0,1,2,3,4,5"
        trajectory.to_json()
