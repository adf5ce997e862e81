"""Payoff model: fitting, boundary heuristics, and display simulation."""

import math
from datetime import date

import numpy as np
import pytest

from pickupgame.core import FlowDistribution
from pickupgame.counterfactual import (
    CounterfactualModel,
    DistrictFit,
    fit,
    load_model,
    model_from_json,
    model_to_json,
    payload_from_json,
    payload_to_json,
    pickup_probability,
    predict_pickups,
    save_model,
    simulate_hypothetical_outcomes,
    summarize_display,
)
from pickupgame.pipeline import CandidateDriver, DecisionScenario


def make_scenario(weights, day=date(2014, 7, 22)):
    candidates = tuple(
        CandidateDriver(
            taxi_id=f"veh-{i:03d}",
            origin_ca=24,
            classification="no_pickup",
            decision_weights=tuple(w),
        )
        for i, w in enumerate(weights)
    )
    flow = [0.0, 0.0, 0.0]
    for w in weights:
        flow[int(np.argmax(w))] += 1
    return DecisionScenario(
        day=day,
        candidates=candidates,
        total_drivers=len(candidates),
        deduced_flow=FlowDistribution(tuple(flow)),
        historical_pickups=(1, 1, 1),
    )


def flat_model(intercept=0.0, slope=1.0, sigma=1e-6, lo=1.0, hi=1000.0):
    return CounterfactualModel(
        districts=tuple(
            DistrictFit(intercept=intercept, slope=slope, flow_min=lo, flow_max=hi)
            for _ in range(3)
        ),
        sigma=sigma,
    )


class TestFit:
    def test_perfect_log_linear_fit(self):
        flows = [(10.0, 20.0, 30.0), (20.0, 40.0, 60.0), (40.0, 80.0, 120.0)]
        training = [(f, f) for f in flows]  # pickups equal flow exactly
        model = fit(training, shrinkage="none")
        for d in model.districts:
            assert d.intercept == pytest.approx(0.0, abs=1e-9)
            assert d.slope == pytest.approx(1.0, abs=1e-9)
        assert model.sigma < 1e-6

    def test_bounds_are_observed_min_max(self):
        flows = [(10.0, 5.0, 7.0), (20.0, 9.0, 8.0), (40.0, 13.0, 9.0)]
        training = [(f, (4.0, 3.0, 2.0)) for f in flows]
        model = fit(training, shrinkage="none")
        assert model.districts[0].flow_min == 10.0
        assert model.districts[0].flow_max == 40.0
        assert model.districts[1].flow_max == 13.0

    def test_shrinkage_noop_for_identical_districts(self):
        rng = np.random.default_rng(0)
        flows = rng.uniform(20, 200, 30)
        pickups = np.exp(0.4 + 0.7 * np.log(flows) + rng.normal(0, 0.1, 30))
        training = [
            ((f, f, f), (p, p, p)) for f, p in zip(flows, pickups)
        ]
        pooled = fit(training, shrinkage="pooled")
        unpooled = fit(training, shrinkage="none")
        for dp, du in zip(pooled.districts, unpooled.districts):
            assert dp.slope == pytest.approx(du.slope, abs=1e-9)
            assert dp.intercept == pytest.approx(du.intercept, abs=1e-9)

    def test_parameter_recovery_on_221_days(self):
        rng = np.random.default_rng(17)
        days = 221
        training = []
        for _ in range(days):
            flows = rng.uniform(40, 400, 3)
            pickups = np.exp(
                0.5 + 0.8 * np.log(flows) + rng.normal(0, 0.1, 3)
            )
            training.append((tuple(flows), tuple(np.maximum(pickups, 1.0))))
        model = fit(training, shrinkage="pooled")
        for d in model.districts:
            assert abs(d.slope - 0.8) < 0.05
        assert model.sigma == pytest.approx(0.1, abs=0.02)

    def test_degenerate_training_data(self):
        training = [((10.0, 10.0, 10.0), (5.0, 5.0, 5.0))] * 5
        with pytest.raises(ValueError, match="degenerate training data"):
            fit(training)

    def test_non_positive_values_rejected(self):
        with pytest.raises(ValueError, match="log-transform"):
            fit([((0.5, 10, 10), (1, 1, 1))] * 3)

    def test_round_trip_serialization(self, tmp_path):
        rng = np.random.default_rng(3)
        training = [
            (tuple(rng.uniform(30, 300, 3)), tuple(rng.uniform(10, 60, 3)))
            for _ in range(12)
        ]
        model = fit(training)
        save_model(tmp_path / "model.json", model)
        assert load_model(tmp_path / "model.json") == model
        assert model_from_json(model_to_json(model)) == model


class TestPredictPickups:
    def test_identity_model_within_bounds(self):
        model = flat_model()
        assert predict_pickups(model, (50.0, 50.0, 50.0)) == (50.0, 50.0, 50.0)

    def test_below_minimum_caps_at_flow(self):
        # engineered so the raw prediction at flow 10 is exactly 14
        sigma = 0.05
        intercept = math.log(14.0) - 0.8 * math.log(10.0) - sigma**2 / 2
        model = CounterfactualModel(
            districts=tuple(
                DistrictFit(
                    intercept=intercept, slope=0.8, flow_min=20.0, flow_max=100.0
                )
                for _ in range(3)
            ),
            sigma=sigma,
        )
        picks = predict_pickups(model, (10.0, 10.0, 10.0))
        assert picks == (10.0, 10.0, 10.0)
        probs = pickup_probability(model, (10.0, 10.0, 10.0), picks)
        assert probs == (1.0, 1.0, 1.0)

    def test_above_maximum_is_frozen_at_maximum(self):
        model = flat_model(intercept=-0.3, slope=0.8, sigma=0.1, hi=200.0)
        at_max = predict_pickups(model, (200.0, 200.0, 200.0))
        above = predict_pickups(model, (400.0, 400.0, 400.0))
        assert above == at_max

    def test_continuity_at_flow_max(self):
        model = flat_model(intercept=-0.3, slope=0.8, sigma=0.1, hi=200.0)
        below = predict_pickups(model, (200.0 - 1e-9, 200.0, 200.0))[0]
        above = predict_pickups(model, (200.0 + 1e-9, 200.0, 200.0))[0]
        assert abs(below - above) < 1e-9

    def test_zero_flow_gives_zero_pickups(self):
        model = flat_model()
        assert predict_pickups(model, (0.0, 5.0, 5.0))[0] == 0.0

    def test_pickups_never_exceed_flow(self):
        rng = np.random.default_rng(5)
        model = flat_model(intercept=0.5, slope=0.9, sigma=0.3, lo=5.0, hi=80.0)
        for _ in range(300):
            flow = tuple(rng.uniform(0, 200, 3))
            picks = predict_pickups(model, flow, mode="sample", rng=rng)
            for p, f in zip(picks, flow):
                assert p <= f + 1e-12

    def test_sample_mean_matches_mean_mode(self):
        model = flat_model(intercept=0.0, slope=0.7, sigma=0.2, hi=1000.0)
        rng = np.random.default_rng(11)
        flow = (100.0, 100.0, 100.0)
        draws = np.array(
            [predict_pickups(model, flow, mode="sample", rng=rng) for _ in range(10_000)]
        )
        mean_mode = predict_pickups(model, flow)[0]
        se = draws[:, 0].std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws[:, 0].mean() - mean_mode) < 3 * se


class TestPickupProbability:
    def test_simple_ratio(self):
        model = flat_model()
        assert pickup_probability(model, (50.0,) * 3, (40.0,) * 3) == (0.8,) * 3

    def test_cap_at_one(self):
        model = flat_model()
        assert pickup_probability(model, (50.0,) * 3, (60.0,) * 3) == (1.0,) * 3

    def test_zero_flow_is_uncontested(self):
        model = flat_model()
        assert pickup_probability(model, (0.0, 10.0, 10.0))[0] == 1.0

    def test_monotone_non_increasing_for_concave_model(self):
        model = flat_model(intercept=0.2, slope=0.7, sigma=0.05, lo=10.0, hi=500.0)
        flows = np.linspace(10.0, 500.0, 200)
        probs = [
            pickup_probability(model, (f, 10.0, 10.0))[0] for f in flows
        ]
        assert all(a >= b - 1e-12 for a, b in zip(probs, probs[1:]))


class TestHypotheticalOutcomes:
    def test_degenerate_priors_make_identical_frames(self):
        weights = [(1.0, 0.0, 0.0)] * 5 + [(0.0, 0.0, 1.0)] * 3
        scenario = make_scenario(weights)
        outcomes = simulate_hypothetical_outcomes(
            scenario, flat_model(), n_frames=50, seed=1
        )
        assert all(f == outcomes.frames[0] for f in outcomes.frames)
        assert outcomes.frames[0].flow == (5, 0, 3)

    def test_same_seed_reproduces_the_set(self):
        weights = [(0.5, 0.25, 0.25)] * 20
        scenario = make_scenario(weights)
        a = simulate_hypothetical_outcomes(scenario, flat_model(), 100, seed=9)
        b = simulate_hypothetical_outcomes(scenario, flat_model(), 100, seed=9)
        assert a == b

    def test_frame_mean_flow_matches_analytic_expectation(self):
        rng = np.random.default_rng(2)
        weights = rng.dirichlet((2.0, 2.0, 2.0), size=60)
        scenario = make_scenario([tuple(w) for w in weights])
        n_frames = 400
        outcomes = simulate_hypothetical_outcomes(
            scenario, flat_model(), n_frames, seed=3
        )
        expected = weights.sum(axis=0)
        per_frame_var = (weights * (1 - weights)).sum(axis=0)
        for d in range(3):
            se = math.sqrt(per_frame_var[d] / n_frames)
            assert abs(outcomes.mean_flow()[d] - expected[d]) < 3.5 * se


class TestDisplayPayload:
    def test_static_is_mean_of_frames(self):
        weights = [(0.5, 0.3, 0.2)] * 30
        scenario = make_scenario(weights)
        outcomes = simulate_hypothetical_outcomes(
            scenario, flat_model(), 200, seed=4
        )
        payload = summarize_display(outcomes, "static")
        # independent recomputation over raw frames
        probs = np.array([f.probabilities for f in outcomes.frames])
        flows = np.array([f.flow for f in outcomes.frames], dtype=float)
        assert payload.static_probabilities == pytest.approx(
            tuple(probs.mean(axis=0)), abs=1e-9
        )
        assert payload.static_flows == pytest.approx(
            tuple(flows.mean(axis=0)), abs=1e-9
        )
        assert payload.frames is None

    def test_hops_payload_keeps_every_frame_in_order(self):
        weights = [(0.4, 0.3, 0.3)] * 10
        scenario = make_scenario(weights)
        outcomes = simulate_hypothetical_outcomes(
            scenario, flat_model(), 120, seed=5
        )
        payload = summarize_display(outcomes, "hops")
        assert payload.frames == outcomes.frames
        assert len(payload.frames) == 120
        assert payload.frame_interval == 0.2

    def test_two_frame_mean(self):
        from pickupgame.counterfactual import HypotheticalOutcomeSet, OutcomeFrame

        frames = (
            OutcomeFrame((1, 0, 0), (0.4, 0.0, 0.0), (0.4, 1.0, 1.0)),
            OutcomeFrame((1, 0, 0), (0.6, 0.0, 0.0), (0.6, 1.0, 1.0)),
        )
        payload = summarize_display(HypotheticalOutcomeSet(frames), "static")
        assert payload.static_probabilities[0] == pytest.approx(0.5)

    def test_payload_round_trip(self):
        weights = [(0.4, 0.3, 0.3)] * 8
        scenario = make_scenario(weights)
        outcomes = simulate_hypothetical_outcomes(scenario, flat_model(), 40, seed=6)
        for kind in ("static", "hops"):
            payload = summarize_display(outcomes, kind)
            assert payload_from_json(payload_to_json(payload)) == payload
