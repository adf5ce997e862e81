"""Welfare optimizer against the exhaustive integer grid oracle."""

import numpy as np
import pytest

from pickupgame.counterfactual import CounterfactualModel, DistrictFit, predict_pickups
from pickupgame.welfare import grid_search_max_pickups, max_welfare


def toy_model(rng, flow_hi=80.0):
    """Concave log-log district curves with wide historical bounds."""
    districts = []
    for _ in range(3):
        slope = float(rng.uniform(0.4, 0.9))
        # intercept chosen so predictions stay below flow (no cap kinks)
        intercept = float(rng.uniform(-0.5, 0.3))
        districts.append(
            DistrictFit(
                intercept=intercept,
                slope=slope,
                flow_min=1.0,
                flow_max=flow_hi,
            )
        )
    return CounterfactualModel(districts=tuple(districts), sigma=0.05)


class TestMaxWelfare:
    def test_flat_objective_under_identity_model(self):
        # pickups == flow everywhere: every feasible flow is optimal
        districts = tuple(
            DistrictFit(intercept=0.0, slope=1.0, flow_min=1.0, flow_max=1000.0)
            for _ in range(3)
        )
        model = CounterfactualModel(districts=districts, sigma=1e-6)
        result = max_welfare(60, model)
        assert result.max_pickups == pytest.approx(60.0, abs=1e-6)
        assert result.optimal_flow.total == pytest.approx(60.0, abs=1e-6)

    def test_matches_grid_oracle_on_toy_instances(self):
        rng = np.random.default_rng(2024)
        for case in range(20):
            model = toy_model(rng)
            n = int(rng.integers(30, 101))
            got = max_welfare(n, model, seed=case)
            oracle = grid_search_max_pickups(n, model)
            assert got.constraint_violation < 1e-6
            # never below the oracle, and within 0.5% overall
            assert got.max_pickups >= oracle.max_pickups - 1e-6
            gap = abs(got.max_pickups - oracle.max_pickups)
            assert gap <= 0.005 * oracle.max_pickups

    def test_deterministic_under_fixed_seed(self):
        rng = np.random.default_rng(1)
        model = toy_model(rng)
        a = max_welfare(60, model, seed=9)
        b = max_welfare(60, model, seed=9)
        assert a.max_pickups == b.max_pickups
        assert a.optimal_flow == b.optimal_flow

    def test_infeasible_bounds(self):
        rng = np.random.default_rng(4)
        model = toy_model(rng, flow_hi=10.0)
        with pytest.raises(ValueError, match="constraint set empty"):
            max_welfare(1000, model)

    def test_result_is_feasible(self):
        rng = np.random.default_rng(8)
        model = toy_model(rng)
        result = max_welfare(75, model, seed=3)
        for f, (lo, hi) in zip(result.optimal_flow.counts, model.flow_bounds):
            assert lo - 1e-9 <= f <= hi + 1e-9
        assert result.optimal_flow.total == pytest.approx(75.0, abs=1e-6)

    def test_objective_counts_failed_drivers(self):
        rng = np.random.default_rng(12)
        model = toy_model(rng)
        result = max_welfare(50, model, seed=0)
        recomputed = sum(predict_pickups(model, result.optimal_flow.counts))
        assert result.max_pickups == pytest.approx(recomputed, abs=1e-9)
        assert result.max_pickups <= 50.0 + 1e-9


class TestGridOracle:
    def test_respects_bounds(self):
        districts = tuple(
            DistrictFit(intercept=0.0, slope=0.8, flow_min=5.0, flow_max=20.0)
            for _ in range(3)
        )
        model = CounterfactualModel(districts=districts, sigma=0.01)
        result = grid_search_max_pickups(30, model)
        for f in result.optimal_flow.counts:
            assert 5.0 <= f <= 20.0
        assert result.optimal_flow.total == 30.0

    def test_infeasible_grid(self):
        districts = tuple(
            DistrictFit(intercept=0.0, slope=0.8, flow_min=1.0, flow_max=3.0)
            for _ in range(3)
        )
        model = CounterfactualModel(districts=districts, sigma=0.01)
        with pytest.raises(ValueError, match="constraint set empty"):
            grid_search_max_pickups(100, model)

    def test_concavity_makes_interior_optimum(self):
        # equal districts, concave curves: the balanced split wins
        districts = tuple(
            DistrictFit(intercept=0.2, slope=0.6, flow_min=1.0, flow_max=60.0)
            for _ in range(3)
        )
        model = CounterfactualModel(districts=districts, sigma=0.01)
        result = grid_search_max_pickups(60, model)
        assert result.optimal_flow.counts == (20.0, 20.0, 20.0)
