"""Transport distance, its enumeration oracle, and metric summaries."""

import numpy as np
import pytest

from pickupgame.core import FlowDistribution
from pickupgame.metrics import (
    GroundMetric,
    SummaryInterval,
    anticipation_error,
    best_response,
    distribution_shift,
    emd,
    transport_oracle,
    welfare_ratio,
)

COLLINEAR = GroundMetric.collinear()


def random_instance(rng, n=3, positions=None):
    metric = (
        GroundMetric(tuple(map(tuple, rng.uniform(-3, 3, (n, 2)))))
        if positions is None
        else positions
    )
    a = rng.uniform(0.0, 20.0, n)
    if a.sum() == 0:
        a[0] = 1.0
    b = rng.uniform(0.0, 20.0, n)
    b = b * (a.sum() / b.sum())
    return FlowDistribution(tuple(a)), FlowDistribution(tuple(b)), metric


class TestEmd:
    def test_identity(self):
        a = FlowDistribution((3.0, 4.0, 5.0))
        assert emd(a, a, COLLINEAR) == 0.0

    def test_full_shift_across_the_line(self):
        a = FlowDistribution((10.0, 0.0, 0.0))
        b = FlowDistribution((0.0, 0.0, 10.0))
        # all 10 units move distance 2, over 10 drivers
        assert emd(a, b, COLLINEAR) == pytest.approx(2.0, abs=1e-12)
        assert transport_oracle(a, b, COLLINEAR) == pytest.approx(2.0, abs=1e-12)

    def test_hand_verified_plan(self):
        a = FlowDistribution((6.0, 2.0, 2.0))
        b = FlowDistribution((2.0, 2.0, 6.0))
        # move 4 units from bin 0 to bin 2: cost 8, per 10 drivers
        assert emd(a, b, COLLINEAR) == pytest.approx(0.8, abs=1e-12)
        assert transport_oracle(a, b, COLLINEAR) == pytest.approx(0.8, abs=1e-12)

    def test_mass_mismatch(self):
        a = FlowDistribution((5.0, 5.0, 5.0))
        b = FlowDistribution((5.0, 5.0, 6.0))
        with pytest.raises(ValueError, match="mass mismatch"):
            emd(a, b, COLLINEAR)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            a, b, metric = random_instance(rng)
            assert emd(a, b, metric) == pytest.approx(
                transport_oracle(a, b, metric), abs=1e-9
            )

    def test_four_bin_instances_use_the_lp_and_match_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a, b, metric = random_instance(rng, n=4)
            assert emd(a, b, metric) == pytest.approx(
                transport_oracle(a, b, metric), abs=1e-9
            )

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            a, b, metric = random_instance(rng)
            c = FlowDistribution(tuple(rng.uniform(0.1, 20.0, 3))).scaled_to(
                a.total
            )
            ab = emd(a, b, metric)
            assert emd(a, a, metric) == 0.0
            assert ab == pytest.approx(emd(b, a, metric), abs=1e-9)
            assert ab <= emd(a, c, metric) + emd(c, b, metric) + 1e-9

    def test_oracle_symmetry(self):
        rng = np.random.default_rng(11)
        a, b, metric = random_instance(rng)
        assert transport_oracle(a, b, metric) == pytest.approx(
            transport_oracle(b, a, metric), abs=1e-12
        )


class TestBestResponse:
    def test_argmax_is_best(self):
        assert best_response(0, (0.8, 0.5, 0.6))

    def test_tie_counts_for_any_maximizer(self):
        assert best_response(1, (0.7, 0.7, 0.2))

    def test_non_maximizer_is_not_best(self):
        assert not best_response(2, (0.8, 0.5, 0.6))

    def test_invariant_under_positive_rescaling(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            probs = tuple(rng.uniform(0.05, 1.0, 3))
            scale = float(rng.uniform(0.1, 5.0))
            for chosen in range(3):
                assert best_response(chosen, probs) == best_response(
                    chosen, tuple(p * scale for p in probs)
                )


class TestAnticipationError:
    def test_perfect_anticipation(self):
        flow = FlowDistribution((300.0, 150.0, 148.0))
        assert anticipation_error(flow, flow, COLLINEAR) == 0.0

    def test_single_move_plan(self):
        anticipated = FlowDistribution((300.0, 150.0, 148.0))
        realized = FlowDistribution((280.0, 170.0, 148.0))
        # 20 drivers shift one unit of distance, per 598 drivers
        expected = 20.0 / 598.0
        assert anticipation_error(anticipated, realized, COLLINEAR) == pytest.approx(
            expected, abs=1e-12
        )
        assert transport_oracle(anticipated, realized, COLLINEAR) == pytest.approx(
            expected, abs=1e-12
        )

    def test_symmetry(self):
        a = FlowDistribution((10.0, 5.0, 5.0))
        b = FlowDistribution((5.0, 10.0, 5.0))
        assert anticipation_error(a, b, COLLINEAR) == anticipation_error(
            b, a, COLLINEAR
        )


class TestDistributionShift:
    def test_zero_when_system_matches_display(self):
        displayed = FlowDistribution((5.0, 3.0, 2.0))
        result = distribution_shift(displayed, [displayed] * 4, COLLINEAR)
        assert result.values == (0.0, 0.0, 0.0, 0.0)

    def test_summary_is_deterministic(self):
        rng = np.random.default_rng(5)
        displayed = FlowDistribution((10.0, 10.0, 10.0))
        flows = []
        for _ in range(50):
            f = rng.uniform(1, 20, 3)
            flows.append(FlowDistribution(tuple(f * (30.0 / f.sum()))))
        r1 = distribution_shift(displayed, flows, COLLINEAR)
        r2 = distribution_shift(displayed, flows, COLLINEAR)
        assert r1 == r2

    def test_rescales_when_replicate_totals_differ(self):
        displayed = FlowDistribution((299.0, 150.0, 149.0))  # totals 598
        replicate = FlowDistribution((300.0, 150.0, 150.0))  # totals 600
        result = distribution_shift(displayed, [replicate], COLLINEAR)
        assert result.values[0] >= 0.0

    def test_values_match_oracle_spot_checks(self):
        rng = np.random.default_rng(9)
        displayed = FlowDistribution((12.0, 6.0, 6.0))
        flows = []
        for _ in range(50):
            f = rng.uniform(1, 12, 3)
            flows.append(FlowDistribution(tuple(f * (24.0 / f.sum()))))
        result = distribution_shift(displayed, flows, COLLINEAR)
        for value, flow in zip(result.values, flows):
            assert value == pytest.approx(
                transport_oracle(displayed, flow, COLLINEAR), abs=1e-9
            )


class TestWelfareRatio:
    def test_realized_equals_max(self):
        result = welfare_ratio([10.0, 10.0], 10.0)
        assert result.values == (1.0, 1.0)
        assert not result.clamped

    def test_zero_pickups(self):
        assert welfare_ratio([0.0], 12.0).values == (0.0,)

    def test_clamp_fires_when_realized_beats_optimum(self):
        result = welfare_ratio([10.5, 8.0], 10.0)
        assert result.clamped
        assert result.values[0] == 1.0

    def test_summary_percentiles(self):
        values = list(range(1, 101))
        summary = SummaryInterval.from_values(values)
        assert summary.median == pytest.approx(50.5)
        assert summary.lo < summary.median < summary.hi
