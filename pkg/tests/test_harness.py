"""Staged orchestration: configs, pools, event logs, replications."""

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from pickupgame.core import FlowDistribution
from pickupgame.defaults import MAIN_TO_ALTERNATE_POSITION, TRIAL_DATES, alternate_order
from pickupgame.harness import (
    CELLS,
    config_from_json,
    config_hash,
    config_to_json,
    load_run,
    prepare_run,
    run_experiment,
    run_replication,
    run_stage,
    run_system_stage,
    variant_config,
)
from pickupgame.metrics import anticipation_error, best_response
from pickupgame.outcomes import StagingViolationError
from pickupgame.report import export_report


def read_lines(path: Path) -> list[str]:
    return path.read_text().splitlines()


class TestConfig:
    def test_round_trip(self, tiny_config):
        doc = config_to_json(tiny_config)
        assert config_from_json(doc) == tiny_config

    def test_hash_ignores_key_order(self, tiny_config):
        doc = config_to_json(tiny_config)
        shuffled = json.loads(
            json.dumps(doc, sort_keys=False)
        )  # same content, arbitrary order
        assert config_hash(config_from_json(shuffled)) == config_hash(tiny_config)

    def test_hash_changes_with_any_semantic_field(self, tiny_config):
        assert config_hash(replace(tiny_config, seed=tiny_config.seed + 1)) != (
            config_hash(tiny_config)
        )
        assert config_hash(
            replace(tiny_config, system_replicates=99)
        ) != config_hash(tiny_config)

    def test_trial_days_validated(self, tiny_config):
        with pytest.raises(ValueError, match="16 entries"):
            replace(tiny_config, trial_days=tiny_config.trial_days[:10])
        dup = (tiny_config.trial_days[0],) * 16
        with pytest.raises(ValueError, match="permutation"):
            replace(tiny_config, trial_days=dup)


class TestVariants:
    def test_alternate_order_is_the_published_mapping(self):
        reordered = alternate_order(TRIAL_DATES)
        # the practice day is shared, and main trial 1 sits at position 6
        assert reordered[0] == TRIAL_DATES[0]
        assert reordered[6] == TRIAL_DATES[1]
        for main_idx, pos in enumerate(MAIN_TO_ALTERNATE_POSITION):
            assert reordered[pos] == TRIAL_DATES[main_idx]

    def test_robust_trial_order_config(self, tiny_config):
        cfg = variant_config(tiny_config, "robust_trial_order")
        assert set(cfg.trial_days) == set(tiny_config.trial_days)
        assert cfg.trial_days != tiny_config.trial_days
        assert cfg.trial_days[0] == tiny_config.trial_days[0]

    def test_robust_composition_config(self, tiny_config):
        cfg = variant_config(tiny_config, "robust_composition")
        assert cfg.trial_days == tiny_config.trial_days
        assert cfg.split.proportions == (0.15, 0.35, 0.50)
        assert cfg.split.lam == 3.0
        assert cfg.l2_mixture.proportions == (0.2, 0.8)

    def test_replication_rosters_follow_published_cell_counts(self, tiny_config):
        order = variant_config(tiny_config, "robust_trial_order")
        assert (order.roster_l1_per_cell, order.roster_l2_per_cell) == (60, 45)
        comp = variant_config(tiny_config, "robust_composition")
        assert comp.roster_l2_per_cell == 75


class TestStaging:
    def test_l2_before_l1_is_a_staging_violation(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        ctx = prepare_run(tiny_config, tmp_path / "run", tiny_artifacts)
        with pytest.raises(StagingViolationError, match="staging violation"):
            run_stage(ctx, "l2")

    def test_system_before_stages_is_a_staging_violation(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        ctx = prepare_run(tiny_config, tmp_path / "run", tiny_artifacts)
        with pytest.raises(StagingViolationError, match="staging violation"):
            run_system_stage(ctx)

    def test_report_requires_system_stage(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        ctx = prepare_run(tiny_config, tmp_path / "run", tiny_artifacts)
        with pytest.raises(StagingViolationError):
            export_report(ctx)

    def test_pool_config_hash_mismatch_is_rejected(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        ctx = run_experiment(
            tiny_config, tmp_path / "run", artifacts=tiny_artifacts, through="l1"
        )
        # tamper: pretend the pool came from another config
        pool_doc = ctx.rundir.read_json("pools/l1.json")
        pool_doc["config_hash"] = "0" * 64
        ctx.rundir.write_json("pools/l1.json", pool_doc)
        with pytest.raises(ValueError, match="config hash mismatch"):
            run_stage(ctx, "l2")

    def test_tampered_pool_content_is_rejected(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        ctx = run_experiment(
            tiny_config, tmp_path / "run", artifacts=tiny_artifacts, through="l1"
        )
        pool_doc = ctx.rundir.read_json("pools/l1.json")
        first = pool_doc["cells"]["static_bandit"]["1"]
        first[0] = (first[0] + 1) % 3
        ctx.rundir.write_json("pools/l1.json", pool_doc)
        with pytest.raises(ValueError, match="pool integrity"):
            run_stage(ctx, "l2")

    def test_composition_without_main_pool_fails(self, tiny_config, tmp_path):
        with pytest.raises(StagingViolationError, match="staging violation"):
            run_replication(
                tiny_config, "robust_composition", tmp_path / "rc", main_ctx=None
            )


@pytest.fixture(scope="module")
def completed(tiny_config, tiny_artifacts, tmp_path_factory):
    rundir = tmp_path_factory.mktemp("run")
    return run_experiment(
        tiny_config, rundir, artifacts=tiny_artifacts, through="report"
    )


class TestStageExecution:
    def test_event_counts_are_agents_times_trials(self, completed, tiny_config):
        for stage, level in (("l1", 1), ("l2", 2)):
            events = completed.rundir.read_events(f"events/{stage}.jsonl")
            expected = 4 * tiny_config.roster_size(level) * 15
            assert len(events) == expected

    def test_pools_cover_every_cell_and_trial(self, completed):
        doc = completed.rundir.read_json("pools/l1.json")
        assert set(doc["cells"]) == {c.id for c in CELLS}
        for per_trial in doc["cells"].values():
            assert set(per_trial) == {str(t) for t in range(1, 16)}

    def test_reward_accounting_invariant(self, completed):
        events = completed.rundir.read_events(
            "events/l1.jsonl"
        ) + completed.rundir.read_events("events/l2.jsonl")
        pickups: dict[str, int] = {}
        final: dict[str, float] = {}
        for e in sorted(events, key=lambda e: (e["agent"], e["trial"])):
            pickups[e["agent"]] = pickups.get(e["agent"], 0) + int(e["got_pickup"])
            final[e["agent"]] = e["running_reward"]
        for agent, reward in final.items():
            assert reward == pytest.approx(2.0 + 0.2 * pickups[agent], abs=1e-9)

    def test_report_rows_and_consistency_with_event_log(self, completed):
        report_dir = completed.rundir.path("report")
        aggregate = read_lines(report_dir / "aggregate.csv")
        assert len(aggregate) == 1 + 15 * 4
        individual = read_lines(report_dir / "individual.csv")
        assert len(individual) == 1 + 15 * 4 * 2
        # independent recomputation of one summary row from the raw log
        events = completed.rundir.read_events("events/l2.jsonl")
        cell, trial = "static_full", 7
        rows = [
            e for e in events if e["cell"] == cell and e["trial"] == trial
        ]
        want_br = float(np.mean([e["best_response"] for e in rows]))
        want_ae = float(np.median([e["anticipation_error"] for e in rows]))
        header = individual[0].split(",")
        for line in individual[1:]:
            vals = dict(zip(header, line.split(",")))
            if (
                vals["cell"] == cell
                and vals["trial"] == str(trial)
                and vals["level"] == "2"
            ):
                assert float(vals["best_response_rate"]) == pytest.approx(want_br)
                assert float(vals["anticipation_error_median"]) == pytest.approx(
                    want_ae
                )
                break
        else:
            pytest.fail("row not found")

    def test_event_metrics_recompute_from_stored_outcomes(self, completed):
        outcomes = completed.rundir.read_json("outcomes/l2.json")
        metric = completed.artifacts.metric
        events = completed.rundir.read_events("events/l2.jsonl")
        for e in events[:200]:
            stored = outcomes[e["cell"]][str(e["trial"])]
            probs = stored["pickup_probabilities"]
            assert e["best_response"] == best_response(e["chosen_index"], probs)
            ae = anticipation_error(
                FlowDistribution(tuple(e["anticipated"])),
                FlowDistribution(tuple(stored["expected_flow"])),
                metric,
            )
            assert e["anticipation_error"] == pytest.approx(ae, abs=1e-12)

    def test_flow_difference_conservation_per_replicate(self, completed):
        doc = completed.rundir.read_json("system/outcomes.json")
        for cell_doc in doc["cells"].values():
            for entry in cell_doc.values():
                for rep in entry["replicates"][:20]:
                    shares = np.asarray(rep["flow"], dtype=float)
                    shares /= shares.sum()
                    day_scenario = completed.artifacts.scenario(entry["day"])
                    displayed = np.asarray(day_scenario.deduced_flow.counts)
                    displayed /= displayed.sum()
                    assert abs((shares - displayed).sum()) < 1e-9

    def test_load_run_round_trips(self, completed):
        loaded = load_run(completed.rundir.root)
        assert loaded.config == completed.config
        assert loaded.manifest == completed.manifest
        assert loaded.artifacts.model == completed.artifacts.model

    def test_stage_isolation_for_system_stage(self, completed, tmp_path):
        before = completed.rundir.path("system/outcomes.json").read_bytes()
        pools_before = completed.rundir.path("pools/l1.json").read_bytes()
        completed.rundir.path("system/outcomes.json").unlink()
        ctx = load_run(completed.rundir.root)
        ctx.manifest["stages"]["system"] = False
        run_system_stage(ctx)
        assert completed.rundir.path("system/outcomes.json").read_bytes() == before
        assert completed.rundir.path("pools/l1.json").read_bytes() == pools_before


class TestConfigVariantsRun:
    def test_capacity_lottery_scoring_runs_end_to_end(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        cfg = replace(tiny_config, scoring="capacity_lottery", roster_scale=0.03)
        ctx = run_experiment(
            cfg, tmp_path / "cap", artifacts=tiny_artifacts, through="l1"
        )
        events = ctx.rundir.read_events("events/l1.jsonl")
        assert events
        assert {e["got_pickup"] for e in events} <= {True, False}

    def test_softmax_crowd_model_runs_end_to_end(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        from pickupgame.harness import AgentBehavior

        cfg = replace(
            tiny_config,
            behavior=AgentBehavior(crowd_model="softmax"),
            roster_scale=0.03,
        )
        ctx = run_experiment(
            cfg, tmp_path / "soft", artifacts=tiny_artifacts, through="l2"
        )
        assert ctx.manifest["stages"]["l2"]


class TestDeterminism:
    def test_same_config_same_bytes(self, tiny_config, tiny_artifacts, tmp_path):
        a = run_experiment(
            tiny_config, tmp_path / "a", artifacts=tiny_artifacts, through="system"
        )
        b = run_experiment(
            tiny_config, tmp_path / "b", artifacts=tiny_artifacts, through="system"
        )
        for rel in (
            "events/l1.jsonl",
            "events/l2.jsonl",
            "pools/l1.json",
            "pools/l2.json",
            "system/outcomes.json",
        ):
            assert a.rundir.path(rel).read_bytes() == b.rundir.path(rel).read_bytes()


class TestReplications:
    def test_order_equivariance_without_learning(
        self, rational_config, tiny_artifacts, tmp_path
    ):
        main = run_experiment(
            rational_config, tmp_path / "main", artifacts=tiny_artifacts, through="l1"
        )
        alt_cfg = variant_config(rational_config, "robust_trial_order")
        alt_cfg = replace(
            alt_cfg,
            roster_l1_per_cell=rational_config.roster_l1_per_cell,
            roster_l2_per_cell=rational_config.roster_l2_per_cell,
        )
        alt = run_experiment(
            alt_cfg, tmp_path / "alt", artifacts=tiny_artifacts, through="l1"
        )

        def rows_by_day(ctx):
            out = {}
            for e in ctx.rundir.read_events("events/l1.jsonl"):
                key = (e["cell"], e["agent"], e["day"])
                out[key] = (
                    e["chosen"],
                    tuple(e["anticipated"]),
                    e["best_response"],
                    e["anticipation_error"],
                    e["got_pickup"],
                )
            return out

        assert rows_by_day(main) == rows_by_day(alt)

    def test_composition_reuses_the_main_l1_pool(
        self, tiny_config, tiny_artifacts, tmp_path
    ):
        main = run_experiment(
            tiny_config, tmp_path / "main", artifacts=tiny_artifacts, through="l1"
        )
        rc = run_replication(
            tiny_config,
            "robust_composition",
            tmp_path / "rc",
            main_ctx=main,
            artifacts=tiny_artifacts,
            through="l2",
        )
        assert (
            rc.manifest["pool_hashes"]["l1"] == main.manifest["pool_hashes"]["l1"]
        )
        main_pool = main.rundir.read_json("pools/l1.json")
        rc_pool = rc.rundir.read_json("pools/l1.json")
        assert rc_pool["cells"] == main_pool["cells"]
        assert rc_pool["hash"] == main_pool["hash"]
