"""Report generation: per-trial metric tables and companion figures.

The report is derived data, never authoritative: every number is
recomputable from the event logs, the persisted outcomes, and the system
replicates. Tables are CSV; figures render the same quantities by trial
and treatment (welfare ratio, distribution shift, best-response rate,
anticipation error, and per-district flow differences against the
displayed prediction).
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .core import FlowDistribution
from .harness import CELLS, RunContext
from .metrics import SummaryInterval, distribution_shift, welfare_ratio
from .outcomes import StagingViolationError
from .seeds import derive_seed
from .welfare import max_welfare

CELL_COLORS = {
    "static_bandit": "tab:blue",
    "static_full": "tab:orange",
    "hops_bandit": "tab:red",
    "hops_full": "tab:green",
}


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _figure(path: Path, title: str, ylabel: str, per_cell: dict[str, dict]) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for cell_id, series in per_cell.items():
        trials = sorted(series)
        med = [series[t].median for t in trials]
        lo = [series[t].lo for t in trials]
        hi = [series[t].hi for t in trials]
        color = CELL_COLORS[cell_id]
        ax.plot(trials, med, marker="o", ms=3, color=color, label=cell_id)
        ax.fill_between(trials, lo, hi, color=color, alpha=0.15, lw=0)
    ax.set_xlabel("trial")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _level_panel_figure(
    path: Path, title: str, ylabel: str, per_level_cell: dict[int, dict[str, dict]]
) -> None:
    levels = sorted(per_level_cell)
    fig, axes = plt.subplots(
        len(levels), 1, figsize=(7.0, 3.2 * len(levels)), squeeze=False
    )
    for row, level in enumerate(levels):
        ax = axes[row][0]
        for cell_id, series in per_level_cell[level].items():
            trials = sorted(series)
            ax.plot(
                trials,
                [series[t] for t in trials],
                marker="o",
                ms=3,
                color=CELL_COLORS[cell_id],
                label=cell_id,
            )
        ax.set_title(f"level-{level}")
        ax.set_ylabel(ylabel)
        ax.set_xlabel("trial")
        if row == 0:
            ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def export_report(ctx: RunContext) -> dict[str, Path]:
    """Write the metric tables and figures for a completed run."""
    if not ctx.manifest["stages"].get("system"):
        raise StagingViolationError(
            "staging violation: the report needs the completed system stage"
        )
    system_doc = ctx.rundir.read_json("system/outcomes.json")
    events = ctx.rundir.read_events("events/l1.jsonl") + ctx.rundir.read_events(
        "events/l2.jsonl"
    )
    report_dir = ctx.rundir.path("report")
    report_dir.mkdir(parents=True, exist_ok=True)

    # one welfare optimum per trial; treatment cells share the scenario
    optima = {}
    for t, day_iso in enumerate(ctx.config.scored_days, start=1):
        scenario = ctx.artifacts.scenario(day_iso)
        optima[t] = max_welfare(
            scenario.total_drivers,
            ctx.artifacts.model,
            seed=derive_seed(ctx.config.seed, "welfare", day_iso),
            restarts=ctx.config.welfare_restarts,
        )

    aggregate_rows = []
    ratio_series: dict[str, dict[int, SummaryInterval]] = defaultdict(dict)
    shift_series: dict[str, dict[int, SummaryInterval]] = defaultdict(dict)
    flow_rows = []
    flow_series: dict[str, dict[str, dict[int, SummaryInterval]]] = {
        d.id: defaultdict(dict) for d in ctx.artifacts.action_set.districts
    }
    for cell in CELLS:
        per_trial = system_doc["cells"][cell.id]
        for t_str in sorted(per_trial, key=int):
            t = int(t_str)
            entry = per_trial[t_str]
            day_iso = entry["day"]
            scenario = ctx.artifacts.scenario(day_iso)
            flows = [
                FlowDistribution(tuple(float(x) for x in r["flow"]))
                for r in entry["replicates"]
            ]
            pickups = [float(sum(r["pickups"])) for r in entry["replicates"]]
            optimum = optima[t]
            ratio = welfare_ratio(pickups, optimum.max_pickups)
            shift = distribution_shift(
                scenario.deduced_flow, flows, ctx.artifacts.metric
            )
            ratio_series[cell.id][t] = ratio.summary
            shift_series[cell.id][t] = shift.summary
            aggregate_rows.append(
                [
                    cell.id,
                    cell.display,
                    cell.feedback,
                    t,
                    day_iso,
                    ratio.summary.median,
                    ratio.summary.lo,
                    ratio.summary.hi,
                    int(ratio.clamped),
                    shift.summary.median,
                    shift.summary.lo,
                    shift.summary.hi,
                    optimum.max_pickups,
                ]
            )
            displayed_share = np.asarray(scenario.deduced_flow.counts)
            displayed_share = displayed_share / displayed_share.sum()
            flow_matrix = np.array([f.counts for f in flows])
            shares = flow_matrix / flow_matrix.sum(axis=1, keepdims=True)
            diffs = shares - displayed_share
            for d, district in enumerate(ctx.artifacts.action_set.districts):
                summary = SummaryInterval.from_values(diffs[:, d])
                flow_series[district.id][cell.id][t] = summary
                flow_rows.append(
                    [
                        cell.id,
                        t,
                        day_iso,
                        district.id,
                        displayed_share[d],
                        summary.median,
                        summary.lo,
                        summary.hi,
                    ]
                )

    _write_csv(
        report_dir / "aggregate.csv",
        [
            "cell",
            "display",
            "feedback",
            "trial",
            "day",
            "welfare_ratio_median",
            "welfare_ratio_lo",
            "welfare_ratio_hi",
            "welfare_clamped",
            "distribution_shift_median",
            "distribution_shift_lo",
            "distribution_shift_hi",
            "max_pickups",
        ],
        aggregate_rows,
    )

    individual_rows = []
    br_series: dict[int, dict[str, dict[int, float]]] = {
        1: defaultdict(dict),
        2: defaultdict(dict),
    }
    ae_series: dict[int, dict[str, dict[int, float]]] = {
        1: defaultdict(dict),
        2: defaultdict(dict),
    }
    grouped: dict[tuple, list[dict]] = defaultdict(list)
    for event in events:
        grouped[(event["cell"], event["level"], event["trial"])].append(event)
    best_response_by_trial: dict[tuple, list[str]] = defaultdict(list)
    for (cell_id, level, t), items in sorted(grouped.items()):
        day_iso = items[0]["day"]
        br_rate = float(np.mean([e["best_response"] for e in items]))
        ae = SummaryInterval.from_values([e["anticipation_error"] for e in items])
        individual_rows.append(
            [
                cell_id,
                items[0]["display"],
                items[0]["feedback"],
                level,
                t,
                day_iso,
                len(items),
                br_rate,
                ae.median,
                ae.lo,
                ae.hi,
            ]
        )
        br_series[level][cell_id][t] = br_rate
        ae_series[level][cell_id][t] = ae.median
    _write_csv(
        report_dir / "individual.csv",
        [
            "cell",
            "display",
            "feedback",
            "level",
            "trial",
            "day",
            "n_agents",
            "best_response_rate",
            "anticipation_error_median",
            "anticipation_error_lo",
            "anticipation_error_hi",
        ],
        individual_rows,
    )

    _write_csv(
        report_dir / "flow_differences.csv",
        [
            "cell",
            "trial",
            "day",
            "district",
            "displayed_share",
            "share_difference_median",
            "share_difference_lo",
            "share_difference_hi",
        ],
        flow_rows,
    )

    # best-response identities per trial: which districts attain the
    # level-specific maximum (the derivation the day table documents)
    br_identity_rows = []
    l1_doc = ctx.rundir.read_json("outcomes/l1.json")
    l2_doc = ctx.rundir.read_json("outcomes/l2.json")
    ids = ctx.artifacts.action_set.ids
    for t, day_iso in enumerate(ctx.config.scored_days, start=1):
        probs1 = l1_doc[str(t)]["pickup_probabilities"]
        top1 = max(probs1)
        l1_best = ",".join(
            ids[d] for d, p in enumerate(probs1) if p >= top1 - 1e-12
        )
        row = [t, day_iso, l1_best]
        for cell in CELLS:
            probs2 = l2_doc[cell.id][str(t)]["pickup_probabilities"]
            top2 = max(probs2)
            row.append(
                ",".join(ids[d] for d, p in enumerate(probs2) if p >= top2 - 1e-12)
            )
        br_identity_rows.append(row)
    _write_csv(
        report_dir / "best_response_identities.csv",
        ["trial", "day", "level1"] + [f"level2_{cell.id}" for cell in CELLS],
        br_identity_rows,
    )

    figures = {
        "welfare_ratio": report_dir / "figures" / "welfare_ratio.png",
        "distribution_shift": report_dir / "figures" / "distribution_shift.png",
        "best_response": report_dir / "figures" / "best_response.png",
        "anticipation_error": report_dir / "figures" / "anticipation_error.png",
        "flow_differences": report_dir / "figures" / "flow_differences.png",
    }
    _figure(
        figures["welfare_ratio"],
        "Welfare ratio by trial",
        "realized / maximum pickups",
        ratio_series,
    )
    _figure(
        figures["distribution_shift"],
        "Distribution shift by trial",
        "EMD per driver",
        shift_series,
    )
    _level_panel_figure(
        figures["best_response"],
        "Best-response rate by trial",
        "rate",
        br_series,
    )
    _level_panel_figure(
        figures["anticipation_error"],
        "Median anticipation error by trial",
        "EMD per driver",
        ae_series,
    )

    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6), squeeze=False)
    for col, district in enumerate(ctx.artifacts.action_set.districts):
        ax = axes[0][col]
        for cell_id, series in flow_series[district.id].items():
            trials = sorted(series)
            ax.plot(
                trials,
                [series[t].median for t in trials],
                marker="o",
                ms=3,
                color=CELL_COLORS[cell_id],
                label=cell_id,
            )
            ax.fill_between(
                trials,
                [series[t].lo for t in trials],
                [series[t].hi for t in trials],
                color=CELL_COLORS[cell_id],
                alpha=0.12,
                lw=0,
            )
        ax.axhline(0.0, color="red", lw=0.8)
        ax.set_title(district.label)
        ax.set_xlabel("trial")
        if col == 0:
            ax.set_ylabel("realized - displayed share")
            ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(figures["flow_differences"], dpi=110)
    plt.close(fig)

    ctx.manifest["stages"]["report"] = True
    ctx.save_manifest()
    paths = {
        "aggregate": report_dir / "aggregate.csv",
        "individual": report_dir / "individual.csv",
        "flow_differences": report_dir / "flow_differences.csv",
        "best_response_identities": report_dir / "best_response_identities.csv",
    }
    paths.update(figures)
    return paths
