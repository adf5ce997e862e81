"""Command-line interface.

Verbs mirror the pipeline: synth (emit a synthetic trip corpus), ingest
(trips to scenarios), fit (scenarios to payoff model), simulate-display
(hypothetical-outcome payloads), run (staged experiment), metrics
(report from a completed run), optimize (welfare optimum for a day), and
serve (the participant-facing session service). Every stochastic verb
takes an explicit --seed.
"""

from __future__ import annotations

import json
from dataclasses import replace
from datetime import date
from pathlib import Path

import click

from .core import DEFAULT_ACTION_SET
from .counterfactual import (
    fit as fit_model,
    load_model,
    payload_to_json,
    save_model,
    simulate_hypothetical_outcomes,
    summarize_display,
)
from .harness import (
    config_from_json,
    config_to_json,
    load_run,
    run_experiment,
    run_replication,
)
from .pipeline import ingest as ingest_trips
from .pipeline import load_scenarios, read_trips_csv, save_scenarios, write_trips_csv
from .presets import calibrated_spec, desk_config
from .report import export_report
from .seeds import derive_seed
from .synthetic import generate_synthetic, target_days
from .welfare import max_welfare


@click.group()
def main() -> None:
    """Congestion-game display experiment toolkit."""


@main.command()
@click.option("--out", type=click.Path(), required=True, help="trip CSV to write")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--training-days", type=int, default=45, show_default=True)
@click.option(
    "--days-out",
    type=click.Path(),
    default=None,
    help="optional JSON file listing the corpus's target days",
)
def synth(out: str, seed: int, training_days: int, days_out: str | None) -> None:
    """Generate the calibrated synthetic trip corpus."""
    spec = calibrated_spec(artifact_seed=seed, n_training_days=training_days)
    trips = generate_synthetic(spec, DEFAULT_ACTION_SET)
    write_trips_csv(out, trips)
    click.echo(f"wrote {len(trips)} trips to {out}")
    if days_out:
        Path(days_out).write_text(
            json.dumps([d.isoformat() for d in target_days(spec)], indent=2)
        )
        click.echo(f"wrote target-day list to {days_out}")


@main.command()
@click.option("--trips", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option(
    "--days",
    type=click.Path(exists=True),
    default=None,
    help="JSON allowlist of homogeneous target days (default: all days)",
)
def ingest(trips: str, out: str, days: str | None) -> None:
    """Deduce per-day decision scenarios from a trip file."""
    records = read_trips_csv(trips)
    allowlist = None
    if days:
        allowlist = [date.fromisoformat(d) for d in json.loads(Path(days).read_text())]
    scenario_set = ingest_trips(records, DEFAULT_ACTION_SET, homogeneity=allowlist)
    save_scenarios(out, scenario_set)
    click.echo(f"wrote {len(scenario_set.scenarios)} scenarios to {out}")


@main.command("fit")
@click.option("--scenarios", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option(
    "--shrinkage",
    type=click.Choice(["pooled", "none"]),
    default="pooled",
    show_default=True,
)
def fit_cmd(scenarios: str, out: str, shrinkage: str) -> None:
    """Fit the flow-to-pickups payoff model from scenarios."""
    scenario_set = load_scenarios(scenarios)
    model = fit_model(scenario_set.training_pairs(), shrinkage=shrinkage)
    save_model(out, model)
    for district, d in zip(scenario_set.action_set.districts, model.districts):
        click.echo(
            f"{district.id}: intercept={d.intercept:.4f} slope={d.slope:.4f} "
            f"bounds=[{d.flow_min:.0f}, {d.flow_max:.0f}]"
        )
    click.echo(f"sigma={model.sigma:.4f}; wrote {out}")


@main.command("simulate-display")
@click.option("--scenarios", type=click.Path(exists=True), required=True)
@click.option("--model", type=click.Path(exists=True), required=True)
@click.option("--day", required=True, help="scenario day (ISO date)")
@click.option("--frames", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--kind", type=click.Choice(["static", "hops"]), default="hops")
@click.option("--out", type=click.Path(), required=True)
def simulate_display(
    scenarios: str, model: str, day: str, frames: int, seed: int, kind: str, out: str
) -> None:
    """Simulate hypothetical outcomes and write a display payload."""
    scenario_set = load_scenarios(scenarios)
    scenario = scenario_set.by_day(date.fromisoformat(day))
    outcome_set = simulate_hypothetical_outcomes(
        scenario,
        load_model(model),
        n_frames=frames,
        seed=derive_seed(seed, "display", day),
    )
    payload = summarize_display(outcome_set, kind)
    Path(out).write_text(json.dumps(payload_to_json(payload), sort_keys=True))
    click.echo(
        f"wrote {kind} payload for {day}: mean flows "
        f"{tuple(round(f, 1) for f in payload.static_flows)}"
    )


@main.command("example-config")
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--scale", type=float, default=0.1, show_default=True)
def example_config(out: str, seed: int, scale: float) -> None:
    """Write the annotated desk-scale experiment config."""
    config = desk_config(seed=seed, roster_scale=scale)
    Path(out).write_text(json.dumps(config_to_json(config), indent=2, sort_keys=True))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out", "rundir", type=click.Path(), required=True)
@click.option(
    "--variant",
    type=click.Choice(["main", "robust_trial_order", "robust_composition"]),
    default="main",
    show_default=True,
)
@click.option(
    "--main-run",
    type=click.Path(exists=True),
    default=None,
    help="completed main run directory (required for robust_composition)",
)
@click.option(
    "--through",
    type=click.Choice(["l1", "l2", "system", "report"]),
    default="report",
    show_default=True,
)
@click.option("--seed", type=int, default=None, help="override the config seed")
def run(
    config_path: str,
    rundir: str,
    variant: str,
    main_run: str | None,
    through: str,
    seed: int | None,
) -> None:
    """Execute the staged experiment pipeline."""
    config = config_from_json(json.loads(Path(config_path).read_text()))
    if seed is not None:
        config = replace(config, seed=seed)
    main_ctx = load_run(main_run) if main_run else None
    if variant == "main":
        ctx = run_experiment(config, rundir, through=through)
    else:
        ctx = run_replication(
            config, variant, rundir, main_ctx=main_ctx, through=through
        )
    click.echo(f"run complete through {through}: {ctx.rundir.root}")
    for stage, done in ctx.manifest["stages"].items():
        click.echo(f"  {stage}: {'done' if done else 'pending'}")


@main.command()
@click.option("--run", "rundir", type=click.Path(exists=True), required=True)
def metrics(rundir: str) -> None:
    """Export the report (tables and figures) from a completed run."""
    ctx = load_run(rundir)
    paths = export_report(ctx)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@main.command()
@click.option("--scenarios", type=click.Path(exists=True), required=True)
@click.option("--model", type=click.Path(exists=True), required=True)
@click.option("--day", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--restarts", type=int, default=16, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def optimize(
    scenarios: str, model: str, day: str, seed: int, restarts: int, out: str | None
) -> None:
    """Find the welfare-maximizing flow allocation for a scenario day."""
    scenario_set = load_scenarios(scenarios)
    scenario = scenario_set.by_day(date.fromisoformat(day))
    optimum = max_welfare(
        scenario.total_drivers, load_model(model), seed=seed, restarts=restarts
    )
    click.echo(
        f"max pickups {optimum.max_pickups:.3f} at flow "
        f"{tuple(round(f, 2) for f in optimum.optimal_flow.counts)} "
        f"(violation {optimum.constraint_violation:.2e})"
    )
    if out:
        Path(out).write_text(
            json.dumps(
                {
                    "schema": "welfare-optimum/1",
                    "day": day,
                    "max_pickups": optimum.max_pickups,
                    "optimal_flow": list(optimum.optimal_flow.counts),
                    "constraint_violation": optimum.constraint_violation,
                },
                indent=2,
                sort_keys=True,
            )
        )


@main.command()
@click.option("--run", "rundir", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--assignment",
    type=click.Choice(["balanced", "random"]),
    default="balanced",
    show_default=True,
)
@click.option(
    "--count-self/--no-count-self",
    default=False,
    show_default=True,
    help="include the participant in the displayed competitor count",
)
@click.option("--sessions-dir", type=click.Path(), default=None)
def serve(
    rundir: str,
    host: str,
    port: int,
    seed: int,
    assignment: str,
    count_self: bool,
    sessions_dir: str | None,
) -> None:
    """Start the participant session service for a prepared run."""
    import uvicorn

    from .service import create_app

    ctx = load_run(rundir)
    app = create_app(
        ctx,
        assignment=assignment,
        count_self=count_self,
        service_seed=seed,
        session_dir=sessions_dir,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
