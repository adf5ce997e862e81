"""The payoff engine: a log-log flow-to-pickups model per district.

Districts get their own intercept and slope, fitted by least squares on
(log flow, log pickups) with optional empirical-Bayes shrinkage toward the
pooled fit. Out-of-range flows use two heuristics: above the historical
maximum the prediction freezes at the maximum (pickups stop growing with
extra drivers), below the historical minimum the model still extrapolates
but pickups are capped at the flow itself, which yields a 100% pickup
probability whenever the model expects more pickups than drivers present.
Predicted pickups never exceed the drivers present in any regime.

Mean-mode predictions include the log-normal mean correction
exp(sigma^2 / 2) so they agree with the average of noisy samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .pipeline import DecisionScenario
from .seeds import derive_rng

DrawMode = Literal["mean", "sample"]
DisplayKind = Literal["static", "hops"]

FRAME_INTERVAL_SECONDS = 0.2
DEFAULT_FRAME_COUNT = 1000


@dataclass(frozen=True)
class DistrictFit:
    intercept: float
    slope: float
    flow_min: float
    flow_max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.intercept) and math.isfinite(self.slope)):
            raise ValueError("coefficients must be finite")
        if self.flow_min < 1 or self.flow_min > self.flow_max:
            raise ValueError("flow bounds must satisfy 1 <= min <= max")


@dataclass(frozen=True)
class PosteriorDraw:
    intercepts: tuple[float, ...]
    slopes: tuple[float, ...]
    sigma: float


@dataclass(frozen=True)
class CounterfactualModel:
    districts: tuple[DistrictFit, ...]
    sigma: float
    draws: tuple[PosteriorDraw, ...] | None = None

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def n_districts(self) -> int:
        return len(self.districts)

    @property
    def flow_bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((d.flow_min, d.flow_max) for d in self.districts)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Slope, intercept, Sxx, and residual sum of squares."""
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx < 1e-12:
        raise ValueError("degenerate training data: flows have no variation")
    slope = float(((x - xbar) * (y - ybar)).sum() / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - intercept - slope * x
    return slope, intercept, sxx, float((resid**2).sum())


def fit(
    training: Sequence[tuple[Sequence[float], Sequence[float]]],
    shrinkage: Literal["none", "pooled"] = "pooled",
) -> CounterfactualModel:
    """Fit per-district coefficients from per-day (flows, pickups) pairs.

    ``pooled`` shrinks each district toward the global fit with weights
    proportional to the inverse within-district sampling variance, the
    empirical-Bayes analogue of a varying-intercepts/slopes hierarchy.
    """
    if not training:
        raise ValueError("degenerate training data: no observations")
    n_districts = len(training[0][0])
    flows = np.array([t[0] for t in training], dtype=float)
    pickups = np.array([t[1] for t in training], dtype=float)
    if flows.shape[0] < 3:
        raise ValueError("need at least 3 observations per district")
    if (flows < 1).any() or (pickups < 1).any():
        raise ValueError("flows and pickups must be >= 1 to log-transform")

    lx, ly = np.log(flows), np.log(pickups)
    per: list[dict] = []
    for d in range(n_districts):
        slope, intercept, sxx, ssr = _ols(lx[:, d], ly[:, d])
        n = lx.shape[0]
        s2 = ssr / max(1, n - 2)
        per.append(
            {
                "slope": slope,
                "intercept": intercept,
                "var_slope": s2 / sxx,
                "var_intercept": s2 * (1.0 / n + lx[:, d].mean() ** 2 / sxx),
            }
        )

    if shrinkage == "pooled" and n_districts > 1:
        g_slope, g_intercept, _, _ = _ols(lx.ravel(), ly.ravel())
        for key, gval in (("slope", g_slope), ("intercept", g_intercept)):
            ests = np.array([p[key] for p in per])
            samp = np.array([p[f"var_{key}"] for p in per])
            tau2 = max(0.0, float(((ests - gval) ** 2).mean() - samp.mean()))
            for p in per:
                denom = tau2 + p[f"var_{key}"]
                w = 1.0 if denom < 1e-15 else tau2 / denom
                p[key] = w * p[key] + (1.0 - w) * gval

    fits = []
    ssr_total = 0.0
    for d in range(n_districts):
        resid = ly[:, d] - per[d]["intercept"] - per[d]["slope"] * lx[:, d]
        ssr_total += float((resid**2).sum())
        fits.append(
            DistrictFit(
                intercept=per[d]["intercept"],
                slope=per[d]["slope"],
                flow_min=float(flows[:, d].min()),
                flow_max=float(flows[:, d].max()),
            )
        )
    dof = max(1, flows.size - 2 * n_districts)
    sigma = math.sqrt(max(ssr_total / dof, 1e-18))
    return CounterfactualModel(districts=tuple(fits), sigma=max(sigma, 1e-9))


def predict_pickups(
    model: CounterfactualModel,
    flow: Sequence[float],
    mode: DrawMode = "mean",
    rng: np.random.Generator | None = None,
    use_draws: bool = False,
) -> tuple[float, ...]:
    """Expected (or sampled) pickups per district at the given flow."""
    if len(flow) != model.n_districts:
        raise ValueError("flow length does not match the model")
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    intercepts = [d.intercept for d in model.districts]
    slopes = [d.slope for d in model.districts]
    sigma = model.sigma
    if use_draws and model.draws:
        if rng is None:
            raise ValueError("draw selection needs an rng")
        draw = model.draws[int(rng.integers(0, len(model.draws)))]
        intercepts, slopes, sigma = list(draw.intercepts), list(draw.slopes), draw.sigma

    out = []
    for d, f in enumerate(flow):
        f = float(f)
        if f <= 0:
            out.append(0.0)
            continue
        lo, hi = model.districts[d].flow_min, model.districts[d].flow_max
        f_eval = min(f, hi)
        mu = intercepts[d] + slopes[d] * math.log(f_eval)
        if mode == "mean":
            raw = math.exp(mu + sigma**2 / 2.0)
        else:
            raw = math.exp(mu + sigma * float(rng.standard_normal()))
        cap = min(f, hi)
        out.append(min(raw, cap))
    return tuple(out)


def pickup_probability(
    model: CounterfactualModel,
    flow: Sequence[float],
    pickups: Sequence[float] | None = None,
) -> tuple[float, ...]:
    """Per-district chance of a pickup: predicted pickups over flow.

    A district with zero flow is uncontested, so its probability is 1.
    """
    if pickups is None:
        pickups = predict_pickups(model, flow)
    probs = []
    for f, p in zip(flow, pickups):
        if f <= 0:
            probs.append(1.0)
        else:
            probs.append(min(1.0, p / f))
    return tuple(probs)


@dataclass(frozen=True)
class OutcomeFrame:
    flow: tuple[int, ...]
    pickups: tuple[float, ...]
    probabilities: tuple[float, ...]


@dataclass(frozen=True)
class HypotheticalOutcomeSet:
    frames: tuple[OutcomeFrame, ...]

    def __post_init__(self) -> None:
        for fr in self.frames:
            if any(not (0.0 <= p <= 1.0) for p in fr.probabilities):
                raise ValueError("frame probabilities must lie in [0, 1]")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def mean_flow(self) -> tuple[float, ...]:
        return tuple(
            float(np.mean([fr.flow[d] for fr in self.frames]))
            for d in range(len(self.frames[0].flow))
        )

    def mean_pickups(self) -> tuple[float, ...]:
        return tuple(
            float(np.mean([fr.pickups[d] for fr in self.frames]))
            for d in range(len(self.frames[0].flow))
        )

    def mean_probabilities(self) -> tuple[float, ...]:
        return tuple(
            float(np.mean([fr.probabilities[d] for fr in self.frames]))
            for d in range(len(self.frames[0].flow))
        )


def simulate_hypothetical_outcomes(
    scenario: DecisionScenario,
    model: CounterfactualModel,
    n_frames: int = DEFAULT_FRAME_COUNT,
    seed: int = 0,
    frame_noise: bool = False,
) -> HypotheticalOutcomeSet:
    """Re-sample every candidate's decision per frame and predict payoffs.

    Frames get derived per-index seeds, so the set is reproducible
    regardless of evaluation order. ``frame_noise`` adds the model's
    log-scale noise to each frame's predictions on top of flow
    uncertainty.
    """
    weights = scenario.decision_weight_matrix()
    if weights.shape[0] != scenario.total_drivers:
        raise ValueError("scenario candidates lack decision weights")
    n_bins = weights.shape[1]
    cum = np.cumsum(weights, axis=1)
    cum[:, -1] = 1.0
    frames = []
    for r in range(n_frames):
        rng = derive_rng(seed, "frame", r)
        u = rng.random(weights.shape[0])
        idx = np.minimum((u[:, None] > cum).sum(axis=1), n_bins - 1)
        flow = np.bincount(idx, minlength=n_bins)
        picks = predict_pickups(
            model,
            flow.tolist(),
            mode="sample" if frame_noise else "mean",
            rng=rng if frame_noise else None,
        )
        probs = pickup_probability(model, flow.tolist(), picks)
        frames.append(
            OutcomeFrame(
                flow=tuple(int(x) for x in flow),
                pickups=picks,
                probabilities=probs,
            )
        )
    return HypotheticalOutcomeSet(frames=tuple(frames))


@dataclass(frozen=True)
class DisplayPayload:
    """What a participant's display renders: a point estimate, optionally
    accompanied by the animated frame sequence."""

    kind: DisplayKind
    static_flows: tuple[float, ...]
    static_pickups: tuple[float, ...]
    static_probabilities: tuple[float, ...]
    frames: tuple[OutcomeFrame, ...] | None = None
    frame_interval: float = FRAME_INTERVAL_SECONDS

    def __post_init__(self) -> None:
        if self.kind == "hops" and not self.frames:
            raise ValueError("hops payloads need frames")
        if self.kind == "static" and self.frames is not None:
            raise ValueError("static payloads carry no frames")


def summarize_display(
    outcomes: HypotheticalOutcomeSet, kind: DisplayKind
) -> DisplayPayload:
    """Weighted-average point payload, or the ordered frame list."""
    if outcomes.n_frames == 0:
        raise ValueError("cannot summarize an empty outcome set")
    return DisplayPayload(
        kind=kind,
        static_flows=outcomes.mean_flow(),
        static_pickups=outcomes.mean_pickups(),
        static_probabilities=outcomes.mean_probabilities(),
        frames=outcomes.frames if kind == "hops" else None,
    )


# --- serialization ------------------------------------------------------


def model_to_json(model: CounterfactualModel) -> dict:
    return {
        "schema": "counterfactual-model/1",
        "sigma": model.sigma,
        "districts": [
            {
                "intercept": d.intercept,
                "slope": d.slope,
                "flow_min": d.flow_min,
                "flow_max": d.flow_max,
            }
            for d in model.districts
        ],
        "draws": None
        if model.draws is None
        else [
            {
                "intercepts": list(dr.intercepts),
                "slopes": list(dr.slopes),
                "sigma": dr.sigma,
            }
            for dr in model.draws
        ],
    }


def model_from_json(data: dict) -> CounterfactualModel:
    if data.get("schema") != "counterfactual-model/1":
        raise ValueError("not a counterfactual-model/1 document")
    draws = data.get("draws")
    return CounterfactualModel(
        districts=tuple(
            DistrictFit(
                intercept=float(d["intercept"]),
                slope=float(d["slope"]),
                flow_min=float(d["flow_min"]),
                flow_max=float(d["flow_max"]),
            )
            for d in data["districts"]
        ),
        sigma=float(data["sigma"]),
        draws=None
        if draws is None
        else tuple(
            PosteriorDraw(
                intercepts=tuple(float(x) for x in dr["intercepts"]),
                slopes=tuple(float(x) for x in dr["slopes"]),
                sigma=float(dr["sigma"]),
            )
            for dr in draws
        ),
    )


def save_model(path: str | Path, model: CounterfactualModel) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), indent=2, sort_keys=True))


def load_model(path: str | Path) -> CounterfactualModel:
    return model_from_json(json.loads(Path(path).read_text()))


def frame_to_json(frame: OutcomeFrame) -> dict:
    return {
        "flow": list(frame.flow),
        "pickups": list(frame.pickups),
        "probabilities": list(frame.probabilities),
    }


def frame_from_json(data: dict) -> OutcomeFrame:
    return OutcomeFrame(
        flow=tuple(int(x) for x in data["flow"]),
        pickups=tuple(float(x) for x in data["pickups"]),
        probabilities=tuple(float(x) for x in data["probabilities"]),
    )


def payload_to_json(payload: DisplayPayload) -> dict:
    doc = {
        "schema": "display-payload/1",
        "kind": payload.kind,
        "static": {
            "flows": list(payload.static_flows),
            "pickups": list(payload.static_pickups),
            "probabilities": list(payload.static_probabilities),
        },
        "frame_interval": payload.frame_interval,
    }
    if payload.kind == "hops":
        doc["frames"] = [frame_to_json(f) for f in payload.frames]
    return doc


def payload_from_json(data: dict) -> DisplayPayload:
    if data.get("schema") != "display-payload/1":
        raise ValueError("not a display-payload/1 document")
    frames = data.get("frames")
    return DisplayPayload(
        kind=data["kind"],
        static_flows=tuple(float(x) for x in data["static"]["flows"]),
        static_pickups=tuple(float(x) for x in data["static"]["pickups"]),
        static_probabilities=tuple(
            float(x) for x in data["static"]["probabilities"]
        ),
        frames=None if frames is None else tuple(frame_from_json(f) for f in frames),
        frame_interval=float(data.get("frame_interval", FRAME_INTERVAL_SECONDS)),
    )
