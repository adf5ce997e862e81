"""Outcome measures: Earth Mover's Distance, best response, anticipation
error, distribution shift, and welfare-ratio summaries.

EMD between two equal-mass flow distributions is the minimum-cost
transportation plan under a Euclidean ground metric, divided by the total
number of drivers. With three bins and a metric cost matrix the optimal
plan is forced: the signed difference between the flows has at most one
deficit node or at most one excess node, and the triangle inequality makes
direct shipment optimal. Larger instances fall back to a linear program.
``transport_oracle`` is an independent verifier that enumerates basic
feasible solutions of the transportation polytope; it is for tests only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import ActionSet, FlowDistribution

_MASS_TOL = 1e-6


@dataclass(frozen=True)
class GroundMetric:
    """2D bin positions plus the pairwise Euclidean distance matrix."""

    positions: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("ground-metric positions must be distinct")
        n = len(self.positions)
        d = self.distances
        for i, j, k in itertools.product(range(n), repeat=3):
            if d[i][j] > d[i][k] + d[k][j] + 1e-12:
                raise ValueError("ground metric violates the triangle inequality")

    @cached_property
    def distances(self) -> tuple[tuple[float, ...], ...]:
        pos = self.positions
        return tuple(
            tuple(math.dist(a, b) for b in pos) for a in pos
        )

    @classmethod
    def from_action_set(cls, action_set: ActionSet) -> "GroundMetric":
        return cls(action_set.positions)

    @classmethod
    def collinear(cls, n: int = 3, spacing: float = 1.0) -> "GroundMetric":
        return cls(tuple((i * spacing, 0.0) for i in range(n)))


@dataclass(frozen=True)
class SummaryInterval:
    """Median with a central 95th-percentile interval."""

    median: float
    lo: float
    hi: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SummaryInterval":
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            raise ValueError("cannot summarize an empty value set")
        return cls(
            median=float(np.median(arr)),
            lo=float(np.percentile(arr, 2.5)),
            hi=float(np.percentile(arr, 97.5)),
        )


def _check_masses(a: FlowDistribution, b: FlowDistribution) -> float:
    ta, tb = a.total, b.total
    if abs(ta - tb) > _MASS_TOL * max(1.0, ta, tb):
        raise ValueError(f"mass mismatch: totals {ta} vs {tb}")
    if ta <= 0:
        raise ValueError("mass mismatch: totals must be positive")
    return ta


def _forced_plan_cost(delta: Sequence[float], dist) -> float | None:
    """Transport cost when the plan is forced (<=1 source or <=1 sink)."""
    sources = [i for i, d in enumerate(delta) if d > 0]
    sinks = [i for i, d in enumerate(delta) if d < 0]
    if not sources and not sinks:
        return 0.0
    if len(sinks) == 1:
        t = sinks[0]
        return sum(delta[i] * dist[i][t] for i in sources)
    if len(sources) == 1:
        s = sources[0]
        return sum(-delta[j] * dist[s][j] for j in sinks)
    return None


def _linprog_cost(a, b, dist) -> float:
    from scipy.optimize import linprog

    m, n = len(a), len(b)
    c = [dist[i][j] for i in range(m) for j in range(n)]
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(c, A_eq=a_eq, b_eq=np.concatenate([a, b]), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transportation LP failed: {res.message}")
    return float(res.fun)


def emd(a: FlowDistribution, b: FlowDistribution, metric: GroundMetric) -> float:
    """Minimal transport cost between equal-mass flows, per driver."""
    total = _check_masses(a, b)
    dist = metric.distances
    if len(a.counts) != len(metric.positions) or len(b.counts) != len(
        metric.positions
    ):
        raise ValueError("flow length does not match the ground metric")
    delta = [x - y for x, y in zip(a.counts, b.counts)]
    cost = _forced_plan_cost(delta, dist)
    if cost is None:
        cost = _linprog_cost(a.counts, b.counts, dist)
    return cost / total


def transport_oracle(
    a: FlowDistribution, b: FlowDistribution, metric: GroundMetric
) -> float:
    """Exact optimum by enumerating spanning-tree basic solutions.

    Every vertex of the transportation polytope is the flow of a spanning
    tree of the complete bipartite supply/demand graph, so scanning all
    trees finds the optimum. Only viable for tiny instances (n <= 4).
    """
    total = _check_masses(a, b)
    m, n = len(a.counts), len(b.counts)
    if m > 4 or n > 4:
        raise ValueError("transport oracle only supports up to 4 bins")
    dist = metric.distances
    edges = [(i, j) for i in range(m) for j in range(n)]
    best = math.inf
    for subset in itertools.combinations(edges, m + n - 1):
        cost = _tree_flow_cost(subset, a.counts, b.counts, dist, m, n)
        if cost is not None and cost < best:
            best = cost
    if not math.isfinite(best):
        raise RuntimeError("no feasible basic solution found")
    return best / total


def _tree_flow_cost(subset, a, b, dist, m, n) -> float | None:
    rem = list(a) + list(b)
    adj: list[list[int]] = [[] for _ in range(m + n)]
    for e, (i, j) in enumerate(subset):
        adj[i].append(e)
        adj[m + j].append(e)
    alive = [True] * len(subset)
    degree = [len(x) for x in adj]
    cost = 0.0
    for _ in range(len(subset)):
        leaf = next(
            (v for v in range(m + n) if degree[v] == 1), None
        )
        if leaf is None:
            return None  # cycle or disconnected: not a tree
        e = next(e for e in adj[leaf] if alive[e])
        i, j = subset[e]
        flow = rem[leaf]
        if flow < -1e-9:
            return None
        rem[i] -= flow
        rem[m + j] -= flow
        cost += flow * dist[i][j]
        alive[e] = False
        for v in (i, m + j):
            degree[v] -= 1
    if any(abs(r) > 1e-6 for r in rem):
        return None
    return cost


def best_response(chosen: int, probabilities: Sequence[float]) -> bool:
    """True iff the chosen bin attains the maximum probability.

    Ties count as best responses for every maximizer; a relative slack
    absorbs floating-point noise (capped probabilities tie exactly).
    """
    top = max(probabilities)
    return probabilities[chosen] >= top - 1e-12 * max(1.0, abs(top))


def anticipation_error(
    anticipated: FlowDistribution,
    outcome_flow: FlowDistribution,
    metric: GroundMetric,
) -> float:
    """EMD between an anticipated competitor flow and what was realized."""
    return emd(anticipated, outcome_flow, metric)


@dataclass(frozen=True)
class ShiftResult:
    values: tuple[float, ...]
    summary: SummaryInterval


def distribution_shift(
    displayed: FlowDistribution,
    realized_flows: Sequence[FlowDistribution],
    metric: GroundMetric,
) -> ShiftResult:
    """Per-replicate EMD between the displayed flow and system outcomes.

    Replicate totals may differ from the displayed total when the level
    composition was rounded (exact_paper counts need not sum to N); the
    displayed flow is rescaled to each replicate's mass before measuring.
    """
    values = []
    for flow in realized_flows:
        disp = displayed
        if abs(disp.total - flow.total) > _MASS_TOL:
            disp = disp.scaled_to(flow.total)
        values.append(emd(disp, flow, metric))
    return ShiftResult(tuple(values), SummaryInterval.from_values(values))


@dataclass(frozen=True)
class RatioResult:
    values: tuple[float, ...]
    summary: SummaryInterval
    clamped: bool


def welfare_ratio(
    realized_pickups: Sequence[float], max_pickups: float
) -> RatioResult:
    """Realized over maximum pickups per replicate, clamped to [0, 1].

    ``clamped`` flags replicates that beat the optimizer's maximum, which
    signals an under-converged optimum rather than free welfare.
    """
    if max_pickups <= 0:
        raise ValueError("max_pickups must be positive")
    raw = [p / max_pickups for p in realized_pickups]
    clamped = any(r > 1.0 + 1e-12 for r in raw)
    values = [min(1.0, max(0.0, r)) for r in raw]
    return RatioResult(tuple(values), SummaryInterval.from_values(values), clamped)
