"""Constrained welfare maximization for a decision scenario.

Finds the flow allocation maximizing total predicted pickups subject to
the flow summing to the scenario's driver count and staying inside each
district's historical bounds. Solved as a minimization of the drivers who
fail to secure pickups, with an augmented-Lagrangian outer loop on the sum
constraint, a projected-gradient inner solver on the box, multiple random
restarts, and an exact pairwise-exchange polish. The objective evaluates
the same boundary-heuristic payoff model used everywhere else, so the
optimum is commensurable with simulated outcomes.

The search space is three-dimensional, so everything below runs on plain
floats; numpy buys nothing at this size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import FlowDistribution
from .counterfactual import CounterfactualModel, predict_pickups
from .seeds import derive_rng

DEFAULT_RESTARTS = 16
PENALTY_INITIAL = 10.0
PENALTY_GROWTH = 10.0
CONSTRAINT_TOL = 1e-6
STEP_TOL = 1e-8


@dataclass(frozen=True)
class WelfareOptimum:
    max_pickups: float
    optimal_flow: FlowDistribution
    constraint_violation: float


class _PickupCurves:
    """Per-district pickup predictions with one-sided derivatives."""

    def __init__(self, model: CounterfactualModel):
        self.a = [d.intercept for d in model.districts]
        self.b = [d.slope for d in model.districts]
        self.hi = [d.flow_max for d in model.districts]
        self.half_s2 = model.sigma**2 / 2.0
        self.n = model.n_districts

    def district(self, d: int, f: float) -> float:
        if f <= 0:
            return 0.0
        f_eval = f if f < self.hi[d] else self.hi[d]
        raw = math.exp(self.a[d] + self.b[d] * math.log(f_eval) + self.half_s2)
        cap = f if f < self.hi[d] else self.hi[d]
        return raw if raw < cap else cap

    def total(self, flow) -> float:
        return sum(self.district(d, flow[d]) for d in range(self.n))

    def total_and_grad(self, flow) -> tuple[float, list[float]]:
        total = 0.0
        grad = [0.0] * self.n
        for d in range(self.n):
            f = flow[d]
            if f <= 0:
                grad[d] = 1.0
                continue
            hi = self.hi[d]
            f_eval = f if f < hi else hi
            raw = math.exp(self.a[d] + self.b[d] * math.log(f_eval) + self.half_s2)
            cap = f if f < hi else hi
            total += raw if raw < cap else cap
            if f >= hi:
                grad[d] = 0.0
            elif raw < f:
                grad[d] = self.b[d] * raw / f
            else:
                grad[d] = 1.0
        return total, grad


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def _project_sum_box(x, lo, hi, total) -> list[float]:
    """Euclidean projection onto {sum f = total, lo <= f <= hi}."""
    mu_lo = min(l - v for l, v in zip(lo, x)) - 1.0
    mu_hi = max(h - v for h, v in zip(hi, x)) + 1.0
    for _ in range(80):
        mu = 0.5 * (mu_lo + mu_hi)
        s = sum(_clip(v + mu, l, h) for v, l, h in zip(x, lo, hi))
        if s < total:
            mu_lo = mu
        else:
            mu_hi = mu
    mu = 0.5 * (mu_lo + mu_hi)
    return [_clip(v + mu, l, h) for v, l, h in zip(x, lo, hi)]


def max_welfare(
    n_drivers: float,
    model: CounterfactualModel,
    bounds: tuple[tuple[float, float], ...] | None = None,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> WelfareOptimum:
    """Maximum attainable pickups and the flow achieving it.

    The outer loop updates the multiplier on ``sum(flow) = n_drivers`` and
    grows the penalty tenfold when the violation stalls; the inner loop is
    projected gradient with backtracking on the district bounds. Each
    restart finishes with an exact feasibility projection and a
    pairwise-exchange polish; the best restart wins.
    """
    if bounds is None:
        bounds = model.flow_bounds
    lo = [float(b[0]) for b in bounds]
    hi = [float(b[1]) for b in bounds]
    if any(l > h for l, h in zip(lo, hi)):
        raise ValueError("constraint set empty: lower bound above upper")
    if not (sum(lo) - 1e-9 <= n_drivers <= sum(hi) + 1e-9):
        raise ValueError(
            f"constraint set empty: {n_drivers} drivers outside "
            f"[{sum(lo)}, {sum(hi)}]"
        )
    curves = _PickupCurves(model)

    best_flow: list[float] | None = None
    best_total = -math.inf
    for k in range(restarts):
        rng = derive_rng(seed, "restart", k)
        x = _project_sum_box(
            [float(rng.uniform(l, h)) for l, h in zip(lo, hi)], lo, hi, n_drivers
        )
        lam = 0.0
        rho = PENALTY_INITIAL
        prev_violation = math.inf
        for _outer in range(8):
            x, converged = _inner_solve(curves, x, lo, hi, n_drivers, lam, rho)
            c = sum(x) - n_drivers
            if abs(c) < CONSTRAINT_TOL and converged:
                break
            lam -= rho * c
            if abs(c) > 0.25 * prev_violation:
                rho *= PENALTY_GROWTH
            prev_violation = abs(c)
        x = _project_sum_box(x, lo, hi, n_drivers)
        x = _polish_on_constraint(curves, x, lo, hi)
        total = curves.total(x)
        if total > best_total:
            best_total = total
            best_flow = x

    assert best_flow is not None
    return WelfareOptimum(
        max_pickups=best_total,
        optimal_flow=FlowDistribution(tuple(best_flow)),
        constraint_violation=abs(sum(best_flow) - n_drivers),
    )


def _inner_solve(
    curves: _PickupCurves,
    x: list[float],
    lo: list[float],
    hi: list[float],
    n_drivers: float,
    lam: float,
    rho: float,
    max_iter: int = 50,
) -> tuple[list[float], bool]:
    def al_value(f) -> float:
        c = sum(f) - n_drivers
        return (n_drivers - curves.total(f)) - lam * c + 0.5 * rho * c * c

    value = al_value(x)
    step = 1.0 / max(rho, 1.0)
    for _ in range(max_iter):
        _, grad_pick = curves.total_and_grad(x)
        c = sum(x) - n_drivers
        shift = -lam + rho * c
        grad = [-g + shift for g in grad_pick]
        step = min(step * 4.0, 1e4)  # ramp back up after backtracks
        improved = False
        move = 0.0
        while step > 1e-14:
            candidate = [
                _clip(v - step * g, l, h) for v, g, l, h in zip(x, grad, lo, hi)
            ]
            cand_value = al_value(candidate)
            move = max(abs(cv - v) for cv, v in zip(candidate, x))
            if cand_value <= value - 1e-12 * max(1.0, abs(value)):
                x, value = candidate, cand_value
                improved = True
                break
            step *= 0.5
        if not improved:
            return x, True
        if move < STEP_TOL:
            return x, True
    return x, False


def _polish_on_constraint(
    curves: _PickupCurves,
    x: list[float],
    lo: list[float],
    hi: list[float],
    max_sweeps: int = 60,
) -> list[float]:
    """Exact pairwise-exchange refinement on the constraint set.

    Augmented-Lagrangian iterates can stall with unequal marginal returns
    because the penalty curvature dominates the transverse curvature.
    Per-district pickups are concave in their own flow, so the objective
    restricted to any mass exchange between two districts is convex and a
    ternary line search is exact; sweeping all pairs until no exchange
    helps equalizes marginals subject to the active bounds.
    """
    x = list(x)
    n = len(x)
    values = [curves.district(d, x[d]) for d in range(n)]
    for _ in range(max_sweeps):
        best_gain = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                d_lo = max(lo[i] - x[i], x[j] - hi[j])
                d_hi = min(hi[i] - x[i], x[j] - lo[j])
                if d_hi - d_lo < 1e-12:
                    continue
                base = values[i] + values[j]

                def gain(delta: float) -> float:
                    return (
                        curves.district(i, x[i] + delta)
                        + curves.district(j, x[j] - delta)
                        - base
                    )

                a, b = d_lo, d_hi
                for _t in range(72):
                    third = (b - a) / 3.0
                    if gain(a + third) < gain(b - third):
                        a = a + third
                    else:
                        b = b - third
                delta = 0.5 * (a + b)
                g = gain(delta)
                if g > 1e-12:
                    x[i] += delta
                    x[j] -= delta
                    values[i] = curves.district(i, x[i])
                    values[j] = curves.district(j, x[j])
                    best_gain = max(best_gain, g)
        if best_gain <= 1e-12:
            break
    return x


def grid_search_max_pickups(
    n_drivers: int,
    model: CounterfactualModel,
    bounds: tuple[tuple[float, float], ...] | None = None,
) -> WelfareOptimum:
    """Exhaustive integer search oracle for small scenarios (tests only)."""
    if bounds is None:
        bounds = model.flow_bounds
    if len(bounds) != 3:
        raise ValueError("grid oracle supports exactly 3 districts")
    (l1, h1), (l2, h2), (l3, h3) = bounds
    best = -math.inf
    best_flow = None
    for f1 in range(math.ceil(l1), math.floor(h1) + 1):
        for f2 in range(math.ceil(l2), math.floor(h2) + 1):
            f3 = n_drivers - f1 - f2
            if f3 < l3 or f3 > h3:
                continue
            total = sum(predict_pickups(model, (f1, f2, f3)))
            if total > best:
                best = total
                best_flow = (float(f1), float(f2), float(f3))
    if best_flow is None:
        raise ValueError("constraint set empty: no feasible integer flow")
    return WelfareOptimum(
        max_pickups=best,
        optimal_flow=FlowDistribution(best_flow),
        constraint_violation=0.0,
    )
