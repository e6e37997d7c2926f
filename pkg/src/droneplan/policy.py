"""Rolling-horizon policies over a demand instance.

Both policies batch decisions per interval: segregate carried requests into
departed (frozen) and idle (re-routable), build the interval program with
rolling pins, solve, commit newly accepted requests, and drop completed
ones. The surrogate policy additionally snapshots link occupancy, queries
the priority model, and adds the balance-weighted reserve-capacity term to
the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .demand import DemandConfig, Instance, Request
from .feasibility import check_routes
from .learning import (
    KnnRegressor,
    OccupancySnapshot,
    PriorityVector,
    encode_features,
    knn_predict,
    link_activity,
    standardize_beta,
    uniform_priorities,
)
from .milp_core import (
    IntervalContext,
    SurrogateParams,
    apply_rolling_modifications,
    build_interval_model,
    set_objective,
)
from .reservation import SpaceTimeRoute
from .solver import SolveResult, SolverConfig, solve


class PolicyError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Balance-weight profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaProfile:
    """Schedule of the balance weight across intervals.

    kinds: constant (fixed value), stepwise ((value, length) segments),
    polynomial (a2*t^2 + a1*t + a0), exponential (scale*exp(rate*t) + offset),
    all evaluated at the 0-based interval index.
    """

    name: str
    kind: str
    constant: float = 0.0
    steps: tuple[tuple[float, int], ...] = ()
    coefficients: tuple[float, float, float] = (0.0, 0.0, 0.0)
    exponential: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def segments_total(self) -> int:
        return sum(length for _v, length in self.steps)


def eval_alpha(profile: AlphaProfile, interval_index: int) -> float:
    """Balance weight for the 0-based interval index."""
    if interval_index < 0:
        raise PolicyError(f"interval index {interval_index} negative")
    t = interval_index
    if profile.kind == "constant":
        return profile.constant
    if profile.kind == "stepwise":
        remaining = t
        for value, length in profile.steps:
            if remaining < length:
                return value
            remaining -= length
        return profile.steps[-1][0]
    if profile.kind == "polynomial":
        a2, a1, a0 = profile.coefficients
        return a2 * t * t + a1 * t + a0
    if profile.kind == "exponential":
        scale, rate, offset = profile.exponential
        return scale * math.exp(rate * t) + offset
    raise PolicyError(f"unknown profile kind {profile.kind!r}")


def constant_profile(value: float, name: str | None = None) -> AlphaProfile:
    return AlphaProfile(name=name or f"CONST_{value:g}", kind="constant", constant=value)


def named_profiles() -> dict[str, AlphaProfile]:
    profiles = [
        constant_profile(2.0, "SP_CTE1"),
        constant_profile(1.5, "SP_CTE2"),
        constant_profile(1.25, "SP_CTE3"),
        constant_profile(1.0, "SP_CTE4"),
        constant_profile(0.5, "SP_CTE5"),
        constant_profile(-1.0, "SP_CTE6"),
        AlphaProfile("SP_STP1", "stepwise", steps=((1.5, 6), (1.25, 6))),
        AlphaProfile("SP_STP2", "stepwise", steps=((1.5, 8), (1.25, 4))),
        AlphaProfile("SP_STP3", "stepwise", steps=((1.5, 4), (1.25, 4), (1.0, 4))),
        AlphaProfile("SP_STP4", "stepwise", steps=((1.5, 7), (1.25, 3), (1.0, 2))),
        AlphaProfile("SP_STP5", "stepwise", steps=((1.25, 6), (1.0, 6))),
        AlphaProfile("SP_STP6", "stepwise", steps=((1.25, 8), (1.0, 4))),
        AlphaProfile("SP_PLY1", "polynomial", coefficients=(0.01, -0.15545, 1.5)),
        AlphaProfile("SP_PLY2", "polynomial", coefficients=(-0.01, 0.06455, 1.5)),
        AlphaProfile("SP_PLY3", "polynomial", coefficients=(0.0, -0.04545, 1.5)),
        AlphaProfile("SP_PLY4", "exponential", exponential=(1.0, -0.063, 0.5)),
        constant_profile(0.0, "SP_ZERO"),
    ]
    return {p.name: p for p in profiles}


# ---------------------------------------------------------------------------
# Simulation state and reports
# ---------------------------------------------------------------------------


@dataclass
class _Tracked:
    request: Request
    route: SpaceTimeRoute


@dataclass
class SimulationState:
    interval: int = 0
    tracked: dict[int, _Tracked] = field(default_factory=dict)
    cumulative_profit: int = 0
    accepted_total: int = 0
    arrived_total: int = 0

    def active_pairs(self, window_start: int) -> list[tuple[Request, SpaceTimeRoute]]:
        return [
            (c.request, c.route)
            for c in self.tracked.values()
            if c.route.departure <= window_start
        ]

    def live_pairs(self) -> list[tuple[Request, SpaceTimeRoute]]:
        return [(c.request, c.route) for c in self.tracked.values()]


def segregate_requests(
    state: SimulationState, window_start: int
) -> tuple[list[tuple[Request, SpaceTimeRoute]], list[Request]]:
    """Split carried requests into departed (frozen) and idle (clamped)."""
    active = []
    idle = []
    for c in sorted(state.tracked.values(), key=lambda c: c.request.id):
        if c.route.departure <= window_start:
            active.append((c.request, c.route))
        else:
            c.request = c.request.clamp_earliest(window_start)
            idle.append(c.request)
    return active, idle


def remove_completed(state: SimulationState, interval_end: int) -> list[int]:
    """Drop requests whose routes finish at or before the interval end."""
    done = [rid for rid, c in state.tracked.items() if c.route.arrival <= interval_end]
    for rid in done:
        del state.tracked[rid]
    return done


@dataclass
class PolicyRunReport:
    policy: str
    arrived: int
    accepted: int
    profit: int
    interval_profits: list[int]
    interval_objectives: list[float]
    interval_statuses: list[str]
    interval_nodes: list[int] = field(default_factory=list)

    @property
    def service_rate(self) -> float:
        return self.accepted / self.arrived if self.arrived else 0.0


def expected_total_profit(config: DemandConfig, intervals: int) -> float:
    """Mean profit times the expected request count over the horizon."""
    return config.mean_profit * config.rate * intervals


def capacity_volume(network, steps: int) -> float:
    """Total entry capacity over ``steps`` time steps."""
    return sum(l.capacity for l in network.links) * steps


def _run(
    instance: Instance,
    solver_config: SolverConfig,
    label: str,
    objective_for_interval,
    check_every_interval: bool = True,
) -> PolicyRunReport:
    network = instance.network
    state = SimulationState()
    report = PolicyRunReport(label, 0, 0, 0, [], [], [], [])

    for i in range(1, instance.intervals + 1):
        state.interval = i
        ws = (i - 1) * instance.duration
        interval_end = i * instance.duration
        active, idle = segregate_requests(state, ws)
        idle_hints = tuple(
            (r.id, state.tracked[r.id].route) for r in idle if r.id in state.tracked
        )
        current = instance.interval_requests(i)
        state.arrived_total += len(current)

        context = IntervalContext(
            index=i,
            window_start=ws,
            interval_end=interval_end,
            current=tuple(current),
            idle=tuple(idle),
            active=tuple(active),
            idle_hints=idle_hints,
        )
        model = build_interval_model(network, context)
        apply_rolling_modifications(model, context)
        mode, params = objective_for_interval(i - 1, state, context)
        set_objective(model, mode, params)

        result: SolveResult = solve(model, solver_config)
        if result.status not in ("optimal", "feasible_time_limit"):
            raise PolicyError(
                f"{label}: interval {i} solve failed with status {result.status}: {result.message}"
            )

        accepted_now = 0
        profit_now = 0
        previously_accepted = set(state.tracked)
        for r in idle:
            route = result.routes.get(r.id)
            if route is None:
                raise PolicyError(f"{label}: interval {i} dropped accepted request {r.id}")
            state.tracked[r.id].request = r
            state.tracked[r.id].route = route
        for r in current:
            route = result.routes.get(r.id)
            if route is not None:
                state.tracked[r.id] = _Tracked(request=r, route=route)
                accepted_now += 1
                profit_now += r.profit
        if not previously_accepted <= set(state.tracked):
            raise PolicyError(f"{label}: interval {i} lost a committed request")

        state.accepted_total += accepted_now
        state.cumulative_profit += profit_now
        report.interval_profits.append(profit_now)
        report.interval_objectives.append(result.objective)
        report.interval_statuses.append(result.status)
        report.interval_nodes.append(result.nodes_explored)

        if check_every_interval:
            violations = check_routes(network, state.live_pairs())
            if violations:
                raise PolicyError(
                    f"{label}: interval {i} produced an infeasible route set:\n  "
                    + "\n  ".join(violations)
                )
        remove_completed(state, interval_end)

    report.arrived = state.arrived_total
    report.accepted = state.accepted_total
    report.profit = state.cumulative_profit
    return report


def run_myopic(instance: Instance, solver_config: SolverConfig | None = None) -> PolicyRunReport:
    """Per-interval profit maximization, blind to future arrivals."""

    def objective(_idx, _state, _context):
        return "myopic", None

    return _run(instance, solver_config or SolverConfig(), "myopic", objective)


def run_surrogate(
    instance: Instance,
    solver_config: SolverConfig | None,
    knn_model: KnnRegressor | None,
    alpha_profile: AlphaProfile,
    demand_config: DemandConfig,
    uniform_beta: bool = False,
    label: str | None = None,
) -> PolicyRunReport:
    """Profit plus priority-weighted reserve capacity, balance per profile.

    ``uniform_beta`` replaces the model query with the constant standardized
    vector 1/|A|; otherwise the trained model predicts raw priorities from
    the occupancy snapshot and the prediction is standardized per interval.
    """
    network = instance.network
    profit_norm = expected_total_profit(demand_config, instance.intervals)
    if not uniform_beta and knn_model is None:
        raise PolicyError("surrogate policy needs a trained model unless uniform_beta is set")

    def objective(idx, state, context):
        ws = context.window_start
        snapshot = OccupancySnapshot.zeros(network)
        for _req, route in state.active_pairs(ws):
            link_activity(route, ws, snapshot)
        if uniform_beta:
            beta = uniform_priorities(network)
        else:
            raw: PriorityVector = knn_predict(knn_model, encode_features(snapshot, network))
            beta = standardize_beta(raw)
        params = SurrogateParams(
            alpha=eval_alpha(alpha_profile, idx),
            beta=tuple(float(b) for b in beta.values),
            profit_normalizer=profit_norm,
            capacity_normalizer=capacity_volume(network, len(context.slack_steps)),
        )
        return "surrogate", params

    name = label or f"surrogate:{alpha_profile.name}" + (":uniform" if uniform_beta else "")
    return _run(instance, solver_config or SolverConfig(), name, objective)
