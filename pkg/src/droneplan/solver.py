"""Solvers for interval programs.

The builtin solver is exact at small scale: it enumerates each open
request's feasible space-time walks (a candidate per walk, plus rejection),
then runs depth-first branch-and-bound over requests ordered by descending
profit, with routes ordered by objective contribution and earliest arrival.
Objective arithmetic is integerized through exact rationals so pruning and
tie-breaking are reproducible and scale-invariant. Deterministic node
budgets (and a wall-clock backstop) cap the search; exhausted budgets return
the incumbent, mirroring how time-limited commercial solvers behave.

A propagation-based solver over explicit column/constraint models and an
exhaustive enumeration oracle provide two independent cross-checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .demand import Request
from .milp_core import (
    ExplicitModel,
    MilpModel,
    assignment_from_routes,
    profit_coefficient,
    route_objective_weight,
    slack_entry_coefficient,
    surrogate_constant,
)
from .network import Network
from .reservation import SpaceTimeRoute


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    time_limit: float = 300.0
    backend: str = "builtin"
    command: str | None = None
    tolerance: float = 1e-6
    node_limit: int | None = None
    candidate_cap: int | None = None
    generation_cap: int | None = None

    def __post_init__(self) -> None:
        if self.time_limit <= 0:
            raise SolverError("time limit must be positive")


@dataclass
class SolveResult:
    status: str  # optimal | feasible_time_limit | infeasible | error
    assignment: dict = field(default_factory=dict)
    objective_exact: Fraction | None = None
    wall_time: float = 0.0
    routes: dict[int, SpaceTimeRoute | None] | None = None
    nodes_explored: int = 0
    message: str = ""

    @property
    def objective(self) -> float:
        return float(self.objective_exact) if self.objective_exact is not None else math.nan


# ---------------------------------------------------------------------------
# Walk enumeration (shared shape; two independent implementations below)
# ---------------------------------------------------------------------------


class _Occupancy:
    """Entry/arrival counts per (link, t) and the claimed turn per (node, t)."""

    __slots__ = ("network", "entries", "arrivals", "turns")

    def __init__(self, network: Network):
        self.network = network
        self.entries: dict[tuple[int, int], int] = {}
        self.arrivals: dict[tuple[int, int], int] = {}
        self.turns: dict[tuple[int, int], tuple[tuple[int, int], int]] = {}

    def fits(self, cand: "_Candidate") -> bool:
        links = self.network.links
        for lid, t in cand.entry_events:
            if self.entries.get((lid, t), 0) >= links[lid].capacity:
                return False
        for lid, t in cand.arrival_events:
            if self.arrivals.get((lid, t), 0) >= links[lid].capacity:
                return False
        for node, t, turn in cand.turn_events:
            claimed = self.turns.get((node, t))
            if claimed is not None and claimed[0] != turn:
                return False
        return True

    def apply(self, cand: "_Candidate") -> None:
        for lid, t in cand.entry_events:
            self.entries[(lid, t)] = self.entries.get((lid, t), 0) + 1
        for lid, t in cand.arrival_events:
            self.arrivals[(lid, t)] = self.arrivals.get((lid, t), 0) + 1
        for node, t, turn in cand.turn_events:
            claimed = self.turns.get((node, t))
            self.turns[(node, t)] = (turn, 1 if claimed is None else claimed[1] + 1)

    def undo(self, cand: "_Candidate") -> None:
        for lid, t in cand.entry_events:
            left = self.entries[(lid, t)] - 1
            if left:
                self.entries[(lid, t)] = left
            else:
                del self.entries[(lid, t)]
        for lid, t in cand.arrival_events:
            left = self.arrivals[(lid, t)] - 1
            if left:
                self.arrivals[(lid, t)] = left
            else:
                del self.arrivals[(lid, t)]
        for node, t, turn in cand.turn_events:
            claimed = self.turns[(node, t)]
            if claimed[1] == 1:
                del self.turns[(node, t)]
            else:
                self.turns[(node, t)] = (turn, claimed[1] - 1)


@dataclass
class _Candidate:
    route: SpaceTimeRoute
    weight: int = 0
    entry_events: tuple[tuple[int, int], ...] = ()
    arrival_events: tuple[tuple[int, int], ...] = ()
    turn_events: tuple[tuple[int, int, tuple[int, int]], ...] = ()


def _candidate_from_route(network: Network, route: SpaceTimeRoute) -> _Candidate:
    entries = tuple((l, route.times[k]) for k, l in enumerate(route.links))
    arrivals = tuple((l, route.times[k + 1]) for k, l in enumerate(route.links))
    turns = tuple(route.turn_claims(network))
    return _Candidate(route=route, entry_events=entries, arrival_events=arrivals, turn_events=turns)


def _enumerate_walks(
    network: Network,
    request: Request,
    earliest: int,
    horizon: int,
    base: _Occupancy | None = None,
    generation_cap: int | None = None,
) -> tuple[list[SpaceTimeRoute], bool]:
    """All feasible walks ending at the first in-window destination arrival.

    Walks may revisit nodes and pass through the destination outside the
    window; expansion is pruned by the free-flow lower bound to the
    destination. Returns (walks, truncated).
    """
    dist = network.shortest_times()
    close = min(request.window_close, horizon)
    lb0 = dist[request.origin][request.destination]
    if lb0 == math.inf or earliest + lb0 > close:
        return [], False
    links = network.links
    out_links = network.out_links
    results: list[SpaceTimeRoute] = []
    steps_cap = None if generation_cap is None else max(10_000, 50 * generation_cap)
    steps = 0
    truncated = False

    def blocked(node: int, t: int, in_link: int | None, lid: int) -> bool:
        if base is None or in_link is None:
            return False
        claimed = base.turns.get((node, t))
        return claimed is not None and claimed[0] != (in_link, lid)

    def dfs(node: int, t: int, nodes: tuple, times: tuple, walk: tuple) -> bool:
        nonlocal steps, truncated
        if node == request.destination and request.window_open <= t <= close:
            results.append(SpaceTimeRoute(request.id, nodes, times, walk))
            if generation_cap is not None and len(results) >= generation_cap:
                truncated = True
                return False
            return True
        in_link = walk[-1] if walk else None
        for lid in out_links[node]:
            steps += 1
            if steps_cap is not None and steps > steps_cap:
                truncated = True
                return False
            link = links[lid]
            ta = t + link.travel_time
            if ta > close or ta + dist[link.head][request.destination] > close:
                continue
            if in_link is not None:
                prev = links[in_link]
                if not network.allow_uturns and prev.tail == link.head and prev.head == link.tail:
                    continue
            if blocked(node, t, in_link, lid):
                continue
            if base is not None:
                if base.entries.get((lid, t), 0) >= link.capacity:
                    continue
                if base.arrivals.get((lid, ta), 0) >= link.capacity:
                    continue
            if not dfs(link.head, ta, nodes + (link.head,), times + (ta,), walk + (lid,)):
                return False
        return True

    for t0 in range(earliest, int(close - lb0) + 1):
        if not dfs(request.origin, t0, (request.origin,), (t0,), ()):
            break
    return results, truncated


# ---------------------------------------------------------------------------
# Structured route-based branch-and-bound
# ---------------------------------------------------------------------------


def _integerize(fractions: list[Fraction]) -> int:
    scale = 1
    for f in fractions:
        scale = scale * f.denominator // math.gcd(scale, f.denominator)
    return scale


def _solve_structured(model: MilpModel, config: SolverConfig) -> SolveResult:
    start = time.perf_counter()
    if model.mode is None:
        raise SolverError("model has no objective; call set_objective first")
    net = model.network
    ctx = model.context
    occ = _Occupancy(net)
    for _req, route in ctx.active:
        occ.apply(_candidate_from_route(net, route))

    idle_ids = {r.id for r in ctx.idle}
    hints = dict(ctx.idle_hints)
    order = sorted(ctx.open_requests(), key=lambda r: (-r.profit, r.id))

    truncated_any = False
    decisions = []
    all_weights: list[Fraction] = []
    for r in order:
        walks, truncated = _enumerate_walks(
            net,
            r,
            model.effective_earliest(r),
            model.horizon,
            base=occ,
            generation_cap=config.generation_cap,
        )
        truncated_any = truncated_any or truncated
        hint = hints.get(r.id)
        if hint is not None and not any(
            w.nodes == hint.nodes and w.times == hint.times for w in walks
        ):
            walks.append(hint)
        cands = [_candidate_from_route(net, w) for w in walks]
        weights = [route_objective_weight(model, r, c.route) for c in cands]
        all_weights.extend(weights)
        all_weights.append(route_objective_weight(model, r, None) + profit_bound(model, r))
        decisions.append((r, cands, weights))

    scale = _integerize([w for w in all_weights if w.denominator != 1] or [Fraction(1)])
    hint_cands: list[_Candidate | None] = []
    for r, cands, weights in decisions:
        for cand, w in zip(cands, weights):
            cand.weight = int(w * scale)
        cands.sort(key=lambda c: (-c.weight, c.route.arrival, len(c.route.links), c.route.nodes))
        hint = hints.get(r.id)
        hint_cand = None
        if hint is not None:
            hint_cand = next(
                (c for c in cands if c.route.nodes == hint.nodes and c.route.times == hint.times),
                None,
            )
        if config.candidate_cap is not None and len(cands) > config.candidate_cap:
            kept = cands[: config.candidate_cap]
            if hint_cand is not None and hint_cand not in kept:
                kept.append(hint_cand)
            cands[:] = kept
            truncated_any = True
        hint_cands.append(hint_cand)

    pinned = [r.id in idle_ids for r, _, _ in decisions]
    ubs = []
    for k, (r, cands, _w) in enumerate(decisions):
        ub = int(profit_bound(model, r) * scale)
        ubs.append(ub if pinned[k] else max(0, ub))
    suffix = [0] * (len(decisions) + 1)
    for k in range(len(decisions) - 1, -1, -1):
        suffix[k] = suffix[k + 1] + ubs[k]

    best_value: int | None = None
    best_choice: list[_Candidate | None] = [None] * len(decisions)
    choice: list[_Candidate | None] = [None] * len(decisions)
    nodes = 0
    stopped = False
    node_limit = config.node_limit
    deadline = start + config.time_limit

    # Seed the incumbent: idles keep their carried routes (jointly feasible
    # with the departed set by construction), then currents pack greedily.
    # Without a seed the bound cannot prune and the dive can thrash on
    # pinned requests.
    seed_ok = all(hint_cands[k] is not None for k in range(len(decisions)) if pinned[k])
    if seed_ok:
        seed_choice: list[_Candidate | None] = [None] * len(decisions)
        seed_value = 0
        applied = []
        feasible = True
        for k in range(len(decisions)):
            if pinned[k]:
                cand = hint_cands[k]
                if not occ.fits(cand):
                    feasible = False
                    break
                occ.apply(cand)
                applied.append(cand)
                seed_choice[k] = cand
                seed_value += cand.weight
        if feasible:
            for k, (r, cands, _w) in enumerate(decisions):
                if pinned[k]:
                    continue
                for cand in cands:
                    if cand.weight <= 0:
                        break
                    if occ.fits(cand):
                        occ.apply(cand)
                        applied.append(cand)
                        seed_choice[k] = cand
                        seed_value += cand.weight
                        break
            best_value = seed_value
            best_choice = seed_choice
        for cand in reversed(applied):
            occ.undo(cand)

    def dfs(k: int, value: int) -> None:
        nonlocal nodes, best_value, stopped
        if stopped:
            return
        if k == len(decisions):
            if best_value is None or value > best_value:
                best_value = value
                best_choice[:] = choice
            return
        if best_value is not None and value + suffix[k] <= best_value:
            return
        r, cands, _w = decisions[k]
        reject_done = False
        for cand in cands:
            if not pinned[k] and not reject_done and cand.weight <= 0:
                reject_done = True
                choice[k] = None
                dfs(k + 1, value)
                if stopped:
                    return
            nodes += 1
            if node_limit is not None and nodes > node_limit:
                stopped = True
                return
            if nodes % 2048 == 0 and time.perf_counter() > deadline:
                stopped = True
                return
            if best_value is not None and value + cand.weight + suffix[k + 1] <= best_value:
                continue
            if occ.fits(cand):
                occ.apply(cand)
                choice[k] = cand
                dfs(k + 1, value + cand.weight)
                occ.undo(cand)
                choice[k] = None
                if stopped:
                    return
        if not pinned[k] and not reject_done:
            choice[k] = None
            dfs(k + 1, value)

    dfs(0, 0)

    if best_value is None:
        return SolveResult(
            status="error" if stopped else "infeasible",
            wall_time=time.perf_counter() - start,
            nodes_explored=nodes,
            message=(
                "budget exhausted before any feasible point"
                if stopped
                else "no assignment routes every pinned request"
            ),
        )

    routes: dict[int, SpaceTimeRoute | None] = {}
    for (r, _c, _w), cand in zip(decisions, best_choice):
        routes[r.id] = cand.route if cand is not None else None
    assignment = assignment_from_routes(model, routes)
    for req, route in ctx.active:
        routes[req.id] = route
    exact = Fraction(best_value, scale) + surrogate_constant(model)
    status = "optimal" if not (stopped or truncated_any) else "feasible_time_limit"
    return SolveResult(
        status=status,
        assignment=assignment,
        objective_exact=exact,
        wall_time=time.perf_counter() - start,
        routes=routes,
        nodes_explored=nodes,
    )


def profit_bound(model: MilpModel, request: Request) -> Fraction:
    """Upper bound on any route's objective contribution for this request."""
    bound = profit_coefficient(model, request)
    if model.mode == "surrogate" and model.params.alpha < 0:
        # Entries carry positive weight; at most one per slack step.
        best = max(
            (slack_entry_coefficient(model, l.id) for l in model.network.links),
            default=Fraction(0),
        )
        if best > 0:
            bound += best * len(model.context.slack_steps)
    return bound


# ---------------------------------------------------------------------------
# Explicit-model solver (small models)
# ---------------------------------------------------------------------------


def _solve_explicit(exp: ExplicitModel, config: SolverConfig) -> SolveResult:
    start = time.perf_counter()
    n = exp.num_columns
    values: list[int | None] = [None] * n
    cons = exp.constraints
    best_value: Fraction | None = None
    best_assign: list[int] | None = None
    nodes = 0
    stopped = False
    deadline = start + config.time_limit

    obj = [exp.objective.get(i, Fraction(0)) for i in range(n)]

    def propagate() -> bool:
        """Force implied values to fixpoint; False on contradiction."""
        changed = True
        while changed:
            changed = False
            for c in cons:
                cur = lo_extra = hi_extra = 0
                unassigned = []
                for col, coef in c.terms:
                    v = values[col]
                    if v is None:
                        unassigned.append((col, coef))
                        if coef > 0:
                            hi_extra += coef
                        else:
                            lo_extra += coef
                    elif v:
                        cur += coef
                lo, hi = cur + lo_extra, cur + hi_extra
                if c.sense == "<=" and lo > c.rhs:
                    return False
                if c.sense == ">=" and hi < c.rhs:
                    return False
                if c.sense == "=" and (lo > c.rhs or hi < c.rhs):
                    return False
                for col, coef in unassigned:
                    lo_other = lo - (coef if coef < 0 else 0)
                    hi_other = hi - (coef if coef > 0 else 0)
                    ok = []
                    for v in (0, 1):
                        add = coef * v
                        if c.sense == "<=":
                            good = lo_other + add <= c.rhs
                        elif c.sense == ">=":
                            good = hi_other + add >= c.rhs
                        else:
                            good = lo_other + add <= c.rhs and hi_other + add >= c.rhs
                        ok.append(good)
                    if not ok[0] and not ok[1]:
                        return False
                    if ok[0] != ok[1]:
                        values[col] = 0 if ok[0] else 1
                        changed = True
                        break
                if changed:
                    break
        return True

    def feasible_complete() -> bool:
        for c in cons:
            total = sum(coef for col, coef in c.terms if values[col])
            if c.sense == "<=" and total > c.rhs:
                return False
            if c.sense == ">=" and total < c.rhs:
                return False
            if c.sense == "=" and total != c.rhs:
                return False
        return True

    def current_value() -> Fraction:
        return sum((obj[i] for i in range(n) if values[i]), Fraction(0))

    def dfs() -> None:
        nonlocal nodes, best_value, best_assign, stopped
        if stopped:
            return
        nodes += 1
        if nodes % 256 == 0 and time.perf_counter() > deadline:
            stopped = True
            return
        if config.node_limit is not None and nodes > config.node_limit:
            stopped = True
            return
        saved = values.copy()
        try:
            if not propagate():
                return
            free = [i for i in range(n) if values[i] is None]
            if not free:
                if feasible_complete():
                    val = current_value()
                    if best_value is None or val > best_value:
                        best_value = val
                        best_assign = [v or 0 for v in values]
                return
            ub = current_value() + sum((obj[i] for i in free if obj[i] > 0), Fraction(0))
            if best_value is not None and ub <= best_value:
                return
            col = free[0]
            for v in ((1, 0) if obj[col] > 0 else (0, 1)):
                values[col] = v
                dfs()
                values[col] = None
                if stopped:
                    return
        finally:
            values[:] = saved

    dfs()
    wall = time.perf_counter() - start
    if best_assign is None:
        return SolveResult(
            status="error" if stopped else "infeasible",
            wall_time=wall,
            nodes_explored=nodes,
            message="budget exhausted before any feasible point" if stopped else "",
        )
    assignment = {exp.columns[i]: best_assign[i] for i in range(n)}
    return SolveResult(
        status="feasible_time_limit" if stopped else "optimal",
        assignment=assignment,
        objective_exact=best_value + exp.objective_constant,
        wall_time=wall,
        nodes_explored=nodes,
    )


# ---------------------------------------------------------------------------
# Exhaustive oracle
# ---------------------------------------------------------------------------


def brute_force_oracle(
    network: Network,
    requests: list[Request],
    horizon: int,
    product_cap: int = 10**6,
) -> tuple[int, dict[int, SpaceTimeRoute | None]]:
    """Optimal total profit by exhaustive enumeration of route combinations.

    Enumerates every request's feasible walks independently, then searches
    all accept/reject/route combinations with direct occupancy checks. The
    product of per-request option counts is capped to keep this honest about
    its own limits.
    """
    ordered = sorted(requests, key=lambda r: r.id)
    option_sets: list[list[_Candidate]] = []
    product = 1
    for r in ordered:
        walks, truncated = _enumerate_walks(network, r, r.earliest_departure, horizon)
        if truncated:
            raise SolverError("walk enumeration truncated; search space too large")
        product *= len(walks) + 1
        if product > product_cap:
            raise SolverError(f"route-combination space exceeds {product_cap}")
        option_sets.append([_candidate_from_route(network, w) for w in walks])

    occ = _Occupancy(network)
    best = {"value": 0, "choice": [None] * len(ordered)}
    choice: list[_Candidate | None] = [None] * len(ordered)
    remaining = [0] * (len(ordered) + 1)
    for k in range(len(ordered) - 1, -1, -1):
        remaining[k] = remaining[k + 1] + ordered[k].profit

    def dfs(k: int, value: int) -> None:
        if k == len(ordered):
            if value > best["value"]:
                best["value"] = value
                best["choice"] = choice.copy()
            return
        if value + remaining[k] <= best["value"]:
            return
        for cand in option_sets[k]:
            if occ.fits(cand):
                occ.apply(cand)
                choice[k] = cand
                dfs(k + 1, value + ordered[k].profit)
                occ.undo(cand)
                choice[k] = None
        dfs(k + 1, value)

    dfs(0, 0)
    routes = {
        r.id: (cand.route if cand is not None else None)
        for r, cand in zip(ordered, best["choice"])
    }
    return best["value"], routes


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def solve(model, config: SolverConfig | None = None) -> SolveResult:
    """Solve a structured :class:`MilpModel` or an :class:`ExplicitModel`."""
    config = config or SolverConfig()
    if config.backend == "external":
        from .lp_text import solve_external

        return solve_external(model, config)
    if config.backend != "builtin":
        raise SolverError(f"unknown backend {config.backend!r}")
    if isinstance(model, MilpModel):
        return _solve_structured(model, config)
    if isinstance(model, ExplicitModel):
        return _solve_explicit(model, config)
    raise SolverError(f"cannot solve object of type {type(model).__name__}")
