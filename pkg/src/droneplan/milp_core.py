"""Per-interval integer program for request acceptance and routing.

Builds the binary program over a rolling time window: request acceptance is
coupled to space-time routing variables for the upstream/downstream halves of
every link, turn variables link consecutive movements, and junction variables
enforce one distinct turn per node per time step. Rolling modifications pin
accepted requests and the unfinished portions of departed routes. The
objective is either plain profit or profit plus a balance-weighted,
priority-proportional reserve-capacity term.

Models carry a compact structural description used by the route-based
solver; the explicit column/constraint form is materialized on demand (it is
only tractable for small models).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple

from .demand import Request
from .network import Network
from .reservation import SpaceTimeRoute


class ModelError(ValueError):
    """Inconsistent interval context or model misuse."""


class VariableRef(NamedTuple):
    """One binary column. ``kind`` is one of up/down/turn/junction/accept."""

    kind: str
    req: int | None
    link: int | None
    turn: tuple[int, int] | None
    time: int | None

    def name(self) -> str:
        parts = {
            "accept": lambda: f"z_r{self.req}",
            "up": lambda: f"xu_r{self.req}_l{self.link}_t{self.time}",
            "down": lambda: f"xd_r{self.req}_l{self.link}_t{self.time}",
            "turn": lambda: f"g_r{self.req}_i{self.turn[0]}_j{self.turn[1]}_t{self.time}",
            "junction": lambda: f"phi_i{self.turn[0]}_j{self.turn[1]}_t{self.time}",
        }
        return parts[self.kind]()

    def sort_key(self) -> tuple:
        kinds = {"accept": 0, "up": 1, "down": 2, "turn": 3, "junction": 4}
        return (
            kinds[self.kind],
            -1 if self.req is None else self.req,
            -1 if self.link is None else self.link,
            (-1, -1) if self.turn is None else self.turn,
            -1 if self.time is None else self.time,
        )


def up_ref(req: int, link: int, t: int) -> VariableRef:
    return VariableRef("up", req, link, None, t)


def down_ref(req: int, link: int, t: int) -> VariableRef:
    return VariableRef("down", req, link, None, t)


def turn_ref(req: int, turn: tuple[int, int], t: int) -> VariableRef:
    return VariableRef("turn", req, None, turn, t)


def junction_ref(turn: tuple[int, int], t: int) -> VariableRef:
    return VariableRef("junction", None, None, turn, t)


def accept_ref(req: int) -> VariableRef:
    return VariableRef("accept", req, None, None, None)


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[int, int], ...]  # (column index, integer coefficient)
    sense: str  # "<=", "=", ">="
    rhs: int


@dataclass
class ExplicitModel:
    """Materialized column/constraint form of a model."""

    columns: list[VariableRef]
    col_index: dict[VariableRef, int]
    constraints: list[Constraint]
    objective: dict[int, Fraction]
    objective_constant: Fraction

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def objective_value(self, assignment: dict) -> Fraction:
        total = self.objective_constant
        for col, coef in self.objective.items():
            if assignment.get(self.columns[col], 0):
                total += coef
        return total


@dataclass
class IntervalContext:
    """Request sets and time range for one interval's program.

    ``current`` holds this interval's arrivals, ``idle`` accepted requests
    that have not departed (earliest departures already clamped to the window
    start), and ``active`` departed requests with their frozen routes.
    """

    index: int
    window_start: int
    interval_end: int
    current: tuple[Request, ...]
    idle: tuple[Request, ...]
    active: tuple[tuple[Request, SpaceTimeRoute], ...] = ()
    # Last known routes of idle requests; seeds the solver's search so a
    # re-route is never forced to rediscover the carried-over solution.
    idle_hints: tuple[tuple[int, SpaceTimeRoute], ...] = ()

    def __post_init__(self) -> None:
        ids = [r.id for r in self.current] + [r.id for r in self.idle] + [
            r.id for r, _ in self.active
        ]
        if len(ids) != len(set(ids)):
            raise ModelError("current/idle/active request sets overlap")
        if self.interval_end < self.window_start:
            raise ModelError("interval end precedes window start")
        for r in self.open_requests():
            if r.origin == r.destination:
                raise ModelError(f"request {r.id} has origin == destination")

    @classmethod
    def static(cls, requests, horizon: int, interval_end: int | None = None) -> "IntervalContext":
        """Whole-horizon context: one window covering everything."""
        return cls(
            index=1,
            window_start=0,
            interval_end=horizon if interval_end is None else interval_end,
            current=tuple(requests),
            idle=(),
            active=(),
        )

    def open_requests(self) -> tuple[Request, ...]:
        return self.current + self.idle

    def model_requests(self) -> tuple[Request, ...]:
        return self.open_requests() + tuple(r for r, _ in self.active)

    @property
    def horizon(self) -> int:
        h = self.interval_end
        for r in self.model_requests():
            h = max(h, r.window_close)
        return h

    @property
    def slack_steps(self) -> range:
        # The reserve-capacity term spans the whole model window. Routes are
        # representable up to the horizon, so slack restricted to the current
        # interval would let the optimizer dodge the penalty by delaying or
        # detouring usage past the interval end, manufacturing future
        # congestion instead of reserves.
        return range(self.window_start, self.horizon)


@dataclass
class SurrogateParams:
    """Standardization constants and weights for the reserve-capacity objective."""

    alpha: float
    beta: tuple[float, ...]
    profit_normalizer: float
    capacity_normalizer: float

    def __post_init__(self) -> None:
        if self.profit_normalizer <= 0 or self.capacity_normalizer <= 0:
            raise ModelError("normalizers must be positive")
        for b in self.beta:
            if not 0.0 <= b <= 1.0:
                raise ModelError(f"standardized priority {b} outside [0, 1]")


@dataclass
class MilpModel:
    """An interval program; explicit form built lazily via :meth:`explicit`."""

    network: Network
    context: IntervalContext
    pins_applied: bool = False
    mode: str | None = None
    params: SurrogateParams | None = None
    _explicit: ExplicitModel | None = field(default=None, repr=False)

    def invalidate(self) -> None:
        self._explicit = None

    @property
    def horizon(self) -> int:
        return self.context.horizon

    def effective_earliest(self, request: Request) -> int:
        return max(request.earliest_departure, self.context.window_start)

    def explicit(self) -> ExplicitModel:
        if self._explicit is None:
            self._explicit = _materialize(self)
        return self._explicit


def build_interval_model(network: Network, context: IntervalContext) -> MilpModel:
    """Base program over the context's window; no pins, no objective yet."""
    if network.num_links == 0:
        raise ModelError("empty network")
    return MilpModel(network=network, context=context)


def apply_rolling_modifications(model: MilpModel, context: IntervalContext) -> MilpModel:
    """Pin accepted requests and the in-window portion of departed routes.

    Idle earliest departures are clamped to the window start; acceptance
    variables of idle and active requests are fixed to 1; every route event
    of an active request at t >= window start is fixed to 1.
    """
    ws = context.window_start
    clamped = tuple(r.clamp_earliest(ws) for r in context.idle)
    for req, route in context.active:
        if route.departure > ws:
            raise ModelError(f"request {req.id} pinned as active but departs after window start")
        if route.arrival < ws:
            raise ModelError(f"request {req.id} route ends before the model window")
    model.context = replace(context, idle=clamped)
    model.pins_applied = True
    model.invalidate()
    return model


def set_objective(model: MilpModel, mode: str, params: SurrogateParams | None = None) -> MilpModel:
    if mode not in ("myopic", "surrogate"):
        raise ModelError(f"unknown objective mode {mode!r}")
    if mode == "surrogate":
        if params is None:
            raise ModelError("surrogate objective requires SurrogateParams")
        if len(params.beta) != model.network.num_links:
            raise ModelError("priority vector length does not match link count")
    model.mode = mode
    model.params = params
    model.invalidate()
    return model


def profit_coefficient(model: MilpModel, request: Request) -> Fraction:
    if model.mode == "surrogate":
        return Fraction(request.profit) / Fraction(model.params.profit_normalizer)
    return Fraction(request.profit)


def slack_entry_coefficient(model: MilpModel, link: int) -> Fraction:
    """Objective change caused by one in-window entry on ``link`` (<= 0 for alpha >= 0)."""
    if model.mode != "surrogate":
        return Fraction(0)
    p = model.params
    return -Fraction(p.alpha) * Fraction(p.beta[link]) / Fraction(p.capacity_normalizer)


def surrogate_constant(model: MilpModel) -> Fraction:
    if model.mode != "surrogate":
        return Fraction(0)
    p = model.params
    steps = len(model.context.slack_steps)
    total = Fraction(0)
    for link in model.network.links:
        total += Fraction(p.beta[link.id]) * link.capacity * steps
    return Fraction(p.alpha) * total / Fraction(p.capacity_normalizer)


def route_objective_weight(model: MilpModel, request: Request, route: SpaceTimeRoute | None) -> Fraction:
    """Exact objective contribution of accepting ``request`` on ``route``."""
    if route is None:
        return Fraction(0)
    value = profit_coefficient(model, request)
    if model.mode == "surrogate":
        slack = model.context.slack_steps
        for lid, t in route.entries():
            if slack.start <= t < slack.stop:
                value += slack_entry_coefficient(model, lid)
    return value


# ---------------------------------------------------------------------------
# Materialization
# ---------------------------------------------------------------------------


def _materialize(model: MilpModel) -> ExplicitModel:
    net = model.network
    ctx = model.context
    ws, H = ctx.window_start, ctx.horizon
    open_reqs = ctx.open_requests()
    active = ctx.active if model.pins_applied else ()
    # Without pins, treat departed requests like open ones (static base form).
    base_open = open_reqs if model.pins_applied else ctx.model_requests()

    columns: list[VariableRef] = []
    col_index: dict[VariableRef, int] = {}

    def add_col(ref: VariableRef) -> int:
        idx = col_index.get(ref)
        if idx is None:
            idx = len(columns)
            col_index[ref] = idx
            columns.append(ref)
        return idx

    def up_range(link) -> range:
        return range(ws, H - link.travel_time + 1)

    def down_range(link) -> range:
        return range(ws + link.travel_time, H + 1)

    for r in base_open:
        add_col(accept_ref(r.id))
        for link in net.links:
            for t in up_range(link):
                add_col(up_ref(r.id, link.id, t))
            for t in down_range(link):
                add_col(down_ref(r.id, link.id, t))
        for turn in net.turns:
            li, lj = net.links[turn.in_link], net.links[turn.out_link]
            lo = max(ws + li.travel_time, ws)
            hi = H - lj.travel_time
            for t in range(lo, hi + 1):
                add_col(turn_ref(r.id, (turn.in_link, turn.out_link), t))

    pinned: dict[VariableRef, int] = {}
    for req, route in active:
        add_col(accept_ref(req.id))
        pinned[accept_ref(req.id)] = 1
        for k, lid in enumerate(route.links):
            dep, arr = route.times[k], route.times[k + 1]
            if dep >= ws:
                add_col(up_ref(req.id, lid, dep))
                pinned[up_ref(req.id, lid, dep)] = 1
            if arr >= ws:
                add_col(down_ref(req.id, lid, arr))
                pinned[down_ref(req.id, lid, arr)] = 1
        for node, t, turn in route.turn_claims(net):
            if t >= ws:
                add_col(turn_ref(req.id, turn, t))
                pinned[turn_ref(req.id, turn, t)] = 1

    if model.pins_applied:
        for r in ctx.idle:
            pinned[accept_ref(r.id)] = 1

    constraints: list[Constraint] = []

    def add(name: str, terms: list[tuple[int, int]], sense: str, rhs: int) -> None:
        constraints.append(Constraint(name, tuple(terms), sense, rhs))

    # Departure and window-arrival coupling for open requests.
    for r in base_open:
        zi = col_index[accept_ref(r.id)]
        e_eff = max(r.earliest_departure, ws)
        terms = []
        for lid in net.out_links[r.origin]:
            link = net.links[lid]
            for t in range(max(e_eff, ws), H - link.travel_time + 1):
                terms.append((col_index[up_ref(r.id, lid, t)], 1))
        add(f"depart_r{r.id}", terms + [(zi, -1)], "=", 0)
        terms = []
        for lid in net.in_links[r.destination]:
            link = net.links[lid]
            for t in range(max(r.window_open, ws + link.travel_time), min(r.window_close, H) + 1):
                terms.append((col_index[down_ref(r.id, lid, t)], 1))
        add(f"window_r{r.id}", terms + [(zi, -1)], "=", 0)

    # Travel-time coupling: the downstream event mirrors the upstream entry.
    for r in base_open:
        for link in net.links:
            for t in down_range(link):
                d = col_index[down_ref(r.id, link.id, t)]
                u = col_index[up_ref(r.id, link.id, t - link.travel_time)]
                add(f"travel_r{r.id}_l{link.id}_t{t}", [(d, 1), (u, -1)], "=", 0)

    # Flow conservation at every node except the request's own endpoints.
    for r in base_open:
        for node in net.nodes:
            if node.id in (r.origin, r.destination):
                continue
            for t in range(ws, H + 1):
                terms = []
                for lid in net.in_links[node.id]:
                    ref = down_ref(r.id, lid, t)
                    if ref in col_index:
                        terms.append((col_index[ref], 1))
                for lid in net.out_links[node.id]:
                    ref = up_ref(r.id, lid, t)
                    if ref in col_index:
                        terms.append((col_index[ref], -1))
                if terms:
                    add(f"flow_r{r.id}_n{node.id}_t{t}", terms, "=", 0)

    # Capacity on upstream entries and downstream arrivals.
    all_req_ids = [r.id for r in base_open] + [req.id for req, _ in active]
    for link in net.links:
        for t in up_range(link):
            terms = [
                (col_index[ref], 1)
                for rid in all_req_ids
                if (ref := up_ref(rid, link.id, t)) in col_index
            ]
            if terms:
                add(f"cap_up_l{link.id}_t{t}", terms, "<=", link.capacity)
        for t in range(ws, H + 1):
            terms = [
                (col_index[ref], 1)
                for rid in all_req_ids
                if (ref := down_ref(rid, link.id, t)) in col_index
            ]
            if terms:
                add(f"cap_down_l{link.id}_t{t}", terms, "<=", link.capacity)

    # Turn linearization: the turn fires exactly when arrival meets departure.
    for r in base_open:
        for turn in net.turns:
            key = (turn.in_link, turn.out_link)
            for t in range(ws, H + 1):
                ref = turn_ref(r.id, key, t)
                if ref not in col_index:
                    continue
                g = col_index[ref]
                d = col_index[down_ref(r.id, turn.in_link, t)]
                u = col_index[up_ref(r.id, turn.out_link, t)]
                add(f"turn_a_r{r.id}_{key}_t{t}", [(g, 1), (d, -1)], "<=", 0)
                add(f"turn_b_r{r.id}_{key}_t{t}", [(g, 1), (u, -1)], "<=", 0)
                add(f"turn_c_r{r.id}_{key}_t{t}", [(g, 1), (d, -1), (u, -1)], ">=", -1)

    # Junction activation and exclusivity.
    n_model = max(1, len(all_req_ids))
    junction_turns: dict[tuple[int, int], list[int]] = {}
    for turn in net.turns:
        key = (turn.in_link, turn.out_link)
        for t in range(ws, H + 1):
            gamma_cols = [
                col_index[ref]
                for rid in all_req_ids
                if (ref := turn_ref(rid, key, t)) in col_index
            ]
            if not gamma_cols:
                continue
            phi = add_col(junction_ref(key, t))
            add(
                f"activate_{key}_t{t}",
                [(phi, n_model)] + [(g, -1) for g in gamma_cols],
                ">=",
                0,
            )
            junction_turns.setdefault((turn.junction, t), []).append(phi)
    for (node, t), phis in sorted(junction_turns.items()):
        add(f"junction_n{node}_t{t}", [(p, 1) for p in sorted(set(phis))], "<=", 1)

    for ref, value in pinned.items():
        add(f"pin_{ref.name()}", [(col_index[ref], 1)], "=", value)

    objective: dict[int, Fraction] = {}
    constant = Fraction(0)
    if model.mode is not None:
        for r in open_reqs if model.pins_applied else base_open:
            objective[col_index[accept_ref(r.id)]] = profit_coefficient(model, r)
        if model.mode == "surrogate":
            constant = surrogate_constant(model)
            for r in open_reqs if model.pins_applied else base_open:
                for link in net.links:
                    for t in model.context.slack_steps:
                        ref = up_ref(r.id, link.id, t)
                        if ref in col_index:
                            coef = slack_entry_coefficient(model, link.id)
                            if coef:
                                objective[col_index[ref]] = (
                                    objective.get(col_index[ref], Fraction(0)) + coef
                                )

    return ExplicitModel(
        columns=columns,
        col_index=col_index,
        constraints=constraints,
        objective=objective,
        objective_constant=constant,
    )


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def decode_routes(model: MilpModel, assignment: dict) -> dict[int, SpaceTimeRoute | None]:
    """Recover one route per accepted request from a column assignment.

    The walk is followed from the origin's single departure event to the
    first in-window arrival at the destination; any capacity-wasting events
    past that point are ignored.
    """
    net = model.network
    ctx = model.context
    ws, H = ctx.window_start, ctx.horizon
    routes: dict[int, SpaceTimeRoute | None] = {}

    def value(ref: VariableRef) -> int:
        return 1 if assignment.get(ref, 0) else 0

    for r in ctx.open_requests() if model.pins_applied else ctx.model_requests():
        if not value(accept_ref(r.id)):
            routes[r.id] = None
            continue
        start = None
        for lid in net.out_links[r.origin]:
            link = net.links[lid]
            for t in range(max(r.earliest_departure, ws), H - link.travel_time + 1):
                if value(up_ref(r.id, lid, t)):
                    if start is not None:
                        raise ModelError(f"request {r.id}: multiple departures set")
                    start = (lid, t)
        if start is None:
            raise ModelError(f"request {r.id}: accepted but no departure set")
        lid, t = start
        nodes = [r.origin]
        times = [t]
        links: list[int] = []
        for _ in range(4 * (H + 1)):
            link = net.links[lid]
            t = t + link.travel_time
            nodes.append(link.head)
            times.append(t)
            links.append(lid)
            at = link.head
            if at == r.destination and r.window_open <= t <= r.window_close:
                break
            nxt = [j for j in net.out_links[at] if value(up_ref(r.id, j, t))]
            if not nxt:
                raise ModelError(f"request {r.id}: walk stops at node {at}, t={t}")
            if len(nxt) > 1:
                raise ModelError(f"request {r.id}: walk branches at node {at}, t={t}")
            lid = nxt[0]
        else:
            raise ModelError(f"request {r.id}: walk never reaches its window")
        routes[r.id] = SpaceTimeRoute(r.id, tuple(nodes), tuple(times), tuple(links))

    if model.pins_applied:
        for req, route in ctx.active:
            routes[req.id] = route
    return routes


def assignment_from_routes(
    model: MilpModel, routes: dict[int, SpaceTimeRoute | None]
) -> dict[VariableRef, int]:
    """Sparse 1-columns implied by a set of routes (pinned actives included)."""
    assignment: dict[VariableRef, int] = {}
    ctx = model.context
    pairs: list[tuple[int, SpaceTimeRoute]] = [
        (rid, route) for rid, route in routes.items() if route is not None
    ]
    if model.pins_applied:
        pairs += [(req.id, route) for req, route in ctx.active]
        for r in ctx.idle:
            assignment[accept_ref(r.id)] = 1
    ws = ctx.window_start
    for rid, route in pairs:
        assignment[accept_ref(rid)] = 1
        for k, lid in enumerate(route.links):
            dep, arr = route.times[k], route.times[k + 1]
            if dep >= ws:
                assignment[up_ref(rid, lid, dep)] = 1
            if arr >= ws:
                assignment[down_ref(rid, lid, arr)] = 1
        for node, t, turn in route.turn_claims(model.network):
            if t >= ws:
                assignment[turn_ref(rid, turn, t)] = 1
                assignment[junction_ref(turn, t)] = 1
    return assignment
