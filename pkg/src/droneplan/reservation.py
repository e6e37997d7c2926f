"""Space-time routes and capacity reservations on the time expansion.

The ledger tracks per-(link, time) occupancy of the upstream and downstream
halves of every link plus the active turn at every (node, time). A drone
entering link l at time t holds the upstream half for [t, t + ceil(d/2)) and
the downstream half for [t + ceil(d/2), t + d); the turn through an
intermediate node is claimed at the single arrival time step there.

``new_reservation`` routes a request on the time expansion by label-setting
in time order: earliest arrival wins, ties broken by fewer links then the
lexicographically smallest node sequence.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .demand import Request
from .network import Network, TimeExpandedGraph


class LedgerError(RuntimeError):
    """Reservation bookkeeping violated (capacity, junction, or pairing)."""


@dataclass(frozen=True)
class SpaceTimeRoute:
    """An assigned drone trajectory: node sequence with per-node times.

    ``times[k]`` is the arrival time at ``nodes[k]`` (departure time for the
    origin); ``links[k]`` connects ``nodes[k]`` to ``nodes[k+1]``.
    """

    request_id: int
    nodes: tuple[int, ...]
    times: tuple[int, ...]
    links: tuple[int, ...]

    @property
    def departure(self) -> int:
        return self.times[0]

    @property
    def arrival(self) -> int:
        return self.times[-1]

    def entries(self) -> list[tuple[int, int]]:
        """(link, entry time) pairs along the route."""
        return [(l, self.times[k]) for k, l in enumerate(self.links)]

    def turn_claims(self, network: Network) -> list[tuple[int, int, tuple[int, int]]]:
        """(node, time, (in_link, out_link)) at every intermediate node."""
        claims = []
        for k in range(1, len(self.nodes) - 1):
            claims.append(
                (self.nodes[k], self.times[k], (self.links[k - 1], self.links[k]))
            )
        return claims

    def validate(self, network: Network) -> None:
        if len(self.nodes) < 2 or len(self.times) != len(self.nodes):
            raise LedgerError(f"route {self.request_id}: malformed node/time sequence")
        if len(self.links) != len(self.nodes) - 1:
            raise LedgerError(f"route {self.request_id}: link count mismatch")
        for k, lid in enumerate(self.links):
            link = network.links[lid]
            if link.tail != self.nodes[k] or link.head != self.nodes[k + 1]:
                raise LedgerError(f"route {self.request_id}: link {lid} does not connect step {k}")
            if self.times[k + 1] != self.times[k] + link.travel_time:
                raise LedgerError(f"route {self.request_id}: travel time broken at step {k}")


def _segment_slots(link, entry: int) -> tuple[range, range]:
    half = (link.travel_time + 1) // 2
    return range(entry, entry + half), range(entry + half, entry + link.travel_time)


@dataclass
class ReservationLedger:
    """Mutable space-time occupancy owned by one simulation run."""

    network: Network
    upstream: dict[tuple[int, int], int] = field(default_factory=dict)
    downstream: dict[tuple[int, int], int] = field(default_factory=dict)
    junction: dict[tuple[int, int], tuple[tuple[int, int], int]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.upstream or self.downstream or self.junction)

    def _segment_free(self, link, entry: int, own_up, own_down) -> bool:
        up, down = _segment_slots(link, entry)
        cap = link.capacity
        for t in up:
            if self.upstream.get((link.id, t), 0) + own_up.get((link.id, t), 0) >= cap:
                return False
        for t in down:
            if self.downstream.get((link.id, t), 0) + own_down.get((link.id, t), 0) >= cap:
                return False
        return True

    def _junction_free(self, node: int, t: int, turn: tuple[int, int]) -> bool:
        claimed = self.junction.get((node, t))
        return claimed is None or claimed[0] == turn

    def can_insert(self, route: SpaceTimeRoute) -> bool:
        """True when reserving the route violates no ledger invariant."""
        own_up: dict[tuple[int, int], int] = {}
        own_down: dict[tuple[int, int], int] = {}
        for lid, entry in route.entries():
            link = self.network.links[lid]
            if not self._segment_free(link, entry, own_up, own_down):
                return False
            up, down = _segment_slots(link, entry)
            for t in up:
                own_up[(lid, t)] = own_up.get((lid, t), 0) + 1
            for t in down:
                own_down[(lid, t)] = own_down.get((lid, t), 0) + 1
        for node, t, turn in route.turn_claims(self.network):
            if not self._junction_free(node, t, turn):
                return False
        return True

    def check_invariants(self) -> None:
        for (lid, _t), count in list(self.upstream.items()) + list(self.downstream.items()):
            cap = self.network.links[lid].capacity
            if not 0 < count <= cap:
                raise LedgerError(f"occupancy {count} outside (0, {cap}] on link {lid}")
        for (_node, _t), (_turn, count) in self.junction.items():
            if count < 1:
                raise LedgerError("junction entry with non-positive count")


def reserve(route: SpaceTimeRoute, ledger: ReservationLedger) -> None:
    """Apply the route's occupancy to the ledger. Precondition: it fits."""
    if not ledger.can_insert(route):
        raise LedgerError(f"route {route.request_id} does not fit the ledger")
    for lid, entry in route.entries():
        link = ledger.network.links[lid]
        up, down = _segment_slots(link, entry)
        for t in up:
            ledger.upstream[(lid, t)] = ledger.upstream.get((lid, t), 0) + 1
        for t in down:
            ledger.downstream[(lid, t)] = ledger.downstream.get((lid, t), 0) + 1
    for node, t, turn in route.turn_claims(ledger.network):
        claimed = ledger.junction.get((node, t))
        if claimed is None:
            ledger.junction[(node, t)] = (turn, 1)
        else:
            ledger.junction[(node, t)] = (turn, claimed[1] + 1)


def empty_reservation(route: SpaceTimeRoute, ledger: ReservationLedger) -> None:
    """Exact inverse of :func:`reserve`. Errors if the route is not present."""

    def _release(store: dict, key: tuple[int, int], what: str) -> None:
        count = store.get(key)
        if not count:
            raise LedgerError(f"route {route.request_id}: {what} slot {key} not reserved")
        if count == 1:
            del store[key]
        else:
            store[key] = count - 1

    for lid, entry in route.entries():
        link = ledger.network.links[lid]
        up, down = _segment_slots(link, entry)
        for t in up:
            _release(ledger.upstream, (lid, t), "upstream")
        for t in down:
            _release(ledger.downstream, (lid, t), "downstream")
    for node, t, turn in route.turn_claims(ledger.network):
        claimed = ledger.junction.get((node, t))
        if claimed is None or claimed[0] != turn:
            raise LedgerError(f"route {route.request_id}: junction ({node},{t}) not held")
        if claimed[1] == 1:
            del ledger.junction[(node, t)]
        else:
            ledger.junction[(node, t)] = (turn, claimed[1] - 1)


def new_reservation(
    request: Request,
    ledger: ReservationLedger,
    tex_graph: TimeExpandedGraph,
    earliest: int | None = None,
) -> SpaceTimeRoute | None:
    """Route the request earliest-arrival-first and reserve it.

    Returns the reserved route, or None when no feasible space-time path
    exists (a rejection signal, not an error). ``earliest`` overrides the
    request's earliest departure (used when it was clamped upstream).
    """
    network = ledger.network
    e_r = request.earliest_departure if earliest is None else max(request.earliest_departure, earliest)
    dist = network.shortest_times()
    lb = dist[request.origin][request.destination]
    horizon = tex_graph.horizon
    last_depart = min(request.window_close - lb, horizon)
    if lb == float("inf") or last_depart < e_r:
        return None

    # Heap entries: (time, hops, path nodes, path times, path links, in_link).
    heap: list[tuple] = []
    for t0 in range(e_r, int(last_depart) + 1):
        heapq.heappush(heap, (t0, 0, (request.origin,), (t0,), (), None))
    seen: set[tuple[int, int, int | None]] = set()

    while heap:
        t, hops, nodes, times, links, in_link = heapq.heappop(heap)
        node = nodes[-1]
        key = (node, t, in_link)
        if key in seen:
            continue
        seen.add(key)
        if node == request.destination and request.window_open <= t <= request.window_close:
            route = SpaceTimeRoute(request.id, nodes, times, links)
            reserve(route, ledger)
            return route

        own_up: dict[tuple[int, int], int] = {}
        own_down: dict[tuple[int, int], int] = {}
        for k, lid in enumerate(links):
            link = network.links[lid]
            up, down = _segment_slots(link, times[k])
            for tt in up:
                own_up[(lid, tt)] = own_up.get((lid, tt), 0) + 1
            for tt in down:
                own_down[(lid, tt)] = own_down.get((lid, tt), 0) + 1

        for lid in network.out_links[node]:
            link = network.links[lid]
            arrive = t + link.travel_time
            if arrive > horizon or arrive + dist[link.head][request.destination] > request.window_close:
                continue
            if in_link is not None:
                prev = network.links[in_link]
                if not network.allow_uturns and prev.tail == link.head and prev.head == link.tail:
                    continue
                if not ledger._junction_free(node, t, (in_link, lid)):
                    continue
            if not ledger._segment_free(link, t, own_up, own_down):
                continue
            heapq.heappush(
                heap,
                (arrive, hops + 1, nodes + (link.head,), times + (arrive,), links + (lid,), lid),
            )
    return None
