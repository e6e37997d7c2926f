"""Standalone feasibility checker for sets of space-time routes.

Checks route sets directly against the interval program's semantics, with no
model or solver machinery involved: per-route travel-time consistency and
window membership, per-(link, time) entry and arrival capacities, and the
one-distinct-turn-per-(node, time) junction rule. Used as the independent
referee for every solver, heuristic, and policy output.
"""

from __future__ import annotations

from .demand import Request
from .network import Network
from .reservation import SpaceTimeRoute


def check_routes(
    network: Network,
    assignments: list[tuple[Request, SpaceTimeRoute]],
) -> list[str]:
    """Return a list of violation messages (empty means feasible)."""
    violations: list[str] = []
    entries: dict[tuple[int, int], int] = {}
    arrivals: dict[tuple[int, int], int] = {}
    turns: dict[tuple[int, int], set[tuple[int, int]]] = {}

    for request, route in assignments:
        rid = request.id
        if route.request_id != rid:
            violations.append(f"request {rid}: route labeled {route.request_id}")
        if len(route.nodes) < 2 or len(route.times) != len(route.nodes) or len(route.links) != len(route.nodes) - 1:
            violations.append(f"request {rid}: malformed route")
            continue
        if route.nodes[0] != request.origin:
            violations.append(f"request {rid}: route starts at {route.nodes[0]}, not the origin")
        if route.nodes[-1] != request.destination:
            violations.append(f"request {rid}: route ends at {route.nodes[-1]}, not the destination")
        if route.departure < request.earliest_departure:
            violations.append(f"request {rid}: departs {route.departure} before earliest {request.earliest_departure}")
        if not request.window_open <= route.arrival <= request.window_close:
            violations.append(
                f"request {rid}: arrival {route.arrival} outside "
                f"[{request.window_open}, {request.window_close}]"
            )
        for k, lid in enumerate(route.links):
            if not 0 <= lid < network.num_links:
                violations.append(f"request {rid}: unknown link {lid}")
                continue
            link = network.links[lid]
            if link.tail != route.nodes[k] or link.head != route.nodes[k + 1]:
                violations.append(f"request {rid}: link {lid} does not connect step {k}")
            if route.times[k + 1] != route.times[k] + link.travel_time:
                violations.append(f"request {rid}: travel time violated on link {lid}")
            entry = (lid, route.times[k])
            arrive = (lid, route.times[k + 1])
            entries[entry] = entries.get(entry, 0) + 1
            arrivals[arrive] = arrivals.get(arrive, 0) + 1
        for k in range(1, len(route.nodes) - 1):
            key = (route.nodes[k], route.times[k])
            turn = (route.links[k - 1], route.links[k])
            turns.setdefault(key, set()).add(turn)
            if not network.allow_uturns:
                li, lj = network.links[turn[0]], network.links[turn[1]]
                if li.tail == lj.head and li.head == lj.tail:
                    violations.append(f"request {rid}: forbidden u-turn at node {route.nodes[k]}")

    for (lid, t), count in entries.items():
        cap = network.links[lid].capacity
        if count > cap:
            violations.append(f"link {lid}: {count} entries at t={t} exceed capacity {cap}")
    for (lid, t), count in arrivals.items():
        cap = network.links[lid].capacity
        if count > cap:
            violations.append(f"link {lid}: {count} arrivals at t={t} exceed capacity {cap}")
    for (node, t), used in turns.items():
        if len(used) > 1:
            violations.append(f"node {node}: {len(used)} distinct turns active at t={t}")
    return violations


def assert_feasible(network: Network, assignments: list[tuple[Request, SpaceTimeRoute]]) -> None:
    violations = check_routes(network, assignments)
    if violations:
        raise AssertionError("infeasible route set:\n  " + "\n  ".join(violations))
