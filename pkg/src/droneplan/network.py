"""Static air network model and its time expansion.

Nodes sit at planar coordinates, directed links carry a length, a capacity
(drones per segment per time step) and an integer travel time derived from a
single network-wide velocity. Turns are ordered pairs of links meeting at a
junction node; turns sharing a junction conflict with each other. The time
expansion replicates nodes across discrete time levels and connects them by
link travel times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence


class NetworkError(ValueError):
    """Malformed network definition (dangling endpoints, bad parameters)."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Link:
    id: int
    tail: int
    head: int
    length: float
    capacity: int
    travel_time: int


@dataclass(frozen=True)
class Turn:
    """Ordered pair of links joined at a junction node."""

    in_link: int
    out_link: int
    junction: int


@dataclass
class Network:
    """Immutable directed network with per-node adjacency sets.

    ``out_links[n]`` / ``in_links[n]`` hold link ids leaving / entering node
    ``n``, sorted by link id. Built through :func:`build_network`.
    """

    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    velocity: float
    allow_uturns: bool = True
    out_links: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    in_links: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    _turns: tuple[Turn, ...] | None = field(default=None, repr=False)
    _dist: list[list[float]] | None = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_links(self) -> int:
        return len(self.links)

    def links_between(self, tail: int, head: int) -> tuple[int, ...]:
        """Ids of links from ``tail`` to ``head`` (parallel links allowed)."""
        return tuple(l for l in self.out_links[tail] if self.links[l].head == head)

    @property
    def turns(self) -> tuple[Turn, ...]:
        if self._turns is None:
            object.__setattr__(self, "_turns", tuple(enumerate_turns(self)))
        return self._turns

    def conflict_set(self, turn: Turn) -> tuple[Turn, ...]:
        """All other turns sharing this turn's junction."""
        return tuple(
            t for t in self.turns if t.junction == turn.junction and t != turn
        )

    def shortest_times(self) -> list[list[float]]:
        """All-pairs free-flow travel times in steps (inf when unreachable)."""
        if self._dist is None:
            n = self.num_nodes
            dist = [[math.inf] * n for _ in range(n)]
            for i in range(n):
                dist[i][i] = 0
            for link in self.links:
                if link.travel_time < dist[link.tail][link.head]:
                    dist[link.tail][link.head] = link.travel_time
            for k in range(n):
                dk = dist[k]
                for i in range(n):
                    dik = dist[i][k]
                    if dik == math.inf:
                        continue
                    di = dist[i]
                    for j in range(n):
                        alt = dik + dk[j]
                        if alt < di[j]:
                            di[j] = alt
            object.__setattr__(self, "_dist", dist)
        return self._dist

    def free_flow_time(self, origin: int, destination: int) -> float:
        return self.shortest_times()[origin][destination]


def travel_steps(length: float, velocity: float) -> int:
    """Integer travel time: ceil(length / velocity), guarded against float fuzz."""
    return max(1, math.ceil(length / velocity - 1e-12))


def build_network(
    node_list: Sequence[Node],
    link_list: Sequence[tuple],
    velocity: float,
    allow_uturns: bool = True,
) -> Network:
    """Assemble a validated :class:`Network`.

    ``link_list`` entries are ``(id, tail, head, length, capacity)``; travel
    times are computed from the shared velocity. Node ids must be dense
    0..N-1 and link endpoints must exist.
    """
    if velocity <= 0:
        raise NetworkError(f"velocity must be positive, got {velocity}")
    nodes = tuple(sorted(node_list, key=lambda n: n.id))
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise NetworkError("node ids must be dense 0..N-1")
    for n in nodes:
        if not (math.isfinite(n.x) and math.isfinite(n.y)):
            raise NetworkError(f"node {n.id} has non-finite coordinates")

    links = []
    for lid, tail, head, length, capacity in link_list:
        if tail == head:
            raise NetworkError(f"link {lid} is a self-loop ({tail}->{head})")
        if not (0 <= tail < len(nodes) and 0 <= head < len(nodes)):
            raise NetworkError(f"link {lid} references missing node")
        if length <= 0:
            raise NetworkError(f"link {lid} has non-positive length {length}")
        if capacity < 1:
            raise NetworkError(f"link {lid} has capacity {capacity} < 1")
        links.append(
            Link(lid, tail, head, float(length), int(capacity), travel_steps(length, velocity))
        )
    links.sort(key=lambda l: l.id)
    if [l.id for l in links] != list(range(len(links))):
        raise NetworkError("link ids must be dense 0..M-1")

    out: list[list[int]] = [[] for _ in nodes]
    inc: list[list[int]] = [[] for _ in nodes]
    for l in links:
        out[l.tail].append(l.id)
        inc[l.head].append(l.id)
    return Network(
        nodes=nodes,
        links=tuple(links),
        velocity=float(velocity),
        allow_uturns=allow_uturns,
        out_links=tuple(tuple(sorted(s)) for s in out),
        in_links=tuple(tuple(sorted(s)) for s in inc),
    )


def enumerate_turns(network: Network) -> list[Turn]:
    """All (incoming, outgoing) link pairs at every junction node.

    A node with either no incoming or no outgoing links yields no turns.
    U-turns (out link reversing the in link) are dropped when the network
    disables them.
    """
    turns: list[Turn] = []
    for node in network.nodes:
        for i in network.in_links[node.id]:
            for j in network.out_links[node.id]:
                if not network.allow_uturns:
                    li, lj = network.links[i], network.links[j]
                    if li.tail == lj.head and li.head == lj.tail:
                        continue
                turns.append(Turn(in_link=i, out_link=j, junction=node.id))
    return turns


@dataclass
class TimeExpandedGraph:
    """Space-time expansion of a network up to a horizon.

    Nodes are (node, t) for t in 0..horizon; an arc ((tail, t), (head, t+d))
    exists per link per departure time t with t+d <= horizon.
    """

    network: Network
    horizon: int

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise NetworkError(f"horizon must be >= 1, got {self.horizon}")
        if self.horizon < max(l.travel_time for l in self.network.links):
            raise NetworkError("horizon shorter than the longest link travel time")

    @property
    def num_arcs(self) -> int:
        return sum(
            max(0, self.horizon - l.travel_time + 1) for l in self.network.links
        )

    def arcs(self) -> Iterator[tuple[tuple[int, int], tuple[int, int], int]]:
        """Yield ((tail, t), (head, t + d), link_id) in (link, t) order."""
        for l in self.network.links:
            for t in range(0, self.horizon - l.travel_time + 1):
                yield (l.tail, t), (l.head, t + l.travel_time), l.id

    def has_arc(self, link_id: int, depart: int) -> bool:
        l = self.network.links[link_id]
        return 0 <= depart and depart + l.travel_time <= self.horizon


def expand_time(network: Network, t_max: int) -> TimeExpandedGraph:
    return TimeExpandedGraph(network=network, horizon=t_max)


# ---------------------------------------------------------------------------
# Text format
#
#   # comment
#   NODES <n> LINKS <m> VELOCITY <v>
#   UTURNS 0            (optional; default on)
#   N <id> <x> <y>
#   L <id> <tail> <head> <length> <capacity>
# ---------------------------------------------------------------------------


def parse_network_text(text: str) -> Network:
    nodes: list[Node] = []
    links: list[tuple] = []
    header: tuple[int, int, float] | None = None
    allow_uturns = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0].upper()
        try:
            if tag == "NODES":
                if len(parts) != 6 or parts[2].upper() != "LINKS" or parts[4].upper() != "VELOCITY":
                    raise ValueError("expected 'NODES <n> LINKS <m> VELOCITY <v>'")
                header = (int(parts[1]), int(parts[3]), float(parts[5]))
            elif tag == "UTURNS":
                allow_uturns = parts[1] not in ("0", "off", "false")
            elif tag == "N":
                nodes.append(Node(int(parts[1]), float(parts[2]), float(parts[3])))
            elif tag == "L":
                if len(parts) != 6:
                    raise ValueError("expected 'L <id> <tail> <head> <length> <capacity>' (per-link speeds are not supported)")
                links.append((int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]), int(parts[5])))
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (ValueError, IndexError) as exc:
            raise NetworkError(f"line {lineno}: {exc}") from exc
    if header is None:
        raise NetworkError("missing NODES/LINKS/VELOCITY header")
    n_nodes, n_links, velocity = header
    if len(nodes) != n_nodes or len(links) != n_links:
        raise NetworkError(
            f"header declares {n_nodes} nodes / {n_links} links, "
            f"found {len(nodes)} / {len(links)}"
        )
    return build_network(nodes, links, velocity, allow_uturns=allow_uturns)


def network_to_text(network: Network, comment: str = "") -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(
        f"NODES {network.num_nodes} LINKS {network.num_links} VELOCITY {network.velocity:g}"
    )
    if not network.allow_uturns:
        lines.append("UTURNS 0")
    for n in network.nodes:
        lines.append(f"N {n.id} {n.x:g} {n.y:g}")
    for l in network.links:
        lines.append(f"L {l.id} {l.tail} {l.head} {l.length:g} {l.capacity}")
    return "\n".join(lines) + "\n"


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network_text(fh.read())


def save_network(network: Network, path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(network_to_text(network, comment=comment))
