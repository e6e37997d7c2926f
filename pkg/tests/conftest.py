import numpy as np
import pytest

from droneplan.demand import Request
from droneplan.harness import bundled_network
from droneplan.network import Node, build_network


@pytest.fixture(scope="session")
def sioux_falls():
    return bundled_network()


@pytest.fixture
def path_net():
    """0 -> 1 -> 2, lengths 2 and 1, capacity 1."""
    return build_network(
        [Node(0, 0.0, 0.0), Node(1, 1.0, 0.0), Node(2, 2.0, 0.0)],
        [(0, 0, 1, 2, 1), (1, 1, 2, 1, 1)],
        velocity=1.0,
    )


@pytest.fixture
def diamond_net():
    """Two parallel routes 0 -> {1|2} -> 3 plus a direct slow link 0 -> 3."""
    return build_network(
        [Node(0, 0.0, 0.0), Node(1, 1.0, 1.0), Node(2, 1.0, -1.0), Node(3, 2.0, 0.0)],
        [
            (0, 0, 1, 1, 1),
            (1, 1, 3, 1, 1),
            (2, 0, 2, 1, 1),
            (3, 2, 3, 2, 1),
            (4, 0, 3, 4, 1),
        ],
        velocity=1.0,
    )


def make_request(rid=0, origin=0, destination=2, submit=0, earliest=0, open_=0, close=10, profit=5):
    return Request(
        id=rid,
        origin=origin,
        destination=destination,
        submit_time=submit,
        earliest_departure=earliest,
        window_open=open_,
        window_close=close,
        profit=profit,
    )


def random_tiny_network(rng: np.random.Generator):
    """Connected-ish random network: 3-4 nodes, up to 6 links."""
    n = int(rng.integers(3, 5))
    nodes = [Node(i, float(rng.integers(0, 10)), float(rng.integers(0, 10))) for i in range(n)]
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    rng.shuffle(pairs)
    # A spanning chain keeps things reachable, then extras.
    chain = [(i, i + 1) for i in range(n - 1)]
    chosen = chain + [p for p in pairs if p not in chain][: int(rng.integers(0, 7 - len(chain)))]
    links = []
    for k, (a, b) in enumerate(chosen[:6]):
        links.append((k, a, b, float(rng.integers(1, 4)), int(rng.integers(1, 3))))
    return build_network(nodes, links, velocity=1.0)


def random_tiny_requests(network, rng: np.random.Generator, horizon=12, max_requests=3):
    dist = network.shortest_times()
    reqs = []
    count = int(rng.integers(1, max_requests + 1))
    for rid in range(count):
        for _ in range(50):
            o = int(rng.integers(0, network.num_nodes))
            d = int(rng.integers(0, network.num_nodes))
            if o != d and dist[o][d] != float("inf"):
                break
        else:
            continue
        submit = int(rng.integers(0, max(1, horizon // 2)))
        earliest = submit + int(rng.integers(0, 3))
        tau = earliest + int(dist[o][d])
        if tau > horizon:
            continue
        lo = tau + int(rng.integers(0, 4))
        hi = min(horizon, lo + int(rng.integers(0, 9)))
        if lo > hi:
            continue
        reqs.append(
            Request(rid, o, d, submit, earliest, lo, hi, int(rng.integers(1, 11)))
        )
    return reqs
