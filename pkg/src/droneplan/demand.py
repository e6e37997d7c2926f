"""Stochastic request generation and instance serialization.

Per interval, the number of arriving requests is Poisson with the configured
rate. Origins tilt toward the bottom of the network and destinations toward
the top through exponential weights on the min-max-normalized y-coordinate.
Arrival windows are drawn from a skew normal anchored at the request's
free-flow arrival time and truncated at the end of the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class InstanceError(ValueError):
    """Malformed instance file or generation parameters."""


@dataclass(frozen=True)
class Request:
    """A delivery request: spatial pair, timing, and profit.

    ``window_open <= window_close`` always holds, but the window is not
    guaranteed reachable; policies may simply reject infeasible requests.
    """

    id: int
    origin: int
    destination: int
    submit_time: int
    earliest_departure: int
    window_open: int
    window_close: int
    profit: int

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise InstanceError(f"request {self.id}: origin equals destination")
        if self.submit_time > self.earliest_departure:
            raise InstanceError(f"request {self.id}: earliest departure precedes submission")
        if self.window_open > self.window_close:
            raise InstanceError(f"request {self.id}: empty arrival window")

    def clamp_earliest(self, t: int) -> "Request":
        """Copy with earliest departure raised to ``t`` if currently below it."""
        if self.earliest_departure >= t:
            return self
        return replace(self, earliest_departure=t)


@dataclass
class DemandConfig:
    rate: float = 20.0
    y_decay: float = 2.0
    depart_offset_max: int = 10
    window_shape: float = 4.0
    window_scale_divisor: float = 4.0
    profit_min: int = 1
    profit_max: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise InstanceError(f"rate must be >= 0, got {self.rate}")
        if self.profit_min > self.profit_max:
            raise InstanceError("profit_min exceeds profit_max")

    @property
    def mean_profit(self) -> float:
        return (self.profit_min + self.profit_max) / 2


@dataclass
class Instance:
    """A generated demand realization: requests grouped by interval (1-based)."""

    network: object
    intervals: int
    duration: int
    seed: int
    requests_by_interval: tuple[tuple[Request, ...], ...]

    @property
    def horizon(self) -> int:
        return self.intervals * self.duration

    @property
    def total_requests(self) -> int:
        return sum(len(g) for g in self.requests_by_interval)

    def interval_requests(self, i: int) -> tuple[Request, ...]:
        """Requests submitted during interval ``i`` (1-based)."""
        return self.requests_by_interval[i - 1]

    def all_requests(self) -> list[Request]:
        return [r for g in self.requests_by_interval for r in g]


def sample_interval_count(config: DemandConfig, rng: np.random.Generator) -> int:
    """Poisson draw of the number of requests arriving in one interval."""
    if config.rate == 0:
        return 0
    return int(rng.poisson(config.rate))


def _node_weights(network, config: DemandConfig) -> tuple[np.ndarray, np.ndarray]:
    ys = np.array([n.y for n in network.nodes], dtype=float)
    span = ys.max() - ys.min()
    rank = (ys - ys.min()) / span if span > 0 else np.zeros_like(ys)
    origin_w = np.exp(-config.y_decay * rank)
    dest_w = np.exp(-config.y_decay * (1.0 - rank))
    return origin_w / origin_w.sum(), dest_w / dest_w.sum()


def _skew_normal(rng: np.random.Generator, loc: float, scale: float, shape: float) -> float:
    # Two-normal construction: delta*|u0| + sqrt(1-delta^2)*u1.
    delta = shape / math.sqrt(1.0 + shape * shape)
    u0, u1 = rng.standard_normal(2)
    z = delta * abs(u0) + math.sqrt(1.0 - delta * delta) * u1
    return loc + scale * z


def _sample_window(
    config: DemandConfig, rng: np.random.Generator, tau_free: int, horizon_end: int
) -> tuple[int, int]:
    """Two truncated skew-normal draws on [tau_free, horizon_end], ordered."""
    if tau_free >= horizon_end:
        return horizon_end, horizon_end
    scale = (horizon_end - tau_free) / config.window_scale_divisor
    draws = []
    for _ in range(2):
        value = None
        for _ in range(1000):
            x = _skew_normal(rng, tau_free, scale, config.window_shape)
            if tau_free <= x <= horizon_end:
                value = x
                break
        if value is None:
            value = float(tau_free)
        draws.append(int(round(value)))
    lo, hi = min(draws), max(draws)
    return max(tau_free, lo), min(horizon_end, max(hi, max(tau_free, lo)))


def sample_request(
    config: DemandConfig,
    network,
    interval: int,
    duration: int,
    horizon_end: int,
    rng: np.random.Generator,
    req_id: int = 0,
) -> Request:
    """Draw one request submitted during the given interval (1-based).

    The OD pair is resampled until the origin differs from the destination
    and the destination is reachable.
    """
    if network.num_nodes < 2:
        raise InstanceError("need at least two nodes to sample an OD pair")
    origin_w, dest_w = _node_weights(network, config)
    n = network.num_nodes
    origin = destination = -1
    for _ in range(1000):
        origin = int(rng.choice(n, p=origin_w))
        destination = int(rng.choice(n, p=dest_w))
        if origin != destination and math.isfinite(network.free_flow_time(origin, destination)):
            break
    else:
        raise InstanceError("could not sample a connected OD pair")

    submit = int(rng.integers((interval - 1) * duration, interval * duration))
    earliest = submit + int(rng.integers(0, config.depart_offset_max + 1))
    tau_free = earliest + int(network.free_flow_time(origin, destination))
    lo, hi = _sample_window(config, rng, tau_free, horizon_end)
    profit = int(rng.integers(config.profit_min, config.profit_max + 1))
    return Request(
        id=req_id,
        origin=origin,
        destination=destination,
        submit_time=submit,
        earliest_departure=earliest,
        window_open=lo,
        window_close=hi,
        profit=profit,
    )


def generate_interval(
    config: DemandConfig,
    network,
    interval: int,
    duration: int,
    horizon_end: int,
    rng: np.random.Generator,
    start_id: int = 0,
) -> list[Request]:
    """One interval's worth of requests, sorted by submission time."""
    count = sample_interval_count(config, rng)
    reqs = [
        sample_request(config, network, interval, duration, horizon_end, rng, req_id=start_id + k)
        for k in range(count)
    ]
    reqs.sort(key=lambda r: (r.submit_time, r.id))
    return reqs


def generate_instance(
    config: DemandConfig,
    network,
    intervals: int,
    duration: int,
    seed: int | None = None,
) -> Instance:
    """Deterministic instance for the given seed: requests for every interval."""
    if intervals < 1 or duration < 1:
        raise InstanceError("intervals and duration must be >= 1")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    horizon_end = intervals * duration
    groups = []
    next_id = 0
    for i in range(1, intervals + 1):
        group = generate_interval(config, network, i, duration, horizon_end, rng, start_id=next_id)
        next_id += len(group)
        groups.append(tuple(group))
    return Instance(
        network=network,
        intervals=intervals,
        duration=duration,
        seed=seed,
        requests_by_interval=tuple(groups),
    )


# ---------------------------------------------------------------------------
# Text format
#
#   INSTANCE INTERVALS <I> DURATION <D> SEED <seed>
#   I <idx>
#   R <id> <origin> <dest> <submit> <earliest> <open> <close> <profit>
# ---------------------------------------------------------------------------


def instance_to_text(instance: Instance) -> str:
    lines = [
        f"INSTANCE INTERVALS {instance.intervals} DURATION {instance.duration} SEED {instance.seed}"
    ]
    for i, group in enumerate(instance.requests_by_interval, start=1):
        lines.append(f"I {i}")
        for r in group:
            lines.append(
                f"R {r.id} {r.origin} {r.destination} {r.submit_time} "
                f"{r.earliest_departure} {r.window_open} {r.window_close} {r.profit}"
            )
    return "\n".join(lines) + "\n"


def parse_instance_text(text: str, network) -> Instance:
    header = None
    groups: list[list[Request]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0].upper()
        try:
            if tag == "INSTANCE":
                header = (int(parts[2]), int(parts[4]), int(parts[6]))
            elif tag == "I":
                idx = int(parts[1])
                if idx != len(groups) + 1:
                    raise ValueError(f"interval {idx} out of order")
                groups.append([])
            elif tag == "R":
                if not groups:
                    raise ValueError("request before any interval header")
                vals = [int(v) for v in parts[1:9]]
                groups[-1].append(Request(*vals))
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (ValueError, IndexError) as exc:
            raise InstanceError(f"line {lineno}: {exc}") from exc
    if header is None:
        raise InstanceError("missing INSTANCE header")
    intervals, duration, seed = header
    if len(groups) != intervals:
        raise InstanceError(f"header declares {intervals} intervals, found {len(groups)}")
    for i, group in enumerate(groups, start=1):
        for r in group:
            if not (i - 1) * duration <= r.submit_time < i * duration:
                raise InstanceError(f"request {r.id} submitted outside interval {i}")
    return Instance(
        network=network,
        intervals=intervals,
        duration=duration,
        seed=seed,
        requests_by_interval=tuple(tuple(g) for g in groups),
    )


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance_to_text(instance))


def load_instance(path, network) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance_text(fh.read(), network)
