"""Link-priority learning: lookahead synthesis, features, and kNN regression.

Training rows pair a snapshot of link occupancy at an interval start with
the number of times each link is traversed by virtual lookahead demand
routed through the reservation heuristic. A from-scratch kNN multi-output
regressor predicts raw priorities, standardized to [0, 1] at query time by
dividing by the maximum entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demand import DemandConfig, Request, generate_interval
from .network import Network, expand_time
from .reservation import (
    ReservationLedger,
    SpaceTimeRoute,
    empty_reservation,
    new_reservation,
    reserve,
)


class LearningError(ValueError):
    pass


@dataclass
class OccupancySnapshot:
    """Drone count occupying each link at an interval start."""

    values: np.ndarray

    @classmethod
    def zeros(cls, network: Network) -> "OccupancySnapshot":
        return cls(np.zeros(network.num_links, dtype=np.int64))


@dataclass
class PriorityVector:
    """Per-link traversal counts (raw) or predicted priorities."""

    values: np.ndarray
    standardized: bool = False

    @classmethod
    def zeros(cls, network: Network) -> "PriorityVector":
        return cls(np.zeros(network.num_links, dtype=np.float64))


def link_activity(route: SpaceTimeRoute, interval_start: int, snapshot: OccupancySnapshot) -> OccupancySnapshot:
    """Credit the link the drone occupies at the interval start, if any.

    A drone sitting exactly on a node at the boundary is credited to its
    next outgoing link when the route continues, and not at all once it has
    arrived.
    """
    for k, lid in enumerate(route.links):
        entry, exit_ = route.times[k], route.times[k + 1]
        if entry <= interval_start < exit_:
            snapshot.values[lid] += 1
            break
    return snapshot


def beta_update(route: SpaceTimeRoute, priorities: PriorityVector) -> PriorityVector:
    """Increment the traversal count of every link along the route."""
    for lid in route.links:
        priorities.values[lid] += 1
    return priorities


def encode_features(snapshot: OccupancySnapshot, network: Network) -> np.ndarray:
    """Flattened node-adjacency occupancy matrix (|N| x |N|, row-major).

    Parallel links between the same node pair share one cell (summed).
    """
    n = network.num_nodes
    matrix = np.zeros((n, n), dtype=np.float64)
    for link in network.links:
        matrix[link.tail, link.head] += snapshot.values[link.id]
    return matrix.reshape(-1)


def standardize_beta(priorities: PriorityVector) -> PriorityVector:
    """Divide by the maximum entry; an all-zero vector stays all zero."""
    values = np.asarray(priorities.values, dtype=np.float64)
    peak = values.max() if values.size else 0.0
    if peak > 0:
        values = values / peak
    else:
        values = np.zeros_like(values)
    return PriorityVector(values=values, standardized=True)


def uniform_priorities(network: Network) -> PriorityVector:
    """Constant standardized priorities 1/|A| on every link."""
    n = network.num_links
    return PriorityVector(values=np.full(n, 1.0 / n), standardized=True)


@dataclass
class TrainingDataset:
    features: np.ndarray  # rows x |N|^2
    targets: np.ndarray  # rows x |A|
    training_intervals: int
    virtual_intervals: int
    seed: int

    def __post_init__(self) -> None:
        if len(self.features) != len(self.targets):
            raise LearningError("feature and target row counts differ")

    @property
    def rows(self) -> int:
        return len(self.features)


@dataclass
class KnnRegressor:
    """Unweighted k-nearest-neighbor multi-output regressor.

    Euclidean distance; ties at equal distance break toward the lower
    insertion index. ``distance_weighted`` switches to inverse-distance
    weighting (off by default).
    """

    features: np.ndarray
    targets: np.ndarray
    k: int
    distance_weighted: bool = False

    def __post_init__(self) -> None:
        if self.k < 1 or self.k > len(self.features):
            raise LearningError(f"k={self.k} outside [1, {len(self.features)}]")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbors(self, feature: np.ndarray) -> np.ndarray:
        d2 = np.sum((self.features - feature) ** 2, axis=1)
        return np.argsort(d2, kind="stable")[: self.k]

    def predict(self, feature: np.ndarray) -> PriorityVector:
        feature = np.asarray(feature, dtype=np.float64)
        if feature.shape != (self.feature_dim,):
            raise LearningError(
                f"feature dimension {feature.shape} does not match model ({self.feature_dim},)"
            )
        idx = self.neighbors(feature)
        if self.distance_weighted:
            d = np.sqrt(np.sum((self.features[idx] - feature) ** 2, axis=1))
            if np.any(d == 0):
                weights = (d == 0).astype(np.float64)
            else:
                weights = 1.0 / d
            weights = weights / weights.sum()
            values = weights @ self.targets[idx]
        else:
            values = self.targets[idx].mean(axis=0)
        return PriorityVector(values=values, standardized=False)


def knn_fit(dataset: TrainingDataset, k: int, distance_weighted: bool = False) -> KnnRegressor:
    if dataset.rows == 0:
        raise LearningError("empty dataset")
    return KnnRegressor(
        features=np.asarray(dataset.features, dtype=np.float64),
        targets=np.asarray(dataset.targets, dtype=np.float64),
        k=k,
        distance_weighted=distance_weighted,
    )


def knn_predict(model: KnnRegressor, feature: np.ndarray) -> PriorityVector:
    return model.predict(feature)


# ---------------------------------------------------------------------------
# Lookahead synthesis
# ---------------------------------------------------------------------------


def _day_end(interval: int, day_intervals: int, duration: int) -> int:
    day = (interval + day_intervals - 1) // day_intervals
    return day * day_intervals * duration


@dataclass
class _Carried:
    request: Request
    route: SpaceTimeRoute | None


def synthesize_training_data(
    network: Network,
    demand_config: DemandConfig,
    training_intervals: int,
    virtual_intervals: int,
    seed: int,
    duration: int = 5,
    day_intervals: int = 12,
) -> TrainingDataset:
    """One dataset row per training interval via virtual lookahead routing.

    Each interval: re-reserve departed routes and snapshot link occupancy;
    route virtual demand for the next ``virtual_intervals`` intervals and
    count its link traversals; erase the virtual reservations; route the
    interval's real demand; erase everything and carry state to the next
    interval. Demand is generated as concatenated days of ``day_intervals``
    so windows match the test distribution while traffic persists across day
    boundaries.
    """
    if virtual_intervals < 1:
        raise LearningError("virtual_intervals must be >= 1")
    # Buffer past the final virtual day end so late windows stay representable.
    buffer = max(l.travel_time for l in network.links)
    horizon = _day_end(training_intervals + virtual_intervals, day_intervals, duration) + buffer
    tex = expand_time(network, horizon)
    ledger = ReservationLedger(network)
    rng_real = np.random.default_rng([seed, 0xD0])

    carried: dict[int, _Carried] = {}
    features = []
    targets = []
    next_id = 0

    for i in range(1, training_intervals + 1):
        ws = (i - 1) * duration
        active: list[_Carried] = []
        idle: list[_Carried] = []
        for c in carried.values():
            if c.route is not None and c.route.departure <= ws:
                active.append(c)
            else:
                c.request = c.request.clamp_earliest(ws)
                idle.append(c)

        snapshot = OccupancySnapshot.zeros(network)
        reserved: list[SpaceTimeRoute] = []
        for c in sorted(active, key=lambda c: c.request.id):
            reserve(c.route, ledger)
            reserved.append(c.route)
            link_activity(c.route, ws, snapshot)

        # Virtual lookahead: fresh draws from the same distributions.
        rng_virtual = np.random.default_rng([seed, 0x7E, i])
        priorities = PriorityVector.zeros(network)
        virtual_routes: list[SpaceTimeRoute] = []
        for iv in range(i, i + virtual_intervals):
            day_horizon = _day_end(iv, day_intervals, duration)
            for vr in generate_interval(
                demand_config, network, iv, duration, day_horizon, rng_virtual,
                start_id=10**9 + iv * 10**5,
            ):
                route = new_reservation(vr, ledger, tex)
                if route is not None:
                    beta_update(route, priorities)
                    virtual_routes.append(route)
        for route in virtual_routes:
            empty_reservation(route, ledger)

        # Real demand for this interval, idles re-routed first.
        day_horizon = _day_end(i, day_intervals, duration)
        current = generate_interval(
            demand_config, network, i, duration, day_horizon, rng_real, start_id=next_id
        )
        next_id += len(current)
        for c in sorted(idle, key=lambda c: (c.request.submit_time, c.request.id)):
            previous = c.route
            route = new_reservation(c.request, ledger, tex, earliest=ws)
            if route is None and previous is not None and ledger.can_insert(previous):
                reserve(previous, ledger)
                route = previous
            c.route = route
            if route is not None:
                reserved.append(route)
        for r in current:
            route = new_reservation(r, ledger, tex)
            if route is not None:
                carried[r.id] = _Carried(request=r, route=route)
                reserved.append(route)

        features.append(encode_features(snapshot, network))
        targets.append(priorities.values.copy())

        for route in reserved:
            empty_reservation(route, ledger)
        if not ledger.is_empty():
            raise LearningError(f"ledger not empty at end of interval {i}")

        completed = [
            rid
            for rid, c in carried.items()
            if c.route is not None and c.route.arrival <= i * duration
        ]
        for rid in completed:
            del carried[rid]
        stranded = [
            rid
            for rid, c in carried.items()
            if c.route is None and c.request.window_close <= i * duration
        ]
        for rid in stranded:
            del carried[rid]

    return TrainingDataset(
        features=np.array(features, dtype=np.float64),
        targets=np.array(targets, dtype=np.float64),
        training_intervals=training_intervals,
        virtual_intervals=virtual_intervals,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Dataset / model files
#
#   DATASET ROWS <r> FEATURES <f> TARGETS <l> TRAINING <It> VIRTUAL <Iv> SEED <s> K <k>
#   <f0> <f1> ... | <t0> <t1> ...
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:g}"


def save_dataset(dataset: TrainingDataset, path, k: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = (
            f"DATASET ROWS {dataset.rows} FEATURES {dataset.features.shape[1]} "
            f"TARGETS {dataset.targets.shape[1]} TRAINING {dataset.training_intervals} "
            f"VIRTUAL {dataset.virtual_intervals} SEED {dataset.seed}"
        )
        if k is not None:
            header += f" K {k}"
        fh.write(header + "\n")
        for f, t in zip(dataset.features, dataset.targets):
            fh.write(" ".join(_fmt(v) for v in f) + " | " + " ".join(_fmt(v) for v in t) + "\n")


def load_dataset(path) -> tuple[TrainingDataset, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header or header[0] != "DATASET":
            raise LearningError("missing DATASET header")
        fields = dict(zip(header[1::2], header[2::2]))
        rows = int(fields["ROWS"])
        k = int(fields["K"]) if "K" in fields else None
        features = []
        targets = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            left, _, right = line.partition("|")
            features.append([float(v) for v in left.split()])
            targets.append([float(v) for v in right.split()])
    if len(features) != rows:
        raise LearningError(f"header declares {rows} rows, found {len(features)}")
    dataset = TrainingDataset(
        features=np.array(features, dtype=np.float64),
        targets=np.array(targets, dtype=np.float64),
        training_intervals=int(fields["TRAINING"]),
        virtual_intervals=int(fields["VIRTUAL"]),
        seed=int(fields["SEED"]),
    )
    return dataset, k


def save_model(model: KnnRegressor, dataset: TrainingDataset, path) -> None:
    save_dataset(dataset, path, k=model.k)


def load_model(path, k: int | None = None, distance_weighted: bool = False) -> KnnRegressor:
    dataset, stored_k = load_dataset(path)
    use_k = k if k is not None else stored_k
    if use_k is None:
        raise LearningError("no neighbor count stored in the model file; pass k")
    return knn_fit(dataset, use_k, distance_weighted=distance_weighted)
