"""Experiment orchestration: seed sweeps, policy comparisons, reports.

One instance is generated per seed and every policy runs on the identical
instance. Reports are written as comma-separated tables with a fixed column
order (integers for profits, one decimal for percentages) plus a manifest
echoing the resolved configuration; matplotlib figures are rendered next to
the tables unless disabled.
"""

from __future__ import annotations

import importlib.resources
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .demand import DemandConfig, generate_instance
from .learning import KnnRegressor, load_model
from .network import Network, load_network, parse_network_text
from .policy import (
    AlphaProfile,
    PolicyRunReport,
    named_profiles,
    run_myopic,
    run_surrogate,
)
from .solver import SolverConfig


class HarnessError(ValueError):
    pass


def bundled_network() -> Network:
    """The packaged Sioux Falls benchmark network."""
    text = (
        importlib.resources.files("droneplan.data")
        .joinpath("sioux_falls.net")
        .read_text(encoding="utf-8")
    )
    return parse_network_text(text)


@dataclass(frozen=True)
class PolicySpec:
    name: str
    kind: str  # myopic | surrogate
    alpha: AlphaProfile | None = None
    uniform_beta: bool = False


def parse_policy_spec(token: str) -> PolicySpec:
    """myopic | <profile-name> | <profile-name>:uniform | const:<value>[:uniform]"""
    parts = token.strip().split(":")
    if parts[0] == "myopic":
        return PolicySpec(name="myopic", kind="myopic")
    uniform = parts[-1] == "uniform"
    if uniform:
        parts = parts[:-1]
    profiles = named_profiles()
    if parts[0] == "const":
        if len(parts) != 2:
            raise HarnessError(f"malformed constant profile {token!r}")
        from .policy import constant_profile

        alpha = constant_profile(float(parts[1]))
    elif parts[0] in profiles:
        alpha = profiles[parts[0]]
    else:
        raise HarnessError(f"unknown policy {token!r}")
    name = alpha.name + (":uniform" if uniform else "")
    return PolicySpec(name=name, kind="surrogate", alpha=alpha, uniform_beta=uniform)


def desk_solver_config() -> SolverConfig:
    """Laptop-scale defaults: deterministic node budget, 60 s backstop."""
    return SolverConfig(
        time_limit=60.0,
        node_limit=30_000,
        candidate_cap=32,
        generation_cap=300,
    )


def desk_demand_config(rate: float = 20.0) -> DemandConfig:
    """Desk-scale demand: south-north concentration strong enough that link
    capacity, not window feasibility, is the binding resource."""
    return DemandConfig(rate=rate, y_decay=6.0, window_scale_divisor=3.0)


@dataclass
class ExperimentConfig:
    network_path: str | None = None  # None selects the bundled benchmark network
    demand: DemandConfig = field(default_factory=desk_demand_config)
    intervals: int = 12
    duration: int = 5
    seeds: tuple[int, ...] = (0,)
    policies: tuple[PolicySpec, ...] = (PolicySpec("myopic", "myopic"),)
    solver: SolverConfig = field(default_factory=desk_solver_config)
    model_path: str | None = None
    out_dir: str = "out"
    figures: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise HarnessError("need at least one seed")
        for spec in self.policies:
            if spec.kind == "surrogate" and spec.alpha is not None:
                if spec.alpha.kind == "stepwise" and spec.alpha.segments_total() != self.intervals:
                    raise HarnessError(
                        f"profile {spec.alpha.name}: step lengths sum to "
                        f"{spec.alpha.segments_total()}, not {self.intervals}"
                    )


@dataclass
class ReportRow:
    seed: int
    policy: str
    arrived: int
    accepted: int
    service_rate: float
    profit: int
    profit_gap: int | None = None
    profit_gap_pct: float | None = None
    service_gap: int | None = None
    service_gap_pct: float | None = None


@dataclass
class ComparisonReport:
    rows: list[ReportRow]
    interval_profits: dict[tuple[int, str], list[int]]
    policies: list[str]
    seeds: list[int]

    def row(self, seed: int, policy: str) -> ReportRow:
        for r in self.rows:
            if r.seed == seed and r.policy == policy:
                return r
        raise KeyError((seed, policy))

    def mean_gap_pct(self, policy: str) -> float:
        gaps = [r.profit_gap_pct for r in self.rows if r.policy == policy and r.profit_gap_pct is not None]
        if not gaps:
            raise KeyError(f"no gap rows for {policy}")
        return sum(gaps) / len(gaps)


def _load_network(config: ExperimentConfig) -> Network:
    return load_network(config.network_path) if config.network_path else bundled_network()


def _seed_worker(args) -> tuple[int, list[tuple[str, PolicyRunReport]]]:
    config, network, model, seed = args
    instance = generate_instance(config.demand, network, config.intervals, config.duration, seed)
    outputs = []
    for spec in config.policies:
        if spec.kind == "myopic":
            rep = run_myopic(instance, config.solver)
        else:
            rep = run_surrogate(
                instance,
                config.solver,
                None if spec.uniform_beta else model,
                spec.alpha,
                config.demand,
                uniform_beta=spec.uniform_beta,
                label=spec.name,
            )
        outputs.append((spec.name, rep))
    return seed, outputs


def gap_columns(myopic: PolicyRunReport | None, rep: PolicyRunReport) -> dict:
    if myopic is None or rep.policy == "myopic":
        return {}
    gap = rep.profit - myopic.profit
    service_gap = rep.accepted - myopic.accepted
    return {
        "profit_gap": gap,
        "profit_gap_pct": 100.0 * gap / myopic.profit if myopic.profit else 0.0,
        "service_gap": service_gap,
        "service_gap_pct": 100.0 * service_gap / myopic.accepted if myopic.accepted else 0.0,
    }


def run_experiment(config: ExperimentConfig) -> ComparisonReport:
    network = _load_network(config)
    needs_model = any(s.kind == "surrogate" and not s.uniform_beta for s in config.policies)
    model: KnnRegressor | None = None
    if needs_model:
        if not config.model_path:
            raise HarnessError("surrogate policies with learned priorities need --model")
        model = load_model(config.model_path)
        if model.feature_dim != network.num_nodes**2:
            raise HarnessError(
                f"model feature dimension {model.feature_dim} does not match network "
                f"({network.num_nodes}^2)"
            )

    policies = list(config.policies)
    if any(s.kind == "surrogate" for s in policies) and not any(
        s.kind == "myopic" for s in policies
    ):
        policies.insert(0, PolicySpec("myopic", "myopic"))
    config = replace(config, policies=tuple(policies))

    jobs = [(config, network, model, seed) for seed in config.seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_seed_worker, jobs))
    else:
        raw = [_seed_worker(job) for job in jobs]
    raw.sort(key=lambda pair: config.seeds.index(pair[0]))

    rows: list[ReportRow] = []
    series: dict[tuple[int, str], list[int]] = {}
    for seed, outputs in raw:
        reports = dict(outputs)
        myopic = reports.get("myopic")
        arrived = {rep.arrived for _n, rep in outputs}
        if len(arrived) != 1:
            raise HarnessError(f"seed {seed}: policies saw different arrival counts {arrived}")
        for name, rep in outputs:
            extra = gap_columns(myopic, rep)
            rows.append(
                ReportRow(
                    seed=seed,
                    policy=name,
                    arrived=rep.arrived,
                    accepted=rep.accepted,
                    service_rate=100.0 * rep.service_rate,
                    profit=rep.profit,
                    **extra,
                )
            )
            series[(seed, name)] = list(rep.interval_profits)
    return ComparisonReport(
        rows=rows,
        interval_profits=series,
        policies=[s.name for s in config.policies],
        seeds=list(config.seeds),
    )


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def _pct(value: float | None) -> str:
    return "" if value is None else f"{value:.1f}"


def _num(value: int | None) -> str:
    return "" if value is None else str(value)


def write_results_csv(report: ComparisonReport, path: Path) -> None:
    lines = [
        "seed,policy,arrived,accepted,service_rate_pct,profit,"
        "profit_gap,profit_gap_pct,service_gap,service_gap_pct"
    ]
    for r in report.rows:
        lines.append(
            f"{r.seed},{r.policy},{r.arrived},{r.accepted},{r.service_rate:.1f},{r.profit},"
            f"{_num(r.profit_gap)},{_pct(r.profit_gap_pct)},"
            f"{_num(r.service_gap)},{_pct(r.service_gap_pct)}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_interval_profits_csv(report: ComparisonReport, path: Path) -> None:
    lines = ["seed,policy,interval,profit"]
    for (seed, policy), profits in sorted(
        report.interval_profits.items(), key=lambda kv: (kv[0][0], report.policies.index(kv[0][1]))
    ):
        for i, p in enumerate(profits, start=1):
            lines.append(f"{seed},{policy},{i},{p}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_heatmap_data(report: ComparisonReport, profit_path: Path, gap_path: Path) -> None:
    """Numeric profit and gap-percent matrices, one row per seed."""
    header = "seed," + ",".join(report.policies)
    profit_lines = [header]
    gap_lines = [header]
    for seed in report.seeds:
        profits = [str(report.row(seed, p).profit) for p in report.policies]
        gaps = []
        for p in report.policies:
            row = report.row(seed, p)
            gaps.append("0.0" if row.profit_gap_pct is None else f"{row.profit_gap_pct:.1f}")
        profit_lines.append(f"{seed}," + ",".join(profits))
        gap_lines.append(f"{seed}," + ",".join(gaps))
    profit_path.write_text("\n".join(profit_lines) + "\n", encoding="utf-8")
    gap_path.write_text("\n".join(gap_lines) + "\n", encoding="utf-8")


def write_manifest(config: ExperimentConfig, path: Path) -> None:
    lines = [
        f"network = {config.network_path or 'bundled:sioux_falls'}",
        f"rate = {config.demand.rate:g}",
        f"y_decay = {config.demand.y_decay:g}",
        f"depart_offset_max = {config.demand.depart_offset_max}",
        f"window_shape = {config.demand.window_shape:g}",
        f"window_scale_divisor = {config.demand.window_scale_divisor:g}",
        f"profit_min = {config.demand.profit_min}",
        f"profit_max = {config.demand.profit_max}",
        f"intervals = {config.intervals}",
        f"duration = {config.duration}",
        f"seeds = {','.join(str(s) for s in config.seeds)}",
        f"policies = {','.join(s.name for s in config.policies)}",
        f"solver_backend = {config.solver.backend}",
        f"time_limit = {config.solver.time_limit:g}",
        f"node_limit = {config.solver.node_limit if config.solver.node_limit is not None else 'none'}",
        f"candidate_cap = {config.solver.candidate_cap if config.solver.candidate_cap is not None else 'none'}",
        f"generation_cap = {config.solver.generation_cap if config.solver.generation_cap is not None else 'none'}",
        f"model = {config.model_path or 'none'}",
        f"out = {config.out_dir}",
        f"figures = {int(config.figures)}",
        f"workers = {config.workers}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_reports(config: ExperimentConfig, report: ComparisonReport) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(report, out / "results.csv")
    write_interval_profits_csv(report, out / "interval_profits.csv")
    emit_heatmap_data(report, out / "heatmap_profit.csv", out / "heatmap_gap.csv")
    write_manifest(config, out / "manifest.txt")
    if config.figures:
        from .figures import render_heatmap, render_interval_profits

        render_interval_profits(report, out / "interval_profits.png")
        render_heatmap(report, out / "heatmap.png")
    return out


# ---------------------------------------------------------------------------
# Re-comparison from result tables
# ---------------------------------------------------------------------------


def load_results_csv(path: Path) -> ComparisonReport:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    rows = []
    policies: list[str] = []
    seeds: list[int] = []
    for line in lines[1:]:
        parts = line.split(",")
        seed, policy = int(parts[0]), parts[1]
        row = ReportRow(
            seed=seed,
            policy=policy,
            arrived=int(parts[2]),
            accepted=int(parts[3]),
            service_rate=float(parts[4]),
            profit=int(parts[5]),
        )
        rows.append(row)
        if policy not in policies:
            policies.append(policy)
        if seed not in seeds:
            seeds.append(seed)
    return ComparisonReport(rows=rows, interval_profits={}, policies=policies, seeds=seeds)


def recompute_gaps(report: ComparisonReport) -> ComparisonReport:
    """Fill gap columns from raw profits against each seed's myopic row."""
    for seed in report.seeds:
        try:
            myopic = report.row(seed, "myopic")
        except KeyError:
            continue
        for r in report.rows:
            if r.seed != seed or r.policy == "myopic":
                continue
            r.profit_gap = r.profit - myopic.profit
            r.profit_gap_pct = 100.0 * r.profit_gap / myopic.profit if myopic.profit else 0.0
            r.service_gap = r.accepted - myopic.accepted
            r.service_gap_pct = (
                100.0 * r.service_gap / myopic.accepted if myopic.accepted else 0.0
            )
    return report


def compare_results(paths: list[Path], out_dir: Path, figures: bool = True) -> ComparisonReport:
    merged: ComparisonReport | None = None
    for path in paths:
        part = load_results_csv(path)
        if merged is None:
            merged = part
        else:
            merged.rows.extend(part.rows)
            for p in part.policies:
                if p not in merged.policies:
                    merged.policies.append(p)
            for s in part.seeds:
                if s not in merged.seeds:
                    merged.seeds.append(s)
    if merged is None:
        raise HarnessError("no result files given")
    recompute_gaps(merged)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(merged, out_dir / "comparison.csv")
    emit_heatmap_data(merged, out_dir / "heatmap_profit.csv", out_dir / "heatmap_gap.csv")
    if figures:
        from .figures import render_heatmap

        render_heatmap(merged, out_dir / "heatmap.png")
    return merged
