"""Command line interface: gen, train, run, compare."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .demand import DemandConfig, generate_instance, save_instance
from .harness import (
    ExperimentConfig,
    bundled_network,
    compare_results,
    desk_demand_config,
    desk_solver_config,
    parse_policy_spec,
    run_experiment,
    write_reports,
)
from .learning import knn_fit, save_dataset, save_model, synthesize_training_data
from .network import load_network
from .solver import SolverConfig


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"config line without '=': {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--network", help="network file (default: bundled Sioux Falls)")
    parser.add_argument("--rate", type=float, help="requests per interval (default 20)")
    parser.add_argument("--intervals", type=int, help="intervals per instance (default 12)")
    parser.add_argument("--duration", type=int, help="time steps per interval (default 5)")
    parser.add_argument("--config", help="key = value file overriding defaults")


def _merge(args: argparse.Namespace, file_values: dict[str, str], key: str, cast, default):
    cli = getattr(args, key.replace("-", "_"), None)
    if cli is not None:
        return cli
    if key in file_values:
        return cast(file_values[key])
    return default


def _demand_config(args, fv) -> DemandConfig:
    base = desk_demand_config()
    return DemandConfig(
        rate=_merge(args, fv, "rate", float, base.rate),
        y_decay=float(fv.get("y_decay", base.y_decay)),
        depart_offset_max=int(fv.get("depart_offset_max", base.depart_offset_max)),
        window_shape=float(fv.get("window_shape", base.window_shape)),
        window_scale_divisor=float(fv.get("window_scale_divisor", base.window_scale_divisor)),
        profit_min=int(fv.get("profit_min", base.profit_min)),
        profit_max=int(fv.get("profit_max", base.profit_max)),
    )


def _network(args, fv):
    path = _merge(args, fv, "network", str, None)
    return (load_network(path) if path else bundled_network()), path


def _solver_config(args, fv) -> SolverConfig:
    base = desk_solver_config()
    backend = _merge(args, fv, "solver", str, base.backend)
    time_limit = _merge(args, fv, "time_limit", float, base.time_limit)
    node_limit = _merge(args, fv, "node_limit", int, base.node_limit)
    if isinstance(node_limit, str):
        node_limit = None if node_limit == "none" else int(node_limit)
    return SolverConfig(
        time_limit=time_limit,
        backend=backend,
        command=_merge(args, fv, "solver_cmd", str, None),
        node_limit=node_limit,
        candidate_cap=base.candidate_cap,
        generation_cap=base.generation_cap,
    )


def cmd_gen(args) -> int:
    fv = _read_config_file(args.config) if args.config else {}
    network, _ = _network(args, fv)
    demand = _demand_config(args, fv)
    intervals = _merge(args, fv, "intervals", int, 12)
    duration = _merge(args, fv, "duration", int, 5)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        instance = generate_instance(demand, network, intervals, duration, seed)
        path = out / f"instance_{seed}.txt"
        save_instance(instance, path)
        print(f"wrote {path} ({instance.total_requests} requests)")
    return 0


def cmd_train(args) -> int:
    fv = _read_config_file(args.config) if args.config else {}
    network, _ = _network(args, fv)
    demand = _demand_config(args, fv)
    duration = _merge(args, fv, "duration", int, 5)
    day_intervals = _merge(args, fv, "intervals", int, 12)
    dataset = synthesize_training_data(
        network,
        demand,
        training_intervals=args.training_intervals,
        virtual_intervals=args.virtual_intervals,
        seed=args.seed,
        duration=duration,
        day_intervals=day_intervals,
    )
    model = knn_fit(dataset, args.k)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, dataset, out)
    if args.dataset_out:
        save_dataset(dataset, Path(args.dataset_out))
    print(f"wrote {out} ({dataset.rows} rows, k={args.k})")
    return 0


def cmd_run(args) -> int:
    fv = _read_config_file(args.config) if args.config else {}
    demand = _demand_config(args, fv)
    seeds_raw = args.seeds if args.seeds else fv.get("seeds", "0")
    seeds = tuple(int(s) for s in str(seeds_raw).split(",")) if isinstance(seeds_raw, str) else tuple(args.seeds)
    policy_raw = args.policies if args.policies else fv.get("policies", "myopic")
    tokens = policy_raw.split(",") if isinstance(policy_raw, str) else policy_raw
    policies = tuple(parse_policy_spec(t) for t in tokens)
    config = ExperimentConfig(
        network_path=_merge(args, fv, "network", str, None),
        demand=demand,
        intervals=_merge(args, fv, "intervals", int, 12),
        duration=_merge(args, fv, "duration", int, 5),
        seeds=seeds,
        policies=policies,
        solver=_solver_config(args, fv),
        model_path=_merge(args, fv, "model", str, None),
        out_dir=args.out,
        figures=not args.no_figures,
        workers=args.workers,
    )
    report = run_experiment(config)
    out = write_reports(config, report)
    print(f"wrote reports under {out}")
    for row in report.rows:
        gap = "" if row.profit_gap_pct is None else f"  gap {row.profit_gap_pct:+.1f}%"
        print(
            f"seed {row.seed}  {row.policy:<18} arrived {row.arrived:>4}  "
            f"accepted {row.accepted:>4}  profit {row.profit:>5}{gap}"
        )
    return 0


def cmd_compare(args) -> int:
    report = compare_results([Path(p) for p in args.results], Path(args.out), figures=not args.no_figures)
    print(f"wrote comparison under {args.out}")
    for policy in report.policies:
        if policy == "myopic":
            continue
        try:
            print(f"{policy:<18} mean profit gap {report.mean_gap_pct(policy):+.1f}%")
        except KeyError:
            pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droneplan",
        description="Online drone delivery service planning: instances, training, policy runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate demand instances")
    _add_common(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--out", default="instances")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="synthesize a training set and fit the priority model")
    _add_common(p)
    p.add_argument("--training-intervals", type=int, default=2000)
    p.add_argument("--virtual-intervals", type=int, default=5)
    p.add_argument("--k", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.knn")
    p.add_argument("--dataset-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="run policies over seeds and write reports")
    _add_common(p)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--policies", default=None, help="comma list: myopic,SP_CTE2,SP_CTE2:uniform,const:0.8")
    p.add_argument("--model", dest="model", default=None)
    p.add_argument("--solver", dest="solver", choices=["builtin", "external"], default=None)
    p.add_argument("--solver-cmd", dest="solver_cmd", default=None, help="template with {in} {out} {tl}")
    p.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    p.add_argument("--node-limit", dest="node_limit", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="recompute gap tables from result files")
    p.add_argument("results", nargs="+")
    p.add_argument("--out", default="comparison")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
