import pytest

from droneplan.demand import DemandConfig
from droneplan.harness import (
    ComparisonReport,
    ExperimentConfig,
    HarnessError,
    PolicySpec,
    ReportRow,
    compare_results,
    emit_heatmap_data,
    gap_columns,
    load_results_csv,
    parse_policy_spec,
    recompute_gaps,
    run_experiment,
    write_reports,
)
from droneplan.policy import PolicyRunReport
from droneplan.solver import SolverConfig


def test_parse_policy_specs():
    assert parse_policy_spec("myopic").kind == "myopic"
    spec = parse_policy_spec("SP_CTE2")
    assert spec.kind == "surrogate" and spec.alpha.constant == 1.5 and not spec.uniform_beta
    uni = parse_policy_spec("SP_CTE2:uniform")
    assert uni.uniform_beta and uni.name == "SP_CTE2:uniform"
    const = parse_policy_spec("const:0.8")
    assert const.alpha.constant == 0.8
    with pytest.raises(HarnessError):
        parse_policy_spec("SP_NOPE")


def test_gap_arithmetic_reference_point():
    myopic = PolicyRunReport("myopic", 1203, 500, 3076, [], [], [])
    surrogate = PolicyRunReport("SP_CTE2", 1203, 488, 3497, [], [], [])
    cols = gap_columns(myopic, surrogate)
    assert cols["profit_gap"] == 421
    assert cols["profit_gap_pct"] == pytest.approx(13.7, abs=0.05)


def test_stepwise_profile_must_cover_intervals():
    with pytest.raises(HarnessError, match="step lengths"):
        ExperimentConfig(
            intervals=10,
            policies=(parse_policy_spec("SP_STP1"),),
        )


def desk_test_config(tmp_path, policies=("myopic",), seeds=(0,), rate=3.0, figures=False):
    return ExperimentConfig(
        demand=DemandConfig(rate=rate, y_decay=4.0),
        intervals=3,
        duration=5,
        seeds=tuple(seeds),
        policies=tuple(parse_policy_spec(p) for p in policies),
        solver=SolverConfig(node_limit=3000, candidate_cap=16, generation_cap=100),
        out_dir=str(tmp_path / "out"),
        figures=figures,
    )


def test_run_experiment_myopic_only(tmp_path):
    config = desk_test_config(tmp_path)
    report = run_experiment(config)
    assert report.policies == ["myopic"]
    row = report.row(0, "myopic")
    assert row.profit_gap is None
    out = write_reports(config, report)
    results = (out / "results.csv").read_text()
    header = results.splitlines()[0]
    assert header.startswith("seed,policy,arrived,accepted")
    # No gap values for the lone myopic policy.
    assert results.splitlines()[1].endswith(",,,,")


def test_run_experiment_inserts_baseline_and_matches_arrivals(tmp_path):
    config = desk_test_config(tmp_path, policies=("SP_CTE2:uniform",), seeds=(1, 2))
    report = run_experiment(config)
    assert report.policies[0] == "myopic"
    for seed in (1, 2):
        arrived = {report.row(seed, p).arrived for p in report.policies}
        assert len(arrived) == 1
    row = report.row(1, "SP_CTE2:uniform")
    assert row.profit_gap == row.profit - report.row(1, "myopic").profit


def test_reports_are_byte_deterministic(tmp_path):
    config_a = desk_test_config(tmp_path / "a", policies=("myopic", "SP_CTE5:uniform"), seeds=(4,))
    config_b = desk_test_config(tmp_path / "b", policies=("myopic", "SP_CTE5:uniform"), seeds=(4,))
    out_a = write_reports(config_a, run_experiment(config_a))
    out_b = write_reports(config_b, run_experiment(config_b))
    for name in ("results.csv", "interval_profits.csv", "heatmap_profit.csv", "heatmap_gap.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_interval_profit_series_shape(tmp_path):
    config = desk_test_config(tmp_path, policies=("myopic",), seeds=(0,))
    report = run_experiment(config)
    series = report.interval_profits[(0, "myopic")]
    assert len(series) == 3
    out = write_reports(config, report)
    lines = (out / "interval_profits.csv").read_text().splitlines()
    assert lines[0] == "seed,policy,interval,profit"
    assert len(lines) == 1 + 3


def test_heatmap_single_cell(tmp_path):
    report = ComparisonReport(
        rows=[ReportRow(0, "myopic", 10, 5, 50.0, 30)],
        interval_profits={},
        policies=["myopic"],
        seeds=[0],
    )
    emit_heatmap_data(report, tmp_path / "p.csv", tmp_path / "g.csv")
    assert (tmp_path / "p.csv").read_text().splitlines() == ["seed,myopic", "0,30"]


def test_heatmap_matrix_shape(tmp_path):
    rows = []
    policies = ["myopic"] + [f"P{i}" for i in range(3)]
    for seed in range(2):
        rows.append(ReportRow(seed, "myopic", 10, 5, 50.0, 100))
        for i in range(3):
            rows.append(
                ReportRow(seed, f"P{i}", 10, 5, 50.0, 110 + i, 10 + i, 10.0 + i, 0, 0.0)
            )
    report = ComparisonReport(rows=rows, interval_profits={}, policies=policies, seeds=[0, 1])
    emit_heatmap_data(report, tmp_path / "p.csv", tmp_path / "g.csv")
    plines = (tmp_path / "p.csv").read_text().splitlines()
    assert plines[0] == "seed,myopic,P0,P1,P2"
    assert len(plines) == 3


def test_heatmap_full_profile_sweep_shape(tmp_path):
    # Five instances by sixteen schedules plus the baseline: 5 x 17 matrix.
    profile_names = (
        [f"SP_CTE{i}" for i in range(1, 7)]
        + [f"SP_STP{i}" for i in range(1, 7)]
        + [f"SP_PLY{i}" for i in range(1, 5)]
    )
    policies = ["myopic"] + profile_names
    rows = []
    for seed in range(5):
        rows.append(ReportRow(seed, "myopic", 100, 40, 40.0, 300))
        for j, name in enumerate(profile_names):
            rows.append(ReportRow(seed, name, 100, 40, 40.0, 310 + j, 10 + j, 3.3, 0, 0.0))
    report = ComparisonReport(rows=rows, interval_profits={}, policies=policies, seeds=list(range(5)))
    emit_heatmap_data(report, tmp_path / "p.csv", tmp_path / "g.csv")
    plines = (tmp_path / "p.csv").read_text().splitlines()
    assert len(plines) == 1 + 5
    assert all(len(line.split(",")) == 1 + 17 for line in plines)


def test_gaps_recomputable_from_raw_profits(tmp_path):
    config = desk_test_config(tmp_path, policies=("myopic", "SP_CTE5:uniform"), seeds=(0, 1))
    report = run_experiment(config)
    out = write_reports(config, report)
    loaded = load_results_csv(out / "results.csv")
    recompute_gaps(loaded)
    for row in report.rows:
        again = loaded.row(row.seed, row.policy)
        if row.profit_gap is None:
            assert again.profit_gap is None
        else:
            assert again.profit_gap == row.profit_gap
            assert abs(again.profit_gap_pct - row.profit_gap_pct) < 0.1


def test_compare_results_merges(tmp_path):
    config = desk_test_config(tmp_path, policies=("myopic", "SP_CTE5:uniform"), seeds=(0,))
    out = write_reports(config, run_experiment(config))
    merged = compare_results([out / "results.csv"], tmp_path / "cmp", figures=False)
    assert (tmp_path / "cmp" / "comparison.csv").exists()
    assert merged.mean_gap_pct("SP_CTE5:uniform") == pytest.approx(
        [r.profit_gap_pct for r in merged.rows if r.policy != "myopic"][0]
    )


def test_manifest_echoes_config(tmp_path):
    config = desk_test_config(tmp_path)
    out = write_reports(config, run_experiment(config))
    manifest = (out / "manifest.txt").read_text()
    assert "rate = 3" in manifest
    assert "intervals = 3" in manifest
    assert "node_limit = 3000" in manifest


def test_figures_rendered_when_enabled(tmp_path):
    config = desk_test_config(tmp_path, policies=("myopic", "SP_CTE5:uniform"), figures=True)
    out = write_reports(config, run_experiment(config))
    assert (out / "interval_profits.png").stat().st_size > 0
    assert (out / "heatmap.png").stat().st_size > 0


def test_model_required_for_learned_priorities(tmp_path):
    config = desk_test_config(tmp_path, policies=("SP_CTE2",))
    with pytest.raises(HarnessError, match="--model"):
        run_experiment(config)
