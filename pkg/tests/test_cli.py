from droneplan.cli import main
from droneplan.demand import load_instance
from droneplan.harness import bundled_network


def test_gen_writes_instances(tmp_path):
    out = tmp_path / "instances"
    rc = main(
        [
            "gen",
            "--rate", "2",
            "--intervals", "3",
            "--duration", "4",
            "--seeds", "0", "1",
            "--out", str(out),
        ]
    )
    assert rc == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["instance_0.txt", "instance_1.txt"]
    inst = load_instance(out / "instance_0.txt", bundled_network())
    assert inst.intervals == 3


def test_train_then_run_then_compare(tmp_path):
    model_path = tmp_path / "model.knn"
    rc = main(
        [
            "train",
            "--rate", "2",
            "--training-intervals", "6",
            "--virtual-intervals", "2",
            "--k", "3",
            "--seed", "1",
            "--out", str(model_path),
        ]
    )
    assert rc == 0
    assert model_path.exists()

    out = tmp_path / "run"
    rc = main(
        [
            "run",
            "--rate", "2",
            "--intervals", "3",
            "--seeds", "0",
            "--policies", "myopic,SP_CTE5",
            "--model", str(model_path),
            "--node-limit", "2000",
            "--out", str(out),
            "--no-figures",
        ]
    )
    assert rc == 0
    assert (out / "results.csv").exists()
    assert (out / "manifest.txt").exists()

    cmp_out = tmp_path / "cmp"
    rc = main(["compare", str(out / "results.csv"), "--out", str(cmp_out), "--no-figures"])
    assert rc == 0
    assert (cmp_out / "comparison.csv").exists()


def test_config_file_overrides(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("rate = 2\nintervals = 2\nduration = 4\npolicies = myopic\nseeds = 3\n")
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg), "--out", str(out), "--no-figures", "--node-limit", "2000"])
    assert rc == 0
    manifest = (out / "manifest.txt").read_text()
    assert "rate = 2" in manifest
    assert "intervals = 2" in manifest
    assert "seeds = 3" in manifest
