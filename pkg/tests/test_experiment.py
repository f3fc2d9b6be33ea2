import json
import logging

import numpy as np
import pytest
from builders import synthetic_record

from ipbnn import bnn
from ipbnn.cli import main
from ipbnn.experiment import (
    ConfigError,
    ExperimentConfig,
    RecordError,
    analyze,
    expand_preset,
    load_config,
    read_run_dir,
    read_run_record,
    run_experiment,
    write_run_record,
)
from ipbnn.plots import plot_compression_scatter, plot_ip, plot_mi_accuracy


def tiny_config(**kw) -> dict:
    cfg = {
        "dataset": {"name": "szt_standin"},
        "architecture": [5, 3],
        "lambdas": [0, 0.5],
        "learning_rate": 1e-3,
        "batch_size": 128,
        "epochs": 4,
        "runs": 2,
        "seed": 0,
        "window": 2,
    }
    cfg.update(kw)
    return cfg


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    paths = run_experiment(ExperimentConfig.from_dict(tiny_config()), out)
    return out, paths


# --- configuration ---------------------------------------------------------------


def test_presets_expand_exactly():
    assert expand_preset("szt") == (10, 8, 6, 4)
    assert expand_preset("raj_like") == (1024, 20, 20, 20, 10)
    assert expand_preset("small_bnn") == (50, 10, 10)
    for a in (2, 4, 6, 8, 10):
        assert expand_preset("hourglass", {"A": a}) == (1024, 20, 10, a, 10, 20, 10)
        assert expand_preset("bottleneck", {"A": a}) == (1024, 20, 10, a, 10)


def test_preset_errors():
    with pytest.raises(ConfigError):
        expand_preset("lenet5")
    with pytest.raises(ConfigError):
        expand_preset("hourglass")
    with pytest.raises(ConfigError):
        expand_preset("hourglass", {"A": 3})
    with pytest.raises(ConfigError):
        expand_preset("szt", {"A": 2})


def test_config_rejects_unknown_fields():
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict(tiny_config(momentum=0.9))
    bad = tiny_config()
    bad["dataset"] = {"name": "szt_standin", "colour": "red"}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


@pytest.mark.parametrize("change", [
    {"lambdas": [0.3]}, {"epochs": 0}, {"stride": 0}, {"learning_rate": -1.0},
    {"architecture": [4, 0]}, {"dataset": {"name": "cifar10"}},
    {"dataset": {"name": "szt_standin", "validation_fraction": 1.0}},
])
def test_config_validation(change):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(tiny_config(**change))


def test_config_hash_and_overrides(tmp_path):
    cfg = ExperimentConfig.from_dict(tiny_config())
    path = tmp_path / "c.json"
    path.write_text(json.dumps(tiny_config()))
    assert load_config(path).config_hash() == cfg.config_hash()
    other = cfg.with_overrides(seed=5, stride=None)
    assert other.seed == 5 and other.stride == cfg.stride
    assert other.config_hash() != cfg.config_hash()
    assert cfg.seeds == [0, 1]
    assert ExperimentConfig.from_dict(tiny_config(architecture="bottleneck",
                                                  variant={"A": 4})).group_name == "bottleneck_A4"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


# --- running ------------------------------------------------------------------------


def test_run_experiment_writes_one_log_per_cell(tiny_runs):
    out, paths = tiny_runs
    assert [p.name for p in paths] == [
        "szt_standin_custom_5-3_wd0_s0.jsonl", "szt_standin_custom_5-3_wd0_s1.jsonl",
        "szt_standin_custom_5-3_wd0p5_s0.jsonl", "szt_standin_custom_5-3_wd0p5_s1.jsonl"]
    rec = read_run_record(paths[0])
    assert rec.header["layer_widths"] == [5, 3]
    assert rec.header["layer_offsets"] == [-2, -1]
    assert rec.header["regime_flags"] == [True, True]
    assert rec.header["sample_count"] == 819
    assert [e.epoch for e in rec.epochs] == [1, 2, 3, 4]
    for e in rec.epochs:
        assert [lay["offset"] for lay in e.layers] == [-2, -1]
        for lay in e.layers:
            assert 0.0 <= lay["mi_ty"] <= min(lay["mi_xt"], 1.0) + 1e-12
            assert lay["mi_xt"] <= 5.0 + 1e-12


def test_rerun_is_byte_identical(tiny_runs, tmp_path):
    out, paths = tiny_runs
    again = run_experiment(ExperimentConfig.from_dict(tiny_config()), tmp_path)
    for a, b in zip(paths, again):
        assert a.read_bytes() == b.read_bytes()


def test_single_epoch_gives_single_record(tmp_path):
    cfg = ExperimentConfig.from_dict(tiny_config(epochs=1, runs=1, lambdas=[0]))
    (path,) = run_experiment(cfg, tmp_path)
    assert len(read_run_record(path).epochs) == 1


def test_stride_records_every_sth_epoch(tmp_path):
    cfg = ExperimentConfig.from_dict(tiny_config(epochs=7, stride=3, runs=1, lambdas=[0]))
    (path,) = run_experiment(cfg, tmp_path)
    assert [e.epoch for e in read_run_record(path).epochs] == [3, 6]


def test_estimation_runs_in_eval_mode(tmp_path, monkeypatch):
    seen = []
    real = bnn.evaluate

    def spy(model, x, y):
        seen.append(model.training)
        return real(model, x, y)

    monkeypatch.setattr(bnn, "evaluate", spy)
    run_experiment(ExperimentConfig.from_dict(tiny_config(epochs=2, runs=1, lambdas=[0])),
                   tmp_path)
    assert seen == [False, False]


def test_mnist_train_subset(mnist_dir, tmp_path):
    cfg = ExperimentConfig.from_dict({
        "dataset": {"name": "mnist", "dir": str(mnist_dir), "train_subset": 512},
        "architecture": "small_bnn", "epochs": 1, "runs": 1, "learning_rate": 1e-3,
    })
    (path,) = run_experiment(cfg, tmp_path)
    rec = read_run_record(path)
    assert rec.header["sample_count"] == 10000
    assert rec.header["regime_flags"] == [False, True, True]


# --- records ----------------------------------------------------------------------


def test_record_roundtrip_is_lossless(tiny_runs, tmp_path):
    _, paths = tiny_runs
    rec = read_run_record(paths[1])
    write_run_record(rec, tmp_path / "copy.jsonl")
    assert (tmp_path / "copy.jsonl").read_bytes() == paths[1].read_bytes()
    back = read_run_record(tmp_path / "copy.jsonl")
    assert back.trajectories() == rec.trajectories()


def test_corrupt_records(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(RecordError):
        read_run_record(tmp_path / "empty.jsonl")
    (tmp_path / "bad.jsonl").write_text('{"run_id": "x"}\n{"epoch": 1}\n')
    with pytest.raises(RecordError):
        read_run_record(tmp_path / "bad.jsonl")
    (tmp_path / "junk.jsonl").write_text("nope\n")
    with pytest.raises(RecordError):
        read_run_record(tmp_path / "junk.jsonl")
    with pytest.raises(RecordError):
        read_run_dir(tmp_path / "nothing")


# --- analysis over directories -----------------------------------------------------


def grid_of_records(tmp_path, lambdas=(0, 0.1, 0.2, 0.5, 0.7, 1, 1.1, 1.2, 1.5, 1.7, 2),
                    seeds=(0, 1, 2)):
    k = 0
    for lam in lambdas:
        for seed in seeds:
            k += 1
            mi = [10.0] + [10.0 - 0.01 * k] * 59
            rec = synthetic_record(f"r{k:02d}", lam, seed, {-2: [12.0] * 60, -1: mi},
                                   [50.0 + k] * 60, widths={-2: 12, -1: 10})
            write_run_record(rec, tmp_path / f"r{k:02d}.jsonl")
    return k


def test_analyze_33_runs(tmp_path):
    runs = tmp_path / "runs"
    runs.mkdir()
    assert grid_of_records(runs) == 33
    summaries, rows = analyze(runs, tmp_path / "out")
    assert len(summaries) == 33
    # the width-12 layer is constant, so only layer -1 has a defined correlation
    assert rows == [["synthetic", "g", -1, 33, -1.0, rows[0][5]]]
    assert rows[0][5] < 1e-10
    summary = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 66
    flags = {line.split(",")[6]: line.split(",")[7] for line in summary[1:]}
    assert flags == {"12": "false", "10": "true"}


def test_analyze_single_run_skips_correlation(tmp_path, caplog):
    runs = tmp_path / "runs"
    runs.mkdir()
    grid_of_records(runs, lambdas=(0,), seeds=(0,))
    with caplog.at_level(logging.WARNING):
        summaries, rows = analyze(runs, tmp_path / "out")
    assert len(summaries) == 1 and rows == []
    assert "need at least 3" in caplog.text
    assert len((tmp_path / "out" / "correlation.csv").read_text().splitlines()) == 1


# --- plots ---------------------------------------------------------------------------


def test_plot_ip_layers_and_errors(tmp_path):
    rec = synthetic_record("a", 0.0, 0, {-2: [8.0, 7.0, 6.0], -1: [5.0, 4.0, 3.5]},
                           [50.0, 60.0, 70.0])
    fig = plot_ip(rec, [-2, -1], tmp_path / "ip.svg")
    svg = (tmp_path / "ip.svg").read_text()
    assert svg.startswith("<svg") and "layer -2" in svg and "layer -1" in svg
    assert "log2(10)" in svg and "I(X;T) [bits]" in svg
    assert svg.count("<circle") == 6
    assert svg.count("<polyline") == 2
    assert fig.to_svg() == svg
    with pytest.raises(KeyError):
        plot_ip(rec, [-3], tmp_path / "x.svg")
    one = synthetic_record("b", 0.0, 0, {-1: [2.0]}, [50.0])
    plot_ip(one, [-1], tmp_path / "one.svg")
    assert (tmp_path / "one.svg").read_text().count("<circle") == 1


def test_plot_compression_scatter(tmp_path):
    recs = [synthetic_record(f"r{i}", lam, 0, {-1: [10.0] + [6.0] * 9}, [50.0] * 10)
            for i, lam in enumerate([0.0, 0.5, 2.0])]
    plot_compression_scatter([r.summary() for r in recs], tmp_path / "c.svg")
    svg = (tmp_path / "c.svg").read_text()
    assert svg.count("<circle") == 3
    for lam in ("lambda=0", "lambda=0.5", "lambda=2"):
        assert lam in svg
    with pytest.raises(ValueError):
        plot_compression_scatter([], tmp_path / "none.svg")


def test_plot_mi_accuracy(tmp_path):
    accs = {0.0: 80.0, 0.5: 90.0, 2.0: 70.0}
    recs = [synthetic_record(f"r{i}", lam, 0, {-1: [5.0] * 4}, [acc] * 4)
            for i, (lam, acc) in enumerate(accs.items())]
    plot_mi_accuracy([r.summary() for r in recs], -1, tmp_path / "m.svg")
    svg = (tmp_path / "m.svg").read_text()
    assert svg.count("<circle") == 6 and "accuracy [%]" in svg
    with pytest.raises(KeyError):
        plot_mi_accuracy([r.summary() for r in recs], -4, tmp_path / "x.svg")


# --- CLI -------------------------------------------------------------------------------


def test_cli_bench_entropy(tmp_path, capsys):
    assert main(["bench-entropy", "--n", "1000", "--reps", "3", "--p", "0.5,0.7,0.9",
                 "--dmax", "20", "--out", str(tmp_path / "a.csv"),
                 "--plot", str(tmp_path / "a.svg")]) == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert len(lines) == 61
    assert (tmp_path / "a.svg").read_text().count("<polyline") == 6
    assert main(["bench-entropy", "--dmax", "1", "--reps", "2"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 4
    for name in ("b.csv", "c.csv"):
        main(["bench-entropy", "--seed", "7", "--reps", "2", "--dmax", "4",
              "--out", str(tmp_path / name)])
    assert (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_cli_invalid_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench-entropy", "--n", "0"])
    assert exc.value.code != 0
    assert main(["bench-entropy", "--p", "1.5", "--reps", "1", "--dmax", "1"]) == 1
    assert main(["bench-entropy", "--dmin", "5", "--dmax", "2"]) == 1
    assert "error: ValueError" in capsys.readouterr().err


def test_cli_train_analyze_plot(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(tiny_config(lambdas=[0, 0.1], runs=2)))
    runs, out = tmp_path / "runs", tmp_path / "out"
    assert main(["train", "--config", str(cfg), "--out", str(runs), "--epochs", "3"]) == 0
    assert len(list(runs.glob("*.jsonl"))) == 4
    assert main(["analyze", "--runs", str(runs), "--out", str(out)]) == 0
    corr = (out / "correlation.csv").read_text().splitlines()
    assert corr[0] == "dataset,group,layer_offset,n,r_s,p_value"
    assert all(line.split(",")[3] == "4" for line in corr[1:])
    for kind in ("ip", "compression", "mi-accuracy"):
        assert main(["plot", "--runs", str(runs), "--kind", kind, "--layer=-1",
                     "--out", str(tmp_path / f"{kind}.svg")]) == 0
    assert main(["plot", "--runs", str(runs), "--kind", "ip", "--layer=-1,-2",
                 "--run-id", "szt_standin_custom_5-3_wd0p1_s1", "--out", str(tmp_path / "x.svg")]) == 0


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(tiny_config(bogus=1)))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 1
    assert "ConfigError" in capsys.readouterr().err
    assert main(["analyze", "--runs", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 1
    assert main(["train", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1
    runs = tmp_path / "runs"
    runs.mkdir()
    write_run_record(synthetic_record("a", 0.0, 0, {-1: [1.0]}, [50.0]), runs / "a.jsonl")
    assert main(["plot", "--runs", str(runs), "--kind", "ip", "--layer=-3",
                 "--out", str(tmp_path / "p.svg")]) == 1
    assert main(["plot", "--runs", str(runs), "--kind", "ip", "--run-id", "zzz",
                 "--out", str(tmp_path / "p.svg")]) == 1
    assert "KeyError" in capsys.readouterr().err


def test_cli_outputs_are_deterministic(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(tiny_config(epochs=2)))
    blobs = []
    for tag in ("a", "b"):
        runs, out = tmp_path / tag / "runs", tmp_path / tag / "out"
        main(["train", "--config", str(cfg), "--out", str(runs)])
        main(["analyze", "--runs", str(runs), "--out", str(out)])
        main(["plot", "--runs", str(runs), "--kind", "ip", "--layer=-2,-1",
              "--out", str(out / "ip.svg")])
        main(["plot", "--runs", str(runs), "--kind", "compression", "--out", str(out / "c.svg")])
        main(["plot", "--runs", str(runs), "--kind", "mi-accuracy", "--out", str(out / "m.svg")])
        files = sorted(p for p in (tmp_path / tag).rglob("*") if p.is_file())
        blobs.append({p.relative_to(tmp_path / tag): p.read_bytes() for p in files})
    assert len(blobs[0]) == 4 + 2 + 3
    assert blobs[0] == blobs[1]
