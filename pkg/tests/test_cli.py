# tests/test_cli.py
from __future__ import annotations

import json

import pytest
from typer.testing import CliRunner

from senres import io as sio
from senres.app import app
from senres.errors import EXIT_NUMERIC, EXIT_USER, NumericError
from senres.manifest import RunManifest
from senres.swnd import read_swnd

runner = CliRunner()

TINY = {"encoder": {"conv_layers": 1, "filters": 3, "kernel": 3, "lstm_layers": 1, "hidden": 4, "dropout": 0.0}}


@pytest.fixture(autouse=True)
def plain_output():
    sio.configure(verbosity="normal", color="never", json_mode=False, timestamps=False)
    yield
    sio.configure(verbosity="normal", json_mode=False)


@pytest.fixture
def workspace(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    res = runner.invoke(app, ["synth", "--out", str(tmp_path / "w.swnd"), "--n-per-class", "12",
                              "--T", "16", "--C", "6", "--classes", "3", "--subjects", "3", "--seed", "1"])
    assert res.exit_code == 0, res.output
    return tmp_path


def test_version():
    res = runner.invoke(app, ["--version"])
    assert res.exit_code == 0
    assert res.output.startswith("senres ")


def test_synth_json(tmp_path):
    res = runner.invoke(app, ["--json", "synth", "--out", str(tmp_path / "s.swnd"),
                              "--n-per-class", "2", "--T", "8", "--C", "3"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.stdout)
    assert doc["windows"] == 6
    assert read_swnd(tmp_path / "s.swnd").provenance["swnd_sha256"] == doc["sha256"]


def test_augment_times(workspace):
    out = workspace / "a.swnd"
    res = runner.invoke(app, ["augment", "--in", str(workspace / "w.swnd"), "--out", str(out),
                              "--kind", "resample", "--M", "1", "--N", "0", "--times", "2"])
    assert res.exit_code == 0, res.output
    assert len(read_swnd(out)) == 3 * 36


def test_augment_needs_a_spec(workspace):
    res = runner.invoke(app, ["augment", "--in", str(workspace / "w.swnd"), "--out", str(workspace / "a.swnd")])
    assert res.exit_code == EXIT_USER
    assert "error:" in res.output


def test_pretrain_eval_report(workspace):
    w, cfg = str(workspace / "w.swnd"), str(workspace / "tiny.json")
    run = workspace / "run"
    res = runner.invoke(app, ["pretrain", "--data", w, "--config", cfg, "--out-dir", str(run),
                              "--epochs", "1", "--batch-size", "8"])
    assert res.exit_code == 0, res.output
    assert (run / "encoder.sprm").is_file()
    pre = RunManifest.load(run / "manifest.json")
    assert pre.kind == "pretrain" and len(pre.epoch_losses) == 1

    common = ["--data", w, "--label-fraction", "0.5", "--repeats", "2", "--epochs", "2", "--batch-size", "8"]
    res = runner.invoke(app, ["eval", *common, "--protocol", "linear",
                              "--checkpoint", str(run / "encoder.sprm"), "--out", str(workspace / "lin.json")])
    assert res.exit_code == 0, res.output
    lin = RunManifest.load(workspace / "lin.json")
    assert lin.method.endswith("/linear")
    assert len(lin.scores) == 2

    res = runner.invoke(app, ["eval", *common, "--protocol", "supervised", "--config", cfg,
                              "--out", str(workspace / "sup.json")])
    assert res.exit_code == 0, res.output

    res = runner.invoke(app, ["report", str(workspace / "lin.json"), str(workspace / "sup.json"),
                              "--baseline", "supervised"])
    assert res.exit_code == 0, res.output
    assert "50%" in res.output
    assert "supervised" in res.output

    res = runner.invoke(app, ["report", str(workspace / "lin.json"), "--baseline", "moco"])
    assert res.exit_code == EXIT_USER


def test_eval_random_init_baseline(workspace):
    res = runner.invoke(app, ["eval", "--data", str(workspace / "w.swnd"), "--config", str(workspace / "tiny.json"),
                              "--protocol", "linear", "--random-init", "--label-fraction", "0.5",
                              "--repeats", "1", "--epochs", "1", "--out", str(workspace / "r.json")])
    assert res.exit_code == 0, res.output
    assert RunManifest.load(workspace / "r.json").method == "random-init/linear"


def test_user_errors_exit_2(workspace):
    res = runner.invoke(app, ["eval", "--data", str(workspace / "missing.swnd"), "--protocol", "supervised"])
    assert res.exit_code == EXIT_USER
    assert "does not exist" in res.output
    res = runner.invoke(app, ["eval", "--data", str(workspace / "w.swnd"), "--protocol", "linear"])
    assert res.exit_code == EXIT_USER
    bad = workspace / "bad.swnd"
    bad.write_bytes(b"SWND")
    res = runner.invoke(app, ["augment", "--in", str(bad), "--out", str(workspace / "x.swnd"), "--kind", "invert"])
    assert res.exit_code == EXIT_USER


def test_numeric_error_exit_3(workspace, monkeypatch):
    import senres.contrastive

    def boom(*args, **kwargs):
        raise NumericError("non-finite training loss (nan)", epoch=1)

    monkeypatch.setattr(senres.contrastive, "pretrain", boom)
    res = runner.invoke(app, ["pretrain", "--data", str(workspace / "w.swnd"), "--config", str(workspace / "tiny.json"),
                              "--out-dir", str(workspace / "run"), "--epochs", "1"])
    assert res.exit_code == EXIT_NUMERIC
    assert "epoch 1" in res.output


def test_config_command(tmp_path):
    res = runner.invoke(app, ["config", "--profile", "desk", "--framework", "moco", "--seed", "5"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.stdout)
    assert doc["profile"] == "desk"
    assert doc["framework"]["framework"] == "moco"
    assert doc["seed"] == 5


def test_unopenable_log_file_is_a_user_error(tmp_path):
    res = runner.invoke(app, ["--log", str(tmp_path / "no-such-dir" / "run.log"), "config"])
    assert res.exit_code == EXIT_USER
    assert "cannot open log file" in res.output
