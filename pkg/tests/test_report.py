# tests/test_report.py
from __future__ import annotations

import json

import pytest

from senres.errors import ConfigError, FormatError, ParseError
from senres.manifest import RepetitionOut, RunManifest
from senres.report import build_report, render_report


def _manifest(method: str, scores, fraction=0.1, reps=None) -> RunManifest:
    m = RunManifest(
        kind="linear",
        method=method,
        config={"evaluation": {"repetitions": len(scores) if reps is None else reps}},
        seed=0,
        label_fraction=fraction,
    )
    m.repetitions = [RepetitionOut(i, 100 + i, s, 10, 90) for i, s in enumerate(scores)]
    return m


BASE = [0.50, 0.52, 0.49, 0.51, 0.50, 0.53, 0.48, 0.50, 0.52, 0.51]
BETTER = [s + 0.05 + i / 1000 for i, s in enumerate(BASE)]


def test_manifest_round_trip(tmp_path):
    m = _manifest("simclr", BASE)
    m.epoch_losses = [2.0, 1.5]
    m.notes.append("hello")
    back = RunManifest.load(m.save(tmp_path / "run" / "manifest.json"))
    assert back == m
    assert back.scores == BASE
    assert back.run_id == m.run_id
    assert m.versions["senres"]


def test_run_id_depends_on_config():
    a = RunManifest("pretrain", "simclr", {"x": 1}, 0)
    assert a.run_id == RunManifest("pretrain", "simclr", {"x": 1}, 0).run_id
    assert a.run_id != RunManifest("pretrain", "simclr", {"x": 2}, 0).run_id


def test_manifest_load_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{")
    with pytest.raises(ParseError):
        RunManifest.load(p)
    p.write_text(json.dumps({"kind": "linear"}))
    with pytest.raises(FormatError, match="method"):
        RunManifest.load(p)
    with pytest.raises(FormatError):
        RunManifest.load(tmp_path / "missing.json")


def test_manifest_check_repetition_count():
    _manifest("a", BASE).check()
    with pytest.raises(ConfigError):
        _manifest("a", BASE, reps=5).check()


def test_build_report_against_baseline():
    reports = build_report([_manifest("simclr", BETTER), _manifest("supervised", BASE)], "supervised")
    assert [r.method for r in reports] == ["supervised", "simclr"]
    base, simclr = reports
    assert base.verdict == "" and base.comparison is None
    assert simclr.versus == "supervised"
    assert simclr.verdict == "s+"
    assert simclr.comparison.p == pytest.approx(2 / 1024)
    assert simclr.summary.n == 10


def test_render_report():
    reports = build_report([_manifest("simclr", BETTER), _manifest("supervised", BASE)], "supervised")
    text = render_report(reports)
    assert "10%" in text
    assert "(s+)" in text
    assert "supervised" in text and "simclr" in text


def test_report_errors():
    base = _manifest("supervised", BASE)
    with pytest.raises(ConfigError, match="baseline"):
        build_report([_manifest("simclr", BETTER)], "supervised")
    with pytest.raises(ConfigError):
        build_report([base, _manifest("supervised", BASE)], "supervised")
    with pytest.raises(ConfigError):
        build_report([base, _manifest("simclr", BETTER[:5])], "supervised")
    with pytest.raises(ConfigError):
        build_report([base, _manifest("simclr", BETTER, fraction=0.01)], "supervised")
    with pytest.raises(ConfigError):
        build_report([base, _manifest("simclr", [])], "supervised")


def test_identical_runs_are_not_significant():
    reports = build_report([_manifest("a", BASE), _manifest("b", BASE)], "a")
    assert reports[1].comparison.p == 1.0
    assert reports[1].verdict == "+"
