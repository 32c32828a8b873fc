# tests/test_doctor.py
from __future__ import annotations

from senres import doctor


def test_self_checks_pass():
    for check in (doctor.check_python, doctor.check_gradients, doctor.check_resample, doctor.check_swnd):
        r = check()
        assert r.ok, r.detail


def test_failing_check_is_reported():
    @doctor._guarded("boom")
    def body() -> str:
        raise RuntimeError("no luck")

    r = body()
    assert (r.name, r.ok) == ("boom", False)
    assert "no luck" in r.detail
    assert doctor._import_check("senres_no_such_module")().ok is False


def test_gradient_failure_message(monkeypatch):
    import senres.tensor

    monkeypatch.setattr(senres.tensor, "grad_check", lambda *a, **k: 0.5)
    r = doctor.check_gradients()
    assert not r.ok
    assert ">= 0.0001" in r.detail
