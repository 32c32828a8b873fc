# src/senres/doctor.py
from __future__ import annotations

import importlib
import os
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, List

import numpy as np

# grad self-check tolerance (64-bit, h=1e-5)
GRAD_TOL = 1e-4

REQUIRED = ("numpy", "scipy", "pandas", "joblib", "typer")


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


Check = Callable[[], CheckResult]


def _guarded(name: str) -> Callable[[Callable[[], str]], Check]:
    """Wrap a check body returning a detail string; any exception becomes a failed check."""

    def wrap(body: Callable[[], str]) -> Check:
        def check() -> CheckResult:
            try:
                return CheckResult(name, True, body())
            except Exception as e:
                return CheckResult(name, False, f"{type(e).__name__}: {e}")

        check.__name__ = f"check_{name}"
        return check

    return wrap


@_guarded("python")
def check_python() -> str:
    if sys.version_info < (3, 10):
        raise RuntimeError(f"{sys.version.split()[0]} (<3.10)")
    return sys.version.split()[0]


@_guarded("senres_cli")
def check_cli() -> str:
    p = subprocess.run([sys.executable, "-m", "senres", "--version"], capture_output=True, text=True, timeout=120)
    if p.returncode or not p.stdout.strip():
        raise RuntimeError(p.stderr.strip() or "version check failed")
    return p.stdout.strip()


def _import_check(module: str) -> Check:
    @_guarded(module)
    def body() -> str:
        return str(getattr(importlib.import_module(module), "__version__", "ok"))

    return body


@_guarded("gradients")
def check_gradients() -> str:
    """Tape gradients of a tiny tanh layer against central differences."""
    from . import tensor as tn

    rng = np.random.default_rng(0)
    x, w = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))

    def f(a: tn.Tensor, b: tn.Tensor) -> tn.Tensor:
        h = tn.tanh(tn.matmul(a, b))
        return tn.tsum(h * h)

    err = tn.grad_check(f, x, w)
    if err >= GRAD_TOL:
        raise RuntimeError(f"max rel err {err:.2e} >= {GRAD_TOL:g}")
    return f"max rel err {err:.2e}"


@_guarded("resample")
def check_resample() -> str:
    from .augment import ResampleParams, Window, resample

    w = Window(np.random.default_rng(1).normal(size=(32, 3)))
    out = resample(w, ResampleParams(M=2, N=1), np.random.default_rng(2))
    if out.data.shape != w.data.shape or not np.isfinite(out.data).all():
        raise RuntimeError(f"bad output shape {out.data.shape}")
    return "shape and finiteness ok"


@_guarded("swnd")
def check_swnd() -> str:
    from .swnd import read_swnd, write_swnd
    from .synthetic import synthetic_windowset

    ws = synthetic_windowset(n_per_class=2, T=8, C=3, seed=0)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "roundtrip.swnd"
        write_swnd(ws, path)
        back = read_swnd(path)
    if len(back) != len(ws) or not np.array_equal(back.data, ws.data):
        raise RuntimeError("read back differs from what was written")
    return f"{len(ws)} windows"


def _scripts(root: Path) -> Iterator[Path]:
    d = root / "scripts"
    if d.is_dir():
        yield from (p for p in sorted(d.glob("test_*")) if p.is_file() and os.access(p, os.X_OK))


def run_scripts() -> List[CheckResult]:
    # src/senres/doctor.py -> repo root
    root = Path(__file__).resolve().parents[2]
    env = {**os.environ, "SENRES_BIN": shutil.which("senres") or "senres"}
    results: List[CheckResult] = []
    for script in _scripts(root):
        t0 = time.monotonic()
        p = subprocess.run([str(script)], cwd=root, env=env, capture_output=True, text=True, timeout=900)
        took = f"{time.monotonic() - t0:.2f}s"
        if p.returncode == 0:
            results.append(CheckResult(f"script:{script.name}", True, took))
        else:
            tail = "\n".join((p.stderr or p.stdout).splitlines()[-20:])
            results.append(CheckResult(f"script:{script.name}", False, f"{took} | {tail}"))
    return results


def run(verbose: bool = False, scripts: bool = True) -> int:
    checks: List[Check] = [
        check_python,
        check_cli,
        *map(_import_check, REQUIRED),
        check_gradients,
        check_resample,
        check_swnd,
    ]
    results = [c() for c in checks] + (run_scripts() if scripts else [])
    for r in results:
        shown = f": {r.detail}" if (verbose or not r.ok) and r.detail else ""
        print(f"{'✔' if r.ok else '✖'} {r.name}{shown}")
    healthy = all(r.ok for r in results)
    print("OK" if healthy else "FAIL")
    return 0 if healthy else 1
