# src/senres/report.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError
from .io import render_table
from .manifest import RunManifest
from .metrics import ScoreSummary, WilcoxonResult, compare, summarize


@dataclass(frozen=True)
class StatReport:
    method: str
    label_fraction: Optional[float]
    summary: ScoreSummary
    scores: Tuple[float, ...]
    versus: Optional[str] = None
    comparison: Optional[WilcoxonResult] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "label_fraction": self.label_fraction,
            "summary": self.summary.to_dict(),
            "scores": list(self.scores),
            "versus": self.versus,
            "comparison": self.comparison.to_dict() if self.comparison else None,
        }

    @property
    def verdict(self) -> str:
        return self.comparison.verdict if self.comparison else ""


def _index(manifests: Sequence[RunManifest]) -> Dict[Tuple[str, Optional[float]], RunManifest]:
    out: Dict[Tuple[str, Optional[float]], RunManifest] = {}
    for m in manifests:
        m.check()
        if not m.repetitions:
            raise ConfigError(f"manifest {m.run_id} ({m.method}) has no evaluation scores")
        key = (m.method, m.label_fraction)
        if key in out:
            raise ConfigError(f"two manifests for method {m.method!r} at fraction {m.label_fraction}")
        out[key] = m
    return out


def build_report(manifests: Sequence[RunManifest], baseline: str, *, alpha: float = 0.05) -> List[StatReport]:
    """
    One StatReport per (method, label fraction). Non-baseline rows carry the
    paired Wilcoxon verdict against the baseline at the same fraction.
    """
    table = _index(manifests)
    if not any(method == baseline for method, _ in table):
        known = ", ".join(sorted({m for m, _ in table}))
        raise ConfigError(f"baseline {baseline!r} not among the manifests ({known})")
    reports: List[StatReport] = []
    for (method, frac), m in sorted(table.items(), key=lambda kv: (kv[0][0] != baseline, kv[0][0], kv[0][1] or 0.0)):
        scores = tuple(m.scores)
        comparison = None
        versus = None
        if method != baseline:
            base = table.get((baseline, frac))
            if base is None:
                raise ConfigError(f"baseline {baseline!r} has no run at label fraction {frac}")
            if len(base.scores) != len(scores):
                raise ConfigError(
                    f"{method!r} has {len(scores)} repetitions but baseline {baseline!r} has "
                    f"{len(base.scores)} at fraction {frac}"
                )
            comparison = compare(scores, base.scores, alpha)
            versus = baseline
        reports.append(StatReport(method, frac, summarize(scores), scores, versus, comparison))
    return reports


def _frac_label(f: Optional[float]) -> str:
    return "-" if f is None else f"{f * 100:g}%"


def render_report(reports: Sequence[StatReport]) -> str:
    """method × label-fraction table: mean ± half-width (×100) and the verdict against the baseline."""
    fracs = sorted({r.label_fraction for r in reports}, key=lambda f: -1.0 if f is None else f)
    methods: List[str] = []
    for r in reports:
        if r.method not in methods:
            methods.append(r.method)
    cells = {(r.method, r.label_fraction): r for r in reports}
    rows = []
    for method in methods:
        row = [method]
        for f in fracs:
            r = cells.get((method, f))
            if r is None:
                row.append("")
            else:
                row.append(r.summary.render() + (f" ({r.verdict})" if r.verdict else ""))
        rows.append(row)
    return render_table(["method", *(_frac_label(f) for f in fracs)], rows)


__all__ = ["StatReport", "build_report", "render_report"]
