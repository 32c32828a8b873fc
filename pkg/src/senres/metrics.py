# src/senres/metrics.py
from __future__ import annotations

"""
Macro F1, Student-t confidence limits and the paired Wilcoxon signed-rank test.

Verdicts use "+" / "-" for the sign of mean(a − b) and prefix "s" when the
two-sided p-value is below alpha: "+", "-", "s+", "s-".
"""

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata
from scipy.stats import t as student_t

from .errors import InsufficientDataError, InvalidParamsError, ShapeError

EXACT_MAX_N = 20
MIN_PAIRS = 5


# ── F1 ───────────────────────────────────────────────────────────────────────

def confusion_matrix(preds: Sequence[int], labels: Sequence[int], num_classes: int) -> np.ndarray:
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"{p.size} predictions for {y.size} labels")
    for name, arr in (("prediction", p), ("label", y)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise InvalidParamsError(f"{name} ids outside 0..{num_classes - 1}")
    return np.bincount(y * num_classes + p, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def mean_f1(preds: Sequence[int], labels: Sequence[int], num_classes: Optional[int] = None) -> float:
    """Unweighted mean of per-class F1 over the classes present in `labels`."""
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"{p.size} predictions for {y.size} labels")
    if y.size == 0:
        return 0.0
    k = num_classes if num_classes is not None else int(max(y.max(), p.max())) + 1
    f1 = per_class_f1(confusion_matrix(p, y, k))
    return float(f1[np.unique(y)].mean())


# ── confidence limits ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ScoreSummary:
    n: int
    mean: float
    lower: Optional[float] = None
    upper: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def render(self, scale: float = 100.0) -> str:
        if self.lower is None or self.upper is None:
            return f"{self.mean * scale:.2f}"
        return f"{self.mean * scale:.2f} ± {(self.upper - self.mean) * scale:.2f}"


def confidence_limits_95(scores: Sequence[float]) -> Tuple[float, float]:
    """mean ± t(0.975, n−1)·s/√n with the sample standard deviation."""
    x = np.asarray(scores, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise InvalidParamsError(f"confidence limits need at least 2 scores, got {x.size}")
    m = float(x.mean())
    half = float(student_t.ppf(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))
    return m - half, m + half


def summarize(scores: Sequence[float]) -> ScoreSummary:
    x = [float(s) for s in scores]
    if not x:
        raise InsufficientDataError("no scores to summarise")
    if len(x) == 1:
        return ScoreSummary(1, x[0])
    lo, hi = confidence_limits_95(x)
    return ScoreSummary(len(x), float(np.mean(x)), lo, hi)


# ── Wilcoxon ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class WilcoxonResult:
    w_plus: float        # sum of ranks of positive differences
    w_minus: float
    p: float             # two-sided
    n_used: int          # pairs left after dropping zero differences
    mean_diff: float
    verdict: str
    method: str          # exact | normal

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _verdict(mean_diff: float, p: float, alpha: float) -> str:
    sign = "+" if mean_diff >= 0 else "-"
    return ("s" + sign) if p < alpha else sign


def signed_rank_null(doubled_ranks: np.ndarray) -> np.ndarray:
    """
    Null distribution of the doubled positive-rank sum: counts[s] is the number of
    the 2ⁿ sign assignments whose doubled W+ equals s.
    """
    r2 = np.asarray(doubled_ranks, dtype=np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    alpha: float = 0.05,
    *,
    exact_max_n: int = EXACT_MAX_N,
) -> WilcoxonResult:
    """
    Paired two-sided signed-rank test of a against b. Zero differences are
    dropped; ties share average ranks. Exact null for n ≤ exact_max_n, else
    normal approximation with tie and continuity corrections.
    """
    x = np.asarray(a, dtype=np.float64).reshape(-1)
    y = np.asarray(b, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ShapeError(f"paired samples differ in length: {x.size} vs {y.size}")
    diff_all = x - y
    d = diff_all[diff_all != 0]
    n = int(d.size)
    if n < MIN_PAIRS:
        raise InsufficientDataError(f"{n} non-zero paired difference(s); need at least {MIN_PAIRS}")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    mean_diff = float(diff_all.mean())
    if n <= exact_max_n:
        r2 = np.rint(2 * ranks).astype(np.int64)
        counts = signed_rank_null(r2)
        total = int(r2.sum())
        obs = abs(int(r2[d > 0].sum()) * 2 - total)
        s = np.arange(total + 1)
        extreme = np.abs(2 * s - total) >= obs
        p = float(counts[extreme].sum()) / float(2 ** n)
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_counts ** 3) - tie_counts).sum()) / 48.0
        z = max(abs(w_plus - mu) - 0.5, 0.0) / math.sqrt(var) if var > 0 else 0.0
        p = float(2.0 * norm.sf(z))
        method = "normal"
    p = min(1.0, p)
    return WilcoxonResult(w_plus, w_minus, p, n, mean_diff, _verdict(mean_diff, p, alpha), method)


def compare(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> WilcoxonResult:
    """
    Wilcoxon verdict that tolerates degenerate inputs: when too few pairs differ
    the result is reported as not significant (p = 1) instead of raising.
    """
    try:
        return wilcoxon_signed_rank(a, b, alpha)
    except InsufficientDataError:
        x = np.asarray(a, dtype=np.float64)
        y = np.asarray(b, dtype=np.float64)
        if x.shape != y.shape:
            raise ShapeError(f"paired samples differ in length: {x.size} vs {y.size}") from None
        md = float((x - y).mean()) if x.size else 0.0
        return WilcoxonResult(0.0, 0.0, 1.0, int(np.count_nonzero(x - y)), md, _verdict(md, 1.0, alpha), "degenerate")


__all__ = [
    "EXACT_MAX_N", "MIN_PAIRS", "confusion_matrix", "per_class_f1", "mean_f1",
    "ScoreSummary", "confidence_limits_95", "summarize",
    "WilcoxonResult", "signed_rank_null", "wilcoxon_signed_rank", "compare",
]
