# tests/test_metrics.py
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from senres.errors import InsufficientDataError, InvalidParamsError, ShapeError
from senres.metrics import (
    compare,
    confidence_limits_95,
    confusion_matrix,
    mean_f1,
    signed_rank_null,
    summarize,
    wilcoxon_signed_rank,
)


# ── F1 ───────────────────────────────────────────────────────────────────────

def test_perfect_predictions_score_one():
    y = [0, 1, 2, 2, 1, 0]
    assert mean_f1(y, y, 3) == 1.0


def test_mean_f1_worked_example():
    # class 0: 2/3, class 1: 4/5
    assert mean_f1([0, 0, 1, 1], [0, 1, 1, 1], 2) == pytest.approx(11 / 15)


def test_mean_f1_ignores_classes_absent_from_labels():
    assert mean_f1([0, 1], [0, 0], 2) == pytest.approx(2 / 3)


def test_mean_f1_is_invariant_to_relabelling(rng):
    y = rng.integers(0, 4, size=50)
    p = rng.integers(0, 4, size=50)
    perm = np.array([2, 0, 3, 1])
    assert mean_f1(perm[p], perm[y], 4) == pytest.approx(mean_f1(p, y, 4))


def test_confusion_matrix_and_errors():
    cm = confusion_matrix([0, 1, 1], [0, 0, 1], 2)
    assert cm.tolist() == [[1, 1], [0, 1]]
    with pytest.raises(ShapeError):
        mean_f1([0, 1], [0], 2)
    with pytest.raises(InvalidParamsError):
        confusion_matrix([0, 3], [0, 1], 2)


# ── confidence limits ────────────────────────────────────────────────────────

def test_confidence_limits_example():
    lo, hi = confidence_limits_95([1, 2, 3, 4, 5])
    assert (lo + hi) / 2 == pytest.approx(3.0)
    assert hi - 3.0 == pytest.approx(1.963, abs=1e-3)


def test_confidence_limits_degenerate():
    assert confidence_limits_95([0.7, 0.7, 0.7]) == pytest.approx((0.7, 0.7))
    with pytest.raises(InvalidParamsError):
        confidence_limits_95([0.5])


def test_summarize():
    one = summarize([0.8])
    assert one.lower is None and one.render() == "80.00"
    many = summarize([0.8, 0.9])
    assert many.n == 2 and many.lower < 0.85 < many.upper
    with pytest.raises(InsufficientDataError):
        summarize([])


# ── Wilcoxon ─────────────────────────────────────────────────────────────────

def _enumerated_p(d: np.ndarray) -> float:
    ranks = np.argsort(np.argsort(np.abs(d))) + 1
    total = ranks.sum()
    obs = abs(2 * ranks[d > 0].sum() - total)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        w = int(np.dot(signs, ranks))
        hits += abs(2 * w - total) >= obs
    return hits / 2 ** len(d)


def test_five_positive_pairs():
    res = wilcoxon_signed_rank([1.1, 2.2, 3.3, 4.4, 5.5], [1, 2, 3, 4, 5])
    assert res.p == pytest.approx(0.0625)
    assert res.verdict == "+"
    assert (res.w_plus, res.w_minus, res.n_used, res.method) == (15.0, 0.0, 5, "exact")


def test_exact_p_matches_enumeration(rng):
    for _ in range(5):
        a = rng.normal(size=10)
        b = a + rng.normal(scale=0.5, size=10) + 0.3
        d = a - b
        res = wilcoxon_signed_rank(a, b)
        assert res.p == pytest.approx(_enumerated_p(d), abs=1e-12)


def test_null_distribution_counts():
    counts = signed_rank_null(np.array([2, 4, 6]))
    assert counts.sum() == 8
    assert counts[0] == 1 and counts[12] == 1 and counts[6] == 2


def test_wilcoxon_swap_symmetry(rng):
    a, b = rng.normal(size=12), rng.normal(size=12)
    ab, ba = wilcoxon_signed_rank(a, b), wilcoxon_signed_rank(b, a)
    assert ab.p == pytest.approx(ba.p)
    assert (ab.w_plus, ab.w_minus) == (ba.w_minus, ba.w_plus)
    assert ab.verdict.replace("+", "?").replace("-", "+").replace("?", "-") == ba.verdict


def test_significant_verdicts():
    a = np.arange(1.0, 11.0)
    assert wilcoxon_signed_rank(a + 1.0 + a / 100, a).verdict == "s+"
    assert wilcoxon_signed_rank(a, a + 1.0 + a / 100).verdict == "s-"


def test_normal_approximation_for_large_n(rng):
    a = rng.normal(size=30)
    b = a - rng.normal(loc=0.2, scale=1.0, size=30)
    res = wilcoxon_signed_rank(a, b)
    assert res.method == "normal"
    n = 30
    mu = n * (n + 1) / 4
    sd = math.sqrt(n * (n + 1) * (2 * n + 1) / 24)
    z = max(abs(res.w_plus - mu) - 0.5, 0.0) / sd
    assert res.p == pytest.approx(math.erfc(z / math.sqrt(2)), rel=1e-9)


def test_too_few_pairs():
    with pytest.raises(InsufficientDataError):
        wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
    with pytest.raises(ShapeError):
        wilcoxon_signed_rank([1, 2], [1])


def test_compare_degenerate():
    res = compare([0.5] * 10, [0.5] * 10)
    assert (res.p, res.method, res.verdict) == (1.0, "degenerate", "+")
    assert compare([0.6] * 3, [0.5] * 3).verdict == "+"
