"""Evaluation metrics over prediction sets and argmax predictions.

All metrics reduce over test pixels only.  Coverage is the fraction of test
pixels whose set contains the true label; size is the mean set cardinality;
the size-stratified coverage violation (on a 0-100 scale) is the worst
deviation of within-bin coverage from the nominal level across set-size
bins with enough members.  Overall accuracy weights pixels equally; average
accuracy weights classes equally (mean per-class recall over classes that
appear among the test labels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTestSet, InvalidConfig, InvariantViolation, ShapeMismatch
from .grids import LabelGrid, PredictionSetGrid, ProbabilityGrid, Role, SplitMask

DEFAULT_MIN_BIN_COUNT = 10

# Size-bin template, clamped to the actual number of classes.
_BIN_TEMPLATE = ((0, 1), (2, 3), (4, 6), (7, 10), (11, None))


@dataclass(frozen=True)
class MetricReport:
    """One evaluation's metrics, JSON-serializable with stable key order.

    ``per_bin`` holds ``(bin_label, member_count, bin_coverage)`` for every
    size bin; coverage is ``None`` for empty bins.
    """

    coverage: float
    mean_size: float
    sscv: float
    oa: float
    aa: float
    per_bin: tuple

    def to_dict(self) -> dict:
        return {
            "coverage": float(self.coverage),
            "mean_size": float(self.mean_size),
            "sscv": float(self.sscv),
            "oa": float(self.oa),
            "aa": float(self.aa),
            "per_bin": [
                {
                    "bin": name,
                    "count": int(count),
                    "coverage": None if cov is None else float(cov),
                }
                for name, count, cov in self.per_bin
            ],
        }


def default_size_bins(num_classes: int) -> tuple:
    """Partition of possible set sizes ``{0..K}`` into conventional bins."""
    bins = []
    for lo, hi in _BIN_TEMPLATE:
        if lo > num_classes:
            break
        hi = num_classes if hi is None else min(hi, num_classes)
        bins.append((lo, hi))
    return tuple(bins)


def _test_selector(labels: LabelGrid, mask: SplitMask, sets: PredictionSetGrid | None) -> np.ndarray:
    shape = mask.roles.shape
    if labels.labels.shape != shape:
        raise ShapeMismatch("labels and mask must share one shape")
    test = mask.where(Role.TEST)
    if not np.count_nonzero(test):
        raise EmptyTestSet("split mask assigns no test pixels")
    unlabeled = test & ~labels.labeled
    if unlabeled.any():
        r, c = (int(i) for i in np.argwhere(unlabeled)[0])
        raise InvariantViolation(f"test pixel ({r}, {c}) has no label")
    if sets is not None:
        if sets.membership.shape[:2] != shape:
            raise ShapeMismatch("prediction sets and mask must share one shape")
        undefined = test & ~sets.defined
        if undefined.any():
            r, c = (int(i) for i in np.argwhere(undefined)[0])
            raise InvariantViolation(f"test pixel ({r}, {c}) has no prediction set")
    return test


def coverage(sets: PredictionSetGrid, labels: LabelGrid, mask: SplitMask) -> float:
    """Fraction of test pixels whose set contains the true label."""
    test = _test_selector(labels, mask, sets)
    covered = int(np.count_nonzero(sets.contains(labels) & test))
    return covered / int(np.count_nonzero(test))


def mean_size(sets: PredictionSetGrid, mask: SplitMask) -> float:
    """Mean prediction-set cardinality over test pixels."""
    test = mask.where(Role.TEST)
    n_test = int(np.count_nonzero(test))
    if n_test == 0:
        raise EmptyTestSet("split mask assigns no test pixels")
    undefined = test & ~sets.defined
    if undefined.any():
        r, c = (int(i) for i in np.argwhere(undefined)[0])
        raise InvariantViolation(f"test pixel ({r}, {c}) has no prediction set")
    return float(sets.sizes()[test].sum()) / n_test


def size_stratified_bins(
    sets: PredictionSetGrid,
    labels: LabelGrid,
    mask: SplitMask,
    bins: tuple | None = None,
) -> tuple:
    """Per-bin ``(label, count, coverage)`` over test pixels, by set size."""
    test = _test_selector(labels, mask, sets)
    num_classes = sets.num_classes
    if bins is None:
        bins = default_size_bins(num_classes)
    _check_bins(bins, num_classes)
    sizes = sets.sizes()[test]
    hits = (sets.contains(labels) & test)[test]
    rows = []
    for lo, hi in bins:
        members = (sizes >= lo) & (sizes <= hi)
        count = int(np.count_nonzero(members))
        cov = None if count == 0 else int(np.count_nonzero(hits[members])) / count
        rows.append((f"{lo}-{hi}", count, cov))
    return tuple(rows)


def sscv(
    sets: PredictionSetGrid,
    labels: LabelGrid,
    mask: SplitMask,
    alpha: float,
    bins: tuple | None = None,
    min_bin_count: int = DEFAULT_MIN_BIN_COUNT,
) -> float:
    """Size-stratified coverage violation, in percent points.

    ``100 * max`` over size bins with at least ``min_bin_count`` test pixels
    of ``|(1 - alpha) - bin coverage|``; 0 when no bin qualifies.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must be in (0, 1), got {alpha}")
    if min_bin_count < 1:
        raise InvalidConfig(f"min_bin_count must be >= 1, got {min_bin_count}")
    worst = 0.0
    qualified = False
    for _, count, cov in size_stratified_bins(sets, labels, mask, bins):
        if count >= min_bin_count:
            qualified = True
            worst = max(worst, abs((1.0 - alpha) - cov))
    return 100.0 * worst if qualified else 0.0


def oa_aa(probs: ProbabilityGrid, labels: LabelGrid, mask: SplitMask) -> tuple[float, float]:
    """Overall accuracy and average (per-class) accuracy of argmax predictions."""
    test = _test_selector(labels, mask, None)
    if probs.values.shape[:2] != mask.roles.shape:
        raise ShapeMismatch("probability grid and mask must share one shape")
    labels.check_classes(probs.num_classes)
    predicted = probs.values.argmax(axis=2)
    truth = labels.labels[test]
    correct = predicted[test] == truth
    oa = float(np.count_nonzero(correct)) / truth.size
    recalls = [
        float(np.count_nonzero(correct & (truth == cls))) / np.count_nonzero(truth == cls)
        for cls in np.unique(truth)
    ]
    return oa, float(np.mean(recalls))


def compute_metrics(
    sets: PredictionSetGrid,
    probs: ProbabilityGrid,
    labels: LabelGrid,
    mask: SplitMask,
    alpha: float,
    bins: tuple | None = None,
    min_bin_count: int = DEFAULT_MIN_BIN_COUNT,
) -> MetricReport:
    """Bundle all five metrics for one prediction-set grid."""
    per_bin = size_stratified_bins(sets, labels, mask, bins)
    oa, aa = oa_aa(probs, labels, mask)
    return MetricReport(
        coverage=coverage(sets, labels, mask),
        mean_size=mean_size(sets, mask),
        sscv=sscv(sets, labels, mask, alpha, bins, min_bin_count),
        oa=oa,
        aa=aa,
        per_bin=per_bin,
    )


def _check_bins(bins: tuple, num_classes: int) -> None:
    if not bins:
        raise InvalidConfig("size bins must be non-empty")
    expected_lo = 0
    for lo, hi in bins:
        if lo != expected_lo or hi < lo:
            raise InvalidConfig(f"size bins must partition 0..{num_classes}, got {bins}")
        expected_lo = hi + 1
    if expected_lo != num_classes + 1:
        raise InvalidConfig(f"size bins must partition 0..{num_classes}, got {bins}")
