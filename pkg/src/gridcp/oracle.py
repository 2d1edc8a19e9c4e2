"""Brute-force oracles for the toolkit's theoretical guarantees.

These routines deliberately favor obviousness over speed and are kept
independent of the main pipeline so the two can check each other:

* the exceedance rate compares every calibration/test score pair explicitly;
* the alpha-integrated set size is evaluated exactly at the breakpoints of
  the piecewise-constant threshold (never by numerical quadrature), and a
  second, direct per-entry formula computes the same quantity for
  cross-checking;
* a closed form ties the integrated size to the exceedance rate, which is
  what makes "smaller sets" equivalent to "fewer exceedances";
* exchangeability of calibration and test scores is checked by a
  two-sample permutation test on the difference of means.

The closed form counts calibration scores non-strictly while the exceedance
rate counts strictly, so the identity holds only on tie-free inputs; exact
cal/test ties trigger a ``TieDetectedWarning`` and shift the two sides apart
by (number of ties)/(n + 1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    EmptyInput,
    InvalidConfig,
    InvariantViolation,
    NonFiniteInput,
    TieDetectedWarning,
    UnlabeledCalPixel,
)
from .grids import LabelGrid, ProbabilityGrid, Role, ScoreField, SplitMask
from .rng import RandomizationField

REL_IDENTITY_TOL = 1e-9

Scorer = Callable[[ProbabilityGrid, SplitMask, RandomizationField], ScoreField]


@dataclass(frozen=True)
class OracleFixture:
    """Everything a score function needs: grid, labels, mask, shared draws."""

    grid: ProbabilityGrid
    labels: LabelGrid
    mask: SplitMask
    rng: RandomizationField


@dataclass(frozen=True)
class OracleReport:
    """Verification quantities, serialized as JSON by the CLI."""

    r_statistic: float
    integral_lhs: float
    integral_rhs_closed_form: float
    permutation_pvalue: float

    @property
    def identity_holds(self) -> bool:
        return abs(self.integral_lhs - self.integral_rhs_closed_form) <= (
            REL_IDENTITY_TOL * abs(self.integral_lhs)
        )

    def to_dict(self) -> dict:
        return {
            "r_statistic": float(self.r_statistic),
            "integral_lhs": float(self.integral_lhs),
            "integral_rhs_closed_form": float(self.integral_rhs_closed_form),
            "permutation_pvalue": float(self.permutation_pvalue),
        }


def _validated(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise NonFiniteInput(f"{name} contains non-finite values")
    return arr


def score_exceedance_rate(cal_scores, test_scores_all_labels) -> float:
    """Fraction of (calibration, test) pairs with cal strictly greater.

    Every pair is compared explicitly; no sorting shortcuts.
    """
    cal = _validated(cal_scores, "cal_scores")
    test = _validated(test_scores_all_labels, "test_scores_all_labels")
    exceed = int(np.count_nonzero(cal[:, None] > test[None, :]))
    return exceed / (cal.size * test.size)


def integrated_set_size(cal_scores, test_scores_all_labels) -> tuple[float, float]:
    """Set-size mass integrated over all coverage levels, two ways.

    The left side sweeps the threshold over its exact breakpoints: as the
    miscoverage level crosses m/(n+1) the threshold steps down to the
    (n+1-m)-th smallest calibration score, so the integral is a finite sum
    of interval widths times set sizes.  The right side is the closed form
    in terms of the exceedance rate.  Both sides equal
    sum over test entries of (1 + #{cal >= entry}) / (1 + n)
    on tie-free inputs.
    """
    cal = _validated(cal_scores, "cal_scores")
    test = _validated(test_scores_all_labels, "test_scores_all_labels")
    _warn_on_ties(cal, test)
    n = cal.size
    sorted_cal = np.sort(cal)

    # m = 0: threshold +inf, every test entry belongs to its set.
    total = test.size
    for m in range(1, n + 1):
        threshold = sorted_cal[n - m]
        total += int(np.count_nonzero(test <= threshold))
    lhs = total / (1 + n)

    rate = score_exceedance_rate(cal, test)
    rhs = (n * test.size / (1 + n)) * rate + test.size / (1 + n)
    return lhs, rhs


def integrated_set_size_direct(cal_scores, test_scores_all_labels) -> float:
    """Same integral by the direct per-entry formula; cross-check route.

    Both this and the sweep accumulate exact integer counts before the one
    division, so they agree bit for bit, not merely approximately.
    """
    cal = _validated(cal_scores, "cal_scores")
    test = _validated(test_scores_all_labels, "test_scores_all_labels")
    counts = np.count_nonzero(cal[:, None] >= test[None, :], axis=0)
    total = int(counts.sum()) + test.size
    return total / (1 + cal.size)


def efficiency_equivalence_check(score_fn_a: Scorer, score_fn_b: Scorer, fixture: OracleFixture) -> bool:
    """Do exceedance rates and integrated sizes rank two scorers identically?

    True iff sign(rate_a - rate_b) equals sign(integral_a - integral_b),
    including the case where both differences vanish.  This is the
    equivalence that justifies comparing score functions by their
    exceedance rates alone.
    """
    rates, integrals = [], []
    for score_fn in (score_fn_a, score_fn_b):
        field = score_fn(fixture.grid, fixture.mask, fixture.rng)
        cal = cal_true_label_scores(field, fixture.labels, fixture.mask)
        test = test_all_label_scores(field, fixture.mask)
        rates.append(score_exceedance_rate(cal, test))
        integrals.append(integrated_set_size_direct(cal, test))
    return bool(np.sign(rates[0] - rates[1]) == np.sign(integrals[0] - integrals[1]))


def exchangeability_permutation_test(
    cal_scores,
    test_true_label_scores,
    num_permutations: int,
    seed: int,
) -> float:
    """Two-sample permutation test on the difference of sample means.

    Returns ``(1 + #{permuted |diff| >= observed |diff|}) / (B + 1)``.
    When calibration and test scores are exchangeable the p-value is
    (super-)uniform, so repeated seeded runs reject at level 0.05 about 5%
    of the time.
    """
    cal = _validated(cal_scores, "cal_scores")
    test = _validated(test_true_label_scores, "test_true_label_scores")
    if num_permutations < 1:
        raise InvalidConfig(f"num_permutations must be >= 1, got {num_permutations}")
    observed = abs(float(cal.mean()) - float(test.mean()))
    pooled = np.concatenate([cal, test])
    rng = np.random.default_rng(seed)
    perms = np.tile(pooled, (num_permutations, 1))
    rng.permuted(perms, axis=1, out=perms)
    stats = np.abs(perms[:, : cal.size].mean(axis=1) - perms[:, cal.size :].mean(axis=1))
    hits = int(np.count_nonzero(stats >= observed))
    return (1 + hits) / (num_permutations + 1)


def cal_true_label_scores(field: ScoreField, labels: LabelGrid, mask: SplitMask) -> np.ndarray:
    """True-label scores at calibration pixels, in row-major pixel order."""
    return _true_label_scores(field, labels, mask, Role.CAL)


def test_true_label_scores(field: ScoreField, labels: LabelGrid, mask: SplitMask) -> np.ndarray:
    """True-label scores at test pixels, in row-major pixel order."""
    return _true_label_scores(field, labels, mask, Role.TEST)


def test_all_label_scores(field: ScoreField, mask: SplitMask) -> np.ndarray:
    """All per-label scores at test pixels, flattened row-major."""
    test = mask.where(Role.TEST)
    if not field.validity[test].all():
        r, c = (int(i) for i in np.argwhere(test & ~field.validity)[0])
        raise InvariantViolation(f"test pixel ({r}, {c}) has no valid scores")
    return field.scores[test].ravel()


def _true_label_scores(field: ScoreField, labels: LabelGrid, mask: SplitMask, role: Role) -> np.ndarray:
    selected = mask.where(role)
    unlabeled = selected & ~labels.labeled
    if unlabeled.any():
        r, c = (int(i) for i in np.argwhere(unlabeled)[0])
        raise UnlabeledCalPixel(f"{role.name.lower()} pixel ({r}, {c}) has no label")
    if not field.validity[selected].all():
        r, c = (int(i) for i in np.argwhere(selected & ~field.validity)[0])
        raise InvariantViolation(f"{role.name.lower()} pixel ({r}, {c}) has no valid scores")
    labels.check_classes(field.num_classes)
    rows, cols = np.nonzero(selected)
    return field.scores[rows, cols, labels.labels[rows, cols]]


def _warn_on_ties(cal: np.ndarray, test: np.ndarray) -> None:
    ties = np.intersect1d(cal, test)
    if ties.size:
        warnings.warn(
            f"{ties.size} exact cal/test score tie(s); the closed-form identity "
            "assumes tie-free inputs",
            TieDetectedWarning,
            stacklevel=3,
        )
