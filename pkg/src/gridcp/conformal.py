"""Split-conformal calibration, prediction sets, and spatial score aggregation.

The calibration threshold is the ``ceil((n+1)(1-alpha))``-th smallest
calibration score (or +inf when that index exceeds ``n``); a pixel's
prediction set holds every label whose score is at or below the threshold.

Aggregation is the spatial smoothing step applied to the score field before
calibration: each valid pixel's per-label score is blended with the mean
score of its valid neighbors,

    V_k = (1 - blend) * V_{k-1} + (blend / |N|) * sum over N of V_{k-1},

iterated ``iterations`` times with simultaneous (Jacobi-style) updates, so
results never depend on pixel traversal order.  Neighbors that are
out-of-bounds or carry an excluded role are dropped, not zero-padded; a
pixel with no eligible neighbors keeps its score unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyCalibrationSet,
    InvalidConfig,
    InvariantViolation,
    ShapeMismatch,
    UnlabeledCalPixel,
)
from .grids import LabelGrid, PredictionSetGrid, ProbabilityGrid, Role, ScoreField, SplitMask
from .rng import RandomizationField
from .scores import ScoreFunctionConfig, score_field

NEIGHBORHOOD_SHAPES = ("four-connected", "eight-connected", "chebyshev")

# Relative slack when deciding whether (n+1)(1-alpha) is an exact integer;
# absorbs float rounding like 20 * 0.95 = 19.000000000000004.
_INDEX_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Which pixels count as neighbors during aggregation.

    ``radius`` applies to the chebyshev shape only (all pixels within that
    chessboard distance); the two connected shapes fix it at 1.  The center
    pixel is never its own neighbor.  Pixels whose role is in
    ``exclude_roles`` are dropped from every neighborhood; pixels with
    invalid scores are dropped regardless, since their scores were never
    computed.
    """

    shape: str = "eight-connected"
    radius: int = 1
    exclude_roles: frozenset = frozenset({Role.TRAIN, Role.IGNORE})

    def __post_init__(self) -> None:
        if self.shape not in NEIGHBORHOOD_SHAPES:
            raise InvalidConfig(
                f"neighborhood shape must be one of {NEIGHBORHOOD_SHAPES}, got {self.shape!r}"
            )
        if self.radius < 1:
            raise InvalidConfig(f"neighborhood radius must be >= 1, got {self.radius}")
        if self.shape != "chebyshev" and self.radius != 1:
            raise InvalidConfig(f"radius is fixed at 1 for {self.shape} neighborhoods")
        object.__setattr__(self, "exclude_roles", frozenset(Role(r) for r in self.exclude_roles))

    def footprint(self) -> np.ndarray:
        """Boolean stencil with the center cell false."""
        if self.shape == "four-connected":
            return np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=bool)
        size = 2 * self.radius + 1 if self.shape == "chebyshev" else 3
        stencil = np.ones((size, size), dtype=bool)
        stencil[size // 2, size // 2] = False
        return stencil

    @classmethod
    def from_string(cls, text: str, exclude_roles: frozenset | None = None) -> "NeighborhoodSpec":
        """Parse ``four-connected``, ``eight-connected``, or ``chebyshev-radius-R``."""
        kwargs = {} if exclude_roles is None else {"exclude_roles": exclude_roles}
        if text in ("four-connected", "eight-connected"):
            return cls(shape=text, **kwargs)
        prefix = "chebyshev-radius-"
        if text.startswith(prefix):
            try:
                radius = int(text[len(prefix):])
            except ValueError:
                raise InvalidConfig(f"bad chebyshev radius in {text!r}") from None
            return cls(shape="chebyshev", radius=radius, **kwargs)
        raise InvalidConfig(f"unknown neighborhood {text!r}")

    def to_string(self) -> str:
        if self.shape == "chebyshev":
            return f"chebyshev-radius-{self.radius}"
        return self.shape


@dataclass(frozen=True)
class AggregationConfig:
    """Spatial aggregation settings: blend weight, iteration count, stencil.

    ``iterations = 0`` (or ``blend = 0``) reduces the pipeline to standard
    split conformal prediction exactly, bit for bit.
    """

    blend: float = 0.5
    iterations: int = 1
    neighborhood: NeighborhoodSpec = field(default_factory=NeighborhoodSpec)

    def __post_init__(self) -> None:
        if not 0.0 <= self.blend <= 1.0:
            raise InvalidConfig(f"blend must be in [0, 1], got {self.blend}")
        if self.iterations < 0:
            raise InvalidConfig(f"iterations must be >= 0, got {self.iterations}")


@dataclass(frozen=True)
class CalibrationResult:
    """Threshold produced by calibration, together with its inputs.

    ``tau`` is +inf when the quantile index exceeds the number of
    calibration scores, in which case every prediction set is the full
    label set; that conservative fallback preserves coverage for tiny
    calibration sets.
    """

    tau: float
    alpha: float
    n_cal: int
    sorted_cal_scores: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.sorted_cal_scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size != self.n_cal:
            raise InvariantViolation(
                f"expected {self.n_cal} sorted calibration scores, got shape {scores.shape}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig(f"alpha must be in (0, 1), got {self.alpha}")
        if (np.diff(scores) < 0).any():
            raise InvariantViolation("calibration scores must be sorted ascending")
        scores = np.ascontiguousarray(scores)
        scores.flags.writeable = False
        object.__setattr__(self, "sorted_cal_scores", scores)
        idx = quantile_index(self.n_cal, self.alpha)
        expected = float(scores[idx - 1]) if idx <= self.n_cal else math.inf
        if not (self.tau == expected):
            raise InvariantViolation(
                f"tau {self.tau} is not the rank-{idx} calibration score {expected}"
            )

    def to_dict(self) -> dict:
        tau = None if math.isinf(self.tau) else float(self.tau)
        return {
            "tau": tau,
            "alpha": float(self.alpha),
            "n_cal": int(self.n_cal),
            "sorted_cal_scores": [float(s) for s in self.sorted_cal_scores],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationResult":
        tau = math.inf if data["tau"] is None else float(data["tau"])
        return cls(
            tau=tau,
            alpha=float(data["alpha"]),
            n_cal=int(data["n_cal"]),
            sorted_cal_scores=np.asarray(data["sorted_cal_scores"], dtype=np.float64),
        )


def quantile_index(n_cal: int, alpha: float) -> int:
    """1-based order-statistic index ``ceil((n+1)(1-alpha))``.

    Values within a relative ``1e-9`` of an integer are snapped to it
    before the ceiling, so levels like ``alpha = 0.05`` with ``n = 19``
    yield 19 rather than spuriously rounding up to 20.
    """
    if n_cal < 1:
        raise EmptyCalibrationSet("no calibration scores")
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must be in (0, 1), got {alpha}")
    raw = (n_cal + 1) * (1.0 - alpha)
    nearest = round(raw)
    if abs(raw - nearest) <= _INDEX_SNAP_TOL * max(1.0, abs(raw)) and nearest >= 1:
        return int(nearest)
    return max(1, math.ceil(raw))


def aggregate(field: ScoreField, mask: SplitMask, cfg: AggregationConfig) -> ScoreField:
    """Blend each pixel's scores with its neighborhood mean, per label channel.

    All updates within one iteration read the previous iterate only, and
    the validity plane is untouched: aggregation reshuffles score mass
    among valid pixels but never manufactures scores at invalid ones.
    """
    if mask.roles.shape != field.validity.shape:
        raise ShapeMismatch(
            f"mask shape {mask.roles.shape} != score field shape {field.validity.shape}"
        )
    expected_valid = mask.where(Role.CAL) | mask.where(Role.TEST)
    if not np.array_equal(field.validity, expected_valid):
        r, c = (int(i) for i in np.argwhere(field.validity != expected_valid)[0])
        raise InvariantViolation(
            f"score validity at ({r}, {c}) inconsistent with the split mask"
        )

    excluded = np.isin(mask.roles, [int(r) for r in cfg.neighborhood.exclude_roles])
    eligible = (field.validity & ~excluded).astype(np.float64)
    stencil = cfg.neighborhood.footprint().astype(np.float64)
    neighbor_count = ndimage.convolve(eligible, stencil, mode="constant", cval=0.0)
    has_neighbors = neighbor_count > 0
    update = field.validity & has_neighbors
    denom = np.where(has_neighbors, neighbor_count, 1.0)[..., None]

    values = field.scores
    weights = eligible[..., None]
    for _ in range(cfg.iterations):
        neighbor_sum = ndimage.convolve(
            values * weights, stencil[:, :, None], mode="constant", cval=0.0
        )
        blended = (1.0 - cfg.blend) * values + cfg.blend * (neighbor_sum / denom)
        values = np.where(update[..., None], blended, values)
    return ScoreField(values, field.validity)


def calibrate(field: ScoreField, labels: LabelGrid, mask: SplitMask, alpha: float) -> CalibrationResult:
    """Compute the conformal threshold from true-label calibration scores."""
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must be in (0, 1), got {alpha}")
    shape = field.validity.shape
    if mask.roles.shape != shape or labels.labels.shape != shape:
        raise ShapeMismatch("score field, labels, and mask must share one shape")
    cal = mask.where(Role.CAL)
    n_cal = int(np.count_nonzero(cal))
    if n_cal == 0:
        raise EmptyCalibrationSet("split mask assigns no calibration pixels")
    unlabeled = cal & ~labels.labeled
    if unlabeled.any():
        r, c = (int(i) for i in np.argwhere(unlabeled)[0])
        raise UnlabeledCalPixel(f"calibration pixel ({r}, {c}) has no label")
    if not field.validity[cal].all():
        r, c = (int(i) for i in np.argwhere(cal & ~field.validity)[0])
        raise InvariantViolation(f"calibration pixel ({r}, {c}) has no valid scores")
    labels.check_classes(field.num_classes)

    rows, cols = np.nonzero(cal)
    cal_scores = np.sort(field.scores[rows, cols, labels.labels[rows, cols]])
    idx = quantile_index(n_cal, alpha)
    tau = float(cal_scores[idx - 1]) if idx <= n_cal else math.inf
    return CalibrationResult(tau=tau, alpha=alpha, n_cal=n_cal, sorted_cal_scores=cal_scores)


def predict_sets(
    field: ScoreField,
    mask: SplitMask,
    cal: CalibrationResult,
    include_cal: bool = False,
) -> PredictionSetGrid:
    """Per-pixel label sets: every label whose score is at or below tau.

    Sets are defined at test pixels (plus calibration pixels when
    ``include_cal`` is set); membership elsewhere is all-false.
    """
    if mask.roles.shape != field.validity.shape:
        raise ShapeMismatch(
            f"mask shape {mask.roles.shape} != score field shape {field.validity.shape}"
        )
    target = mask.where(Role.TEST)
    if include_cal:
        target = target | mask.where(Role.CAL)
    if not field.validity[target].all():
        r, c = (int(i) for i in np.argwhere(target & ~field.validity)[0])
        raise InvariantViolation(f"target pixel ({r}, {c}) has no valid scores")
    membership = (field.scores <= cal.tau) & target[..., None]
    return PredictionSetGrid(membership, defined=target)


def run_pipeline(
    grid: ProbabilityGrid,
    labels: LabelGrid,
    mask: SplitMask,
    score_cfg: ScoreFunctionConfig,
    sacp_cfg: AggregationConfig,
    alpha: float,
    seed: int,
) -> tuple[PredictionSetGrid, CalibrationResult]:
    """Score, aggregate, calibrate, predict: the full conformal pipeline.

    With ``sacp_cfg.iterations = 0`` this is exactly the standard
    split-conformal path; the same seed always yields the same sets.
    """
    rng = RandomizationField(seed, grid.height, grid.width)
    field = score_field(grid, mask, score_cfg, rng)
    field = aggregate(field, mask, sacp_cfg)
    cal = calibrate(field, labels, mask, alpha)
    return predict_sets(field, mask, cal), cal
