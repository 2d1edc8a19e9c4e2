"""Repeated-trial experiments: split sampling, paired runs, and sweeps.

Each trial draws a fresh train/calibration/test split and a fresh
randomization field from a per-trial seed, then runs the standard conformal
pipeline and the spatially-aggregated pipeline on the *same* split and the
*same* draws, so the per-trial size difference isolates the effect of
aggregation.  Everything is a pure function of the inputs and the seed; the
JSON report is byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .conformal import (
    AggregationConfig,
    NeighborhoodSpec,
    aggregate,
    calibrate,
    predict_sets,
)
from .errors import InvalidConfig, NotEnoughLabeledPixels
from .grids import LabelGrid, ProbabilityGrid, Role, SplitMask
from .metrics import MetricReport, compute_metrics
from .rng import RandomizationField, derive_seed
from .scores import ScoreFunctionConfig, score_field

_MEAN_KEYS = ("coverage", "mean_size", "sscv", "oa", "aa")


@dataclass(frozen=True)
class RunConfig:
    """Settings for one repeated-trial experiment."""

    alpha: float = 0.05
    score: ScoreFunctionConfig = field(default_factory=ScoreFunctionConfig)
    sacp: AggregationConfig = field(default_factory=AggregationConfig)
    cal_ratio: float = 0.5
    trials: int = 30
    seed: int = 0
    train_count: int = 128

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.cal_ratio < 1.0:
            raise InvalidConfig(f"cal_ratio must be in (0, 1), got {self.cal_ratio}")
        if self.trials < 1:
            raise InvalidConfig(f"trials must be >= 1, got {self.trials}")
        if self.train_count < 0:
            raise InvalidConfig(f"train_count must be >= 0, got {self.train_count}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "score": {
                "kind": self.score.kind,
                "raps_lambda": self.score.raps_lambda,
                "raps_kreg": self.score.raps_kreg,
                "saps_lambda": self.score.saps_lambda,
            },
            "sacp": {
                "lambda": self.sacp.blend,
                "k": self.sacp.iterations,
                "neighborhood": self.sacp.neighborhood.to_string(),
            },
            "cal_ratio": self.cal_ratio,
            "trials": self.trials,
            "seed": self.seed,
            "train_count": self.train_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = dict(data)
        if "score" in kwargs:
            kwargs["score"] = ScoreFunctionConfig(**kwargs["score"])
        if "sacp" in kwargs:
            sacp = dict(kwargs["sacp"])
            sacp_kwargs = {}
            if "lambda" in sacp:
                sacp_kwargs["blend"] = sacp["lambda"]
            if "k" in sacp:
                sacp_kwargs["iterations"] = sacp["k"]
            if "neighborhood" in sacp:
                sacp_kwargs["neighborhood"] = NeighborhoodSpec.from_string(sacp["neighborhood"])
            kwargs["sacp"] = AggregationConfig(**sacp_kwargs)
        return cls(**kwargs)


@dataclass(frozen=True)
class TrialSummary:
    """Per-trial metric reports for both pipelines, plus derived statistics."""

    standard: tuple
    spatial: tuple

    def __post_init__(self) -> None:
        if len(self.standard) != len(self.spatial) or not self.standard:
            raise InvalidConfig("need one standard and one spatial report per trial")

    def mean(self, pipeline: str, key: str) -> float:
        return float(np.mean([getattr(r, key) for r in getattr(self, pipeline)]))

    def std(self, pipeline: str, key: str) -> float:
        values = [getattr(r, key) for r in getattr(self, pipeline)]
        return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0

    def size_deltas(self) -> list[float]:
        """Per-trial spatial-minus-standard mean set size."""
        return [
            spa.mean_size - std.mean_size
            for std, spa in zip(self.standard, self.spatial)
        ]

    def to_dict(self) -> dict:
        out = {}
        for name in ("standard", "spatial"):
            reports: tuple[MetricReport, ...] = getattr(self, name)
            out[name] = {
                "per_trial": [r.to_dict() for r in reports],
                "mean": {k: self.mean(name, k) for k in _MEAN_KEYS},
                "std": {k: self.std(name, k) for k in _MEAN_KEYS},
            }
        deltas = self.size_deltas()
        out["size_delta"] = {
            "per_trial": deltas,
            "mean": float(np.mean(deltas)),
        }
        return out


def sample_split(labels: LabelGrid, train_count: int, cal_ratio: float, seed: int) -> SplitMask:
    """Random role assignment over labeled pixels; unlabeled become ignore.

    ``train_count`` pixels go to train; of the remaining labeled pixels a
    ``cal_ratio`` fraction (rounded) goes to calibration and the rest to
    test.  The calibration/test assignment is a uniform random split, which
    is exactly the exchangeability the coverage guarantee needs.
    """
    if not 0.0 < cal_ratio < 1.0:
        raise InvalidConfig(f"cal_ratio must be in (0, 1), got {cal_ratio}")
    if train_count < 0:
        raise InvalidConfig(f"train_count must be >= 0, got {train_count}")
    coords = np.argwhere(labels.labeled)
    remaining = len(coords) - train_count
    if remaining < 2:
        raise NotEnoughLabeledPixels(
            f"{len(coords)} labeled pixels cannot fund train_count={train_count} "
            "plus calibration and test"
        )
    n_cal = round(remaining * cal_ratio)
    if n_cal == 0 or n_cal == remaining:
        raise NotEnoughLabeledPixels(
            f"cal_ratio={cal_ratio} leaves calibration or test empty ({remaining} pixels)"
        )
    order = np.random.default_rng(seed).permutation(len(coords))
    roles = np.full(labels.labels.shape, int(Role.IGNORE), dtype=np.uint8)
    sections = np.split(coords[order], [train_count, train_count + n_cal])
    for part, role in zip(sections, (Role.TRAIN, Role.CAL, Role.TEST)):
        roles[part[:, 0], part[:, 1]] = int(role)
    return SplitMask(roles)


def run_experiment(grid: ProbabilityGrid, labels: LabelGrid, run_cfg: RunConfig) -> TrialSummary:
    """Paired standard/spatial runs over seeded trials.

    Trial t uses seed ``derive_seed(run_cfg.seed, t)`` for its split and a
    child of that for its randomization field, so trials are independent
    yet individually reproducible.
    """
    labels.check_classes(grid.num_classes)
    standard_cfg = replace(run_cfg.sacp, iterations=0)
    standard_reports, spatial_reports = [], []
    for trial in range(run_cfg.trials):
        trial_seed = derive_seed(run_cfg.seed, trial)
        mask = sample_split(labels, run_cfg.train_count, run_cfg.cal_ratio, trial_seed)
        rng = RandomizationField(derive_seed(trial_seed, 1), grid.height, grid.width)
        base_field = score_field(grid, mask, run_cfg.score, rng)
        for cfg, reports in ((standard_cfg, standard_reports), (run_cfg.sacp, spatial_reports)):
            field_k = aggregate(base_field, mask, cfg)
            cal = calibrate(field_k, labels, mask, run_cfg.alpha)
            sets = predict_sets(field_k, mask, cal)
            reports.append(compute_metrics(sets, grid, labels, mask, run_cfg.alpha))
    return TrialSummary(standard=tuple(standard_reports), spatial=tuple(spatial_reports))


def sweep(
    grid: ProbabilityGrid,
    labels: LabelGrid,
    run_cfg: RunConfig,
    param: str,
    values,
) -> list[TrialSummary]:
    """One experiment per value of ``lambda``, ``k``, ``gamma``, or ``alpha``.

    All other settings, including the base seed, are held fixed.
    """
    values = list(values)
    if not values:
        raise InvalidConfig("sweep needs at least one value")
    summaries = []
    for value in values:
        if param == "lambda":
            cfg = replace(run_cfg, sacp=replace(run_cfg.sacp, blend=float(value)))
        elif param == "k":
            if float(value) != int(value):
                raise InvalidConfig(f"k must be an integer, got {value}")
            cfg = replace(run_cfg, sacp=replace(run_cfg.sacp, iterations=int(value)))
        elif param == "gamma":
            cfg = replace(run_cfg, cal_ratio=float(value))
        elif param == "alpha":
            cfg = replace(run_cfg, alpha=float(value))
        else:
            raise InvalidConfig(f"unknown sweep parameter {param!r}")
        summaries.append(run_experiment(grid, labels, cfg))
    return summaries
