"""Non-conformity scores for per-pixel classifiers.

Three randomized scores over softmax probabilities, each a function of the
candidate label's rank under the pixel's probability ordering and a single
uniform draw ``u`` per pixel:

* ``aps``   probability mass of labels ranked strictly above the candidate,
            plus ``u`` times the candidate's own probability.
* ``raps``  ``aps`` plus a linear rank penalty beyond a regularization rank.
* ``saps``  keeps only the top probability and replaces the rest of the
            cumulative tail with a flat per-rank step.

Ranks are 1-based, ordered by descending probability with ties broken by
ascending label index; "mass ranked above" always means mass under this
tie-broken total order, which keeps every score deterministic.  The scalar
functions are deliberately plain loops: they are the reference route that
the vectorized ``score_field`` is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, LabelOutOfRange, ShapeMismatch
from .grids import ProbabilityGrid, Role, ScoreField, SplitMask
from .rng import RandomizationField

SCORE_KINDS = ("aps", "raps", "saps")

# Per-pixel 1-based rank of every label, shape (K,) or (H, W, K).
RankVector = np.ndarray


@dataclass(frozen=True)
class ScoreFunctionConfig:
    """Choice of score function plus its hyperparameters.

    ``raps_lambda``/``raps_kreg`` are read only when ``kind == "raps"``,
    ``saps_lambda`` only when ``kind == "saps"``.  Defaults follow the
    original works' common choices and can be overridden per run.
    """

    kind: str = "aps"
    raps_lambda: float = 0.01
    raps_kreg: int = 1
    saps_lambda: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", str(self.kind).lower())
        if self.kind not in SCORE_KINDS:
            raise InvalidConfig(f"score kind must be one of {SCORE_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.raps_lambda) or self.raps_lambda < 0:
            raise InvalidConfig(f"raps_lambda must be finite and >= 0, got {self.raps_lambda}")
        if self.raps_kreg < 1:
            raise InvalidConfig(f"raps_kreg must be >= 1, got {self.raps_kreg}")
        if not np.isfinite(self.saps_lambda) or self.saps_lambda < 0:
            raise InvalidConfig(f"saps_lambda must be finite and >= 0, got {self.saps_lambda}")


def rank_labels(probs: np.ndarray) -> RankVector:
    """1-based rank of every label: descending probability, ties by index.

    Works on a single ``(K,)`` vector or a stacked ``(H, W, K)`` array.
    """
    probs = np.asarray(probs, dtype=np.float64)
    order = np.argsort(-probs, axis=-1, kind="stable")
    ranks = np.empty(probs.shape, dtype=np.int32)
    np.put_along_axis(ranks, order, np.arange(1, probs.shape[-1] + 1, dtype=np.int32), axis=-1)
    return ranks


def aps_score(probs: np.ndarray, y: int, u: float) -> float:
    """Mass ranked strictly above ``y`` plus ``u`` times its own mass."""
    probs = np.asarray(probs, dtype=np.float64)
    _check_label(y, probs.shape[-1])
    ranks = rank_labels(probs)
    total = 0.0
    for label in range(probs.shape[-1]):
        if ranks[label] < ranks[y]:
            total += probs[label]
    return total + u * float(probs[y])


def raps_score(
    probs: np.ndarray,
    y: int,
    u: float,
    raps_lambda: float = 0.01,
    raps_kreg: int = 1,
) -> float:
    """``aps`` plus ``raps_lambda * max(rank(y) - raps_kreg, 0)``."""
    probs = np.asarray(probs, dtype=np.float64)
    _check_label(y, probs.shape[-1])
    rank = int(rank_labels(probs)[y])
    return aps_score(probs, y, u) + raps_lambda * max(rank - raps_kreg, 0)


def saps_score(probs: np.ndarray, y: int, u: float, saps_lambda: float = 0.2) -> float:
    """Top probability plus a flat per-rank step; rank 1 keeps ``u * p_max``."""
    probs = np.asarray(probs, dtype=np.float64)
    _check_label(y, probs.shape[-1])
    rank = int(rank_labels(probs)[y])
    p_max = float(probs.max())
    if rank == 1:
        return u * p_max
    return p_max + (rank - 2 + u) * saps_lambda


def score_field(
    grid: ProbabilityGrid,
    mask: SplitMask,
    cfg: ScoreFunctionConfig,
    rng: RandomizationField,
) -> ScoreField:
    """Score every label at every calibration and test pixel, vectorized.

    One uniform draw per pixel is shared across all candidate labels there,
    which makes prediction sets nested across coverage levels.  Train and
    ignore pixels are marked invalid and their score entries left at zero.
    """
    shape = (grid.height, grid.width)
    if mask.roles.shape != shape:
        raise ShapeMismatch(f"mask shape {mask.roles.shape} != grid shape {shape}")
    if (rng.height, rng.width) != shape:
        raise ShapeMismatch(
            f"randomization field shape {(rng.height, rng.width)} != grid shape {shape}"
        )
    p = grid.values
    u = rng.values[..., None]
    order = np.argsort(-p, axis=-1, kind="stable")
    sorted_p = np.take_along_axis(p, order, axis=-1)
    # exclusive prefix sum: mass strictly above each sorted position
    prefix = np.cumsum(sorted_p, axis=-1) - sorted_p
    rank = np.arange(1, grid.num_classes + 1, dtype=np.float64)

    if cfg.kind == "aps":
        sorted_scores = prefix + u * sorted_p
    elif cfg.kind == "raps":
        step = cfg.raps_lambda * np.maximum(rank - cfg.raps_kreg, 0.0)
        sorted_scores = prefix + u * sorted_p + step
    else:
        p_max = sorted_p[..., :1]
        tail = p_max + (rank - 2.0 + u) * cfg.saps_lambda
        sorted_scores = np.where(rank == 1.0, u * p_max, tail)

    scores = np.empty_like(sorted_scores)
    np.put_along_axis(scores, order, sorted_scores, axis=-1)

    validity = mask.where(Role.CAL) | mask.where(Role.TEST)
    scores = np.where(validity[..., None], scores, 0.0)
    return ScoreField(scores, validity)


def _check_label(y: int, num_classes: int) -> None:
    if not 0 <= y < num_classes:
        raise LabelOutOfRange(f"label {y} outside 0..{num_classes - 1}")
