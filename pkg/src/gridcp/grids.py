"""Grid data model: probability maps, labels, split roles, scores, and sets.

Everything downstream of a pixel classifier works on these containers.  All
arrays are row-major ``(row, col[, class])`` and use 64-bit floats for
arithmetic regardless of on-disk storage.  Instances are immutable after
construction: the backing numpy arrays are marked read-only so grids can be
shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import InvariantViolation, LabelOutOfRange, NonFiniteInput, ShapeMismatch

PROB_SUM_TOL = 1e-6
UNLABELED = -1


class Role(IntEnum):
    """Per-pixel split role. Values double as the on-disk mask codes."""

    IGNORE = 0
    TRAIN = 1
    CAL = 2
    TEST = 3


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProbabilityGrid:
    """Per-pixel class distributions, shape ``(H, W, K)``.

    Each pixel's vector must be a probability distribution: entries in
    ``[0, 1]`` and summing to 1 within ``PROB_SUM_TOL``.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ShapeMismatch(f"probability grid must be (H, W, K), got {values.shape}")
        if not np.isfinite(values).all():
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise NonFiniteInput(f"non-finite probability at (row, col, class)={bad}")
        if (values < 0).any() or (values > 1).any():
            bad = tuple(int(i) for i in np.argwhere((values < 0) | (values > 1))[0])
            raise InvariantViolation(f"probability outside [0, 1] at (row, col, class)={bad}")
        sums = values.sum(axis=2)
        off = np.abs(sums - 1.0) > PROB_SUM_TOL
        if off.any():
            r, c = (int(i) for i in np.argwhere(off)[0])
            raise InvariantViolation(
                f"pixel ({r}, {c}) probabilities sum to {sums[r, c]:.9f}, expected 1"
            )
        object.__setattr__(self, "values", _freeze(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class LabelGrid:
    """Ground-truth class indices, shape ``(H, W)``; ``-1`` marks unlabeled."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int32)
        if labels.ndim != 2:
            raise ShapeMismatch(f"label grid must be (H, W), got {labels.shape}")
        if (labels < UNLABELED).any():
            r, c = (int(i) for i in np.argwhere(labels < UNLABELED)[0])
            raise InvariantViolation(f"label {labels[r, c]} at ({r}, {c}) below {UNLABELED}")
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def check_classes(self, num_classes: int) -> None:
        """Raise unless every known label is ``< num_classes``."""
        if (self.labels >= num_classes).any():
            r, c = (int(i) for i in np.argwhere(self.labels >= num_classes)[0])
            raise LabelOutOfRange(
                f"label {self.labels[r, c]} at ({r}, {c}) >= num_classes={num_classes}"
            )

    @property
    def labeled(self) -> np.ndarray:
        """Boolean (H, W) array, true where a label is known."""
        return self.labels != UNLABELED


@dataclass(frozen=True)
class SplitMask:
    """Per-pixel role assignment (one role per pixel, so roles are disjoint)."""

    roles: np.ndarray

    def __post_init__(self):
        roles = np.asarray(self.roles, dtype=np.uint8)
        if roles.ndim != 2:
            raise ShapeMismatch(f"split mask must be (H, W), got {roles.shape}")
        if (roles > Role.TEST).any():
            r, c = (int(i) for i in np.argwhere(roles > Role.TEST)[0])
            raise InvariantViolation(f"unknown role code {roles[r, c]} at ({r}, {c})")
        object.__setattr__(self, "roles", _freeze(roles))

    @property
    def height(self) -> int:
        return self.roles.shape[0]

    @property
    def width(self) -> int:
        return self.roles.shape[1]

    def where(self, role: Role) -> np.ndarray:
        """Boolean (H, W) array selecting pixels with the given role."""
        return self.roles == np.uint8(role)

    def counts(self) -> dict[str, int]:
        return {role.name.lower(): int(np.count_nonzero(self.where(role))) for role in Role}


@dataclass(frozen=True)
class ScoreField:
    """Non-conformity scores for every label at every valid pixel.

    ``validity`` is false for pixels whose scores were never computed
    (train/ignore); those entries must not be read.
    """

    scores: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        validity = np.asarray(self.validity, dtype=bool)
        if scores.ndim != 3:
            raise ShapeMismatch(f"score field must be (H, W, K), got {scores.shape}")
        if validity.shape != scores.shape[:2]:
            raise ShapeMismatch(
                f"validity shape {validity.shape} != grid shape {scores.shape[:2]}"
            )
        valid_scores = scores[validity]
        if valid_scores.size and not np.isfinite(valid_scores).all():
            raise NonFiniteInput("non-finite score at a valid pixel")
        if valid_scores.size and (valid_scores < 0).any():
            raise InvariantViolation("negative score at a valid pixel")
        object.__setattr__(self, "scores", _freeze(scores))
        object.__setattr__(self, "validity", _freeze(validity))

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[2]


@dataclass(frozen=True)
class PredictionSetGrid:
    """Per-pixel label subsets as a boolean membership array ``(H, W, K)``.

    ``defined`` marks pixels that actually carry a set (normally the test
    pixels); membership elsewhere is meaningless and kept all-false.
    """

    membership: np.ndarray
    defined: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        membership = np.asarray(self.membership, dtype=bool)
        if membership.ndim != 3:
            raise ShapeMismatch(f"membership must be (H, W, K), got {membership.shape}")
        defined = self.defined
        if defined is None:
            defined = np.ones(membership.shape[:2], dtype=bool)
        defined = np.asarray(defined, dtype=bool)
        if defined.shape != membership.shape[:2]:
            raise ShapeMismatch(
                f"defined shape {defined.shape} != grid shape {membership.shape[:2]}"
            )
        object.__setattr__(self, "membership", _freeze(membership))
        object.__setattr__(self, "defined", _freeze(defined))

    @property
    def height(self) -> int:
        return self.membership.shape[0]

    @property
    def width(self) -> int:
        return self.membership.shape[1]

    @property
    def num_classes(self) -> int:
        return self.membership.shape[2]

    def sizes(self) -> np.ndarray:
        """Set cardinality per pixel (0 where undefined)."""
        return self.membership.sum(axis=2, dtype=np.int64)

    def contains(self, labels: LabelGrid) -> np.ndarray:
        """Boolean (H, W): true where the pixel's set contains its label.

        Unlabeled pixels report false; callers must restrict to labeled
        pixels themselves.
        """
        if (labels.height, labels.width) != (self.height, self.width):
            raise ShapeMismatch("label grid and prediction sets differ in shape")
        clipped = np.clip(labels.labels, 0, self.num_classes - 1)
        hit = np.take_along_axis(self.membership, clipped[:, :, None], axis=2)[:, :, 0]
        return hit & labels.labeled & self.defined


def softmax_ingest(logits: np.ndarray) -> ProbabilityGrid:
    """Convert raw classifier logits ``(H, W, K)`` into a ProbabilityGrid.

    Numerically stabilized by subtracting each pixel's max logit, so
    arbitrarily large inputs cannot overflow.

    Raises
    ------
    NonFiniteInput
        If any logit is NaN or infinite.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3:
        raise ShapeMismatch(f"logits must be (H, W, K), got {logits.shape}")
    if not np.isfinite(logits).all():
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(logits))[0])
        raise NonFiniteInput(f"non-finite logit at (row, col, class)={bad}")
    shifted = logits - logits.max(axis=2, keepdims=True)
    expd = np.exp(shifted)
    return ProbabilityGrid(expd / expd.sum(axis=2, keepdims=True))
