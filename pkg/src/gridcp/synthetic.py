"""Synthetic spatially-correlated classification problems.

Desk-scale stand-in for a trained pixel classifier: a latent class field is
the per-pixel argmax of K independent Gaussian noise fields smoothed to a
chosen correlation length, per-pixel probability vectors come from a
Dirichlet draw concentrated on the latent class, and the observed label is
then sampled from that very probability vector.  Because the labels are
drawn from the emitted distribution, the probabilities are conditionally
calibrated by construction, which is what makes coverage experiments on
this data meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidConfig
from .grids import LabelGrid, ProbabilityGrid


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``smoothness`` is the Gaussian correlation length (in pixels) of the
    latent class field; ``signal`` is the extra Dirichlet concentration on
    the latent class, so larger values mean a more confident classifier.
    ``ambiguity`` scales a second, independently perturbed latent field:
    where it disagrees with the first (bands around class boundaries, since
    that is where the argmax margin is thin) the concentration splits
    between the two classes, producing spatially coherent regions of
    genuinely ambiguous pixels.  With ``ambiguity = 0`` the two fields
    coincide and every pixel concentrates on a single class; raising
    ``signal`` toward infinity then makes probabilities one-hot, and
    sending ``smoothness`` toward zero removes all spatial structure.
    """

    height: int = 64
    width: int = 64
    num_classes: int = 8
    smoothness: float = 6.0
    signal: float = 3.0
    ambiguity: float = 0.0
    noise_seed: int = 0
    label_seed: int = 1

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise InvalidConfig(f"grid must be at least 1x1, got {self.height}x{self.width}")
        if self.num_classes < 2:
            raise InvalidConfig(f"need at least 2 classes, got {self.num_classes}")
        if not self.smoothness > 0:
            raise InvalidConfig(f"smoothness must be positive, got {self.smoothness}")
        if not self.signal > 0:
            raise InvalidConfig(f"signal must be positive, got {self.signal}")
        if self.ambiguity < 0:
            raise InvalidConfig(f"ambiguity must be >= 0, got {self.ambiguity}")

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "num_classes": self.num_classes,
            "smoothness": self.smoothness,
            "signal": self.signal,
            "ambiguity": self.ambiguity,
            "noise_seed": self.noise_seed,
            "label_seed": self.label_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        return cls(**data)


def generate_synthetic(cfg: SynthConfig) -> tuple[ProbabilityGrid, LabelGrid]:
    """Generate a probability grid and labels sampled from it.

    Two independent streams keep the classifier output (noise_seed) and the
    observed labels (label_seed) separately reproducible.
    """
    noise = np.random.default_rng(cfg.noise_seed)
    shape = (cfg.num_classes, cfg.height, cfg.width)
    sigma = (0.0, cfg.smoothness, cfg.smoothness)
    fields = ndimage.gaussian_filter(noise.standard_normal(shape), sigma=sigma)
    bump = ndimage.gaussian_filter(noise.standard_normal(shape), sigma=sigma)
    latent = fields.argmax(axis=0)
    shadow = (fields + cfg.ambiguity * bump).argmax(axis=0)

    # Half the signal on each latent field: where they agree the full signal
    # lands on one class, where they disagree it splits across two.
    concentration = np.ones((cfg.height, cfg.width, cfg.num_classes))
    half = 0.5 * cfg.signal
    for winners in (latent, shadow):
        conc_at = np.take_along_axis(concentration, winners[..., None], axis=2)
        np.put_along_axis(concentration, winners[..., None], conc_at + half, axis=2)
    gammas = noise.standard_gamma(concentration)
    probs = gammas / gammas.sum(axis=2, keepdims=True)

    draw = np.random.default_rng(cfg.label_seed).random((cfg.height, cfg.width))
    cumulative = probs.cumsum(axis=2)
    cumulative[..., -1] = 1.0  # guard the u ~ 1 edge against rounding in the sum
    labels = (draw[..., None] < cumulative).argmax(axis=2).astype(np.int32)
    return ProbabilityGrid(probs), LabelGrid(labels)
