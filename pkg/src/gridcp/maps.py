"""Set-size maps as plain binary PGM (P5) images.

PGM needs no codec, so golden-file tests can compare bytes directly.
Pixel intensity encodes the prediction-set size, scaled to 0-255 over
``[0, K]``; pixels without a defined set render black.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grids import PredictionSetGrid

MAX_GRAY = 255


def render_size_map(sets: PredictionSetGrid, path) -> None:
    """Write ``path`` as a P5 graymap of per-pixel set sizes."""
    scale = MAX_GRAY / sets.num_classes
    intensity = np.rint(sets.sizes() * scale).astype(np.uint8)
    intensity[~sets.defined] = 0
    header = f"P5\n{sets.width} {sets.height}\n{MAX_GRAY}\n".encode("ascii")
    Path(path).write_bytes(header + intensity.tobytes())
