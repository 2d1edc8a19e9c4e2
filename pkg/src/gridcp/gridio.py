"""Grid container I/O: one JSON header plus one raw binary payload per grid.

A container is a directory holding ``meta.json`` and ``payload.bin``.  The
payload is little-endian, row-major, without padding.  Score fields carry an
extra ``validity.bin`` (one byte per pixel) and prediction-set grids a
``defined.bin``.  Labels and masks may alternatively be imported from a plain
CSV file (one row per grid row).

Loading is strictly read-only and validates every invariant of the target
grid type; failures report pixel coordinates.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import HeaderPayloadMismatch, InvariantViolation
from .grids import LabelGrid, PredictionSetGrid, ProbabilityGrid, ScoreField, SplitMask

META_NAME = "meta.json"
PAYLOAD_NAME = "payload.bin"
VALIDITY_NAME = "validity.bin"
DEFINED_NAME = "defined.bin"

_DTYPES = {"f32": "<f4", "f64": "<f8", "i32": "<i4", "u8": "u1"}
_DEFAULT_DTYPE = {
    "probabilities": "f64",
    "labels": "i32",
    "mask": "u8",
    "scores": "f64",
    "sets": "u8",
}

Grid = ProbabilityGrid | LabelGrid | SplitMask | ScoreField | PredictionSetGrid

_KIND_OF = {
    ProbabilityGrid: "probabilities",
    LabelGrid: "labels",
    SplitMask: "mask",
    ScoreField: "scores",
    PredictionSetGrid: "sets",
}


def _payload_array(grid: Grid) -> np.ndarray:
    if isinstance(grid, ProbabilityGrid):
        return grid.values
    if isinstance(grid, LabelGrid):
        return grid.labels
    if isinstance(grid, SplitMask):
        return grid.roles
    if isinstance(grid, ScoreField):
        return grid.scores
    if isinstance(grid, PredictionSetGrid):
        return grid.membership
    raise TypeError(f"not a grid type: {type(grid).__name__}")


def save_grid(
    grid: Grid, path: str | Path, dtype: str | None = None, classes: int | None = None
) -> None:
    """Write a grid container to directory ``path`` (created if missing).

    ``dtype`` overrides the on-disk element type (e.g. ``"f32"`` to halve
    probability files); the default keeps full 64-bit precision so that
    save/load round-trips are bit-identical.  ``classes`` applies to label
    grids only: it records the label alphabet size in the header so loaders
    can reject out-of-range indices without any side channel.
    """
    kind = _KIND_OF[type(grid)]
    dtype = dtype or _DEFAULT_DTYPE[kind]
    if dtype not in _DTYPES:
        raise HeaderPayloadMismatch(f"unknown dtype {dtype!r}")
    if classes is not None:
        if kind != "labels":
            raise HeaderPayloadMismatch("classes override is only meaningful for labels")
        grid.check_classes(classes)
    payload = _payload_array(grid)
    if payload.ndim == 3:
        classes = payload.shape[2]
    elif classes is None:
        classes = 1

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "height": int(payload.shape[0]),
        "width": int(payload.shape[1]),
        "classes": int(classes),
        "dtype": dtype,
        "layout": "row-major",
        "kind": kind,
    }
    (path / META_NAME).write_text(json.dumps(meta, indent=2) + "\n")
    payload.astype(_DTYPES[dtype]).tofile(path / PAYLOAD_NAME)
    if isinstance(grid, ScoreField):
        grid.validity.astype("u1").tofile(path / VALIDITY_NAME)
    if isinstance(grid, PredictionSetGrid):
        grid.defined.astype("u1").tofile(path / DEFINED_NAME)


def _read_flag_plane(path: Path, name: str, height: int, width: int) -> np.ndarray:
    raw = np.fromfile(path / name, dtype="u1")
    if raw.size != height * width:
        raise HeaderPayloadMismatch(
            f"{name} holds {raw.size} bytes, expected {height * width}"
        )
    return raw.reshape(height, width).astype(bool)


def load_grid(path: str | Path, kind: str) -> Grid:
    """Load a grid container (or a labels/mask CSV) and validate it.

    Parameters
    ----------
    path : str or Path
        Container directory, or a ``.csv`` file for labels/mask import.
    kind : str
        One of ``probabilities``, ``labels``, ``mask``, ``scores``, ``sets``.
    """
    if kind not in _DEFAULT_DTYPE:
        raise HeaderPayloadMismatch(f"unknown grid kind {kind!r}")
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_csv(path, kind)
    meta_path = path / META_NAME
    if not meta_path.exists():
        raise FileNotFoundError(f"no grid container at {path}")
    meta = json.loads(meta_path.read_text())
    for key in ("height", "width", "classes", "dtype", "kind"):
        if key not in meta:
            raise HeaderPayloadMismatch(f"meta.json missing key {key!r}")
    if meta["kind"] != kind:
        raise HeaderPayloadMismatch(f"container holds {meta['kind']!r}, requested {kind!r}")
    if meta.get("layout", "row-major") != "row-major":
        raise HeaderPayloadMismatch(f"unsupported layout {meta['layout']!r}")
    if meta["dtype"] not in _DTYPES:
        raise HeaderPayloadMismatch(f"unknown dtype {meta['dtype']!r}")
    height, width, classes = int(meta["height"]), int(meta["width"]), int(meta["classes"])
    if min(height, width, classes) <= 0:
        raise HeaderPayloadMismatch("non-positive dimension in header")
    if kind == "mask" and classes != 1:
        raise HeaderPayloadMismatch(f"mask containers must have classes=1, got {classes}")

    raw = np.fromfile(path / PAYLOAD_NAME, dtype=_DTYPES[meta["dtype"]])
    expected = height * width * (classes if kind in ("probabilities", "scores", "sets") else 1)
    if raw.size != expected:
        raise HeaderPayloadMismatch(
            f"payload holds {raw.size} elements, header implies {expected}"
        )

    if kind == "probabilities":
        return ProbabilityGrid(raw.reshape(height, width, classes).astype(np.float64))
    if kind == "labels":
        labels = LabelGrid(raw.reshape(height, width).astype(np.int32))
        if classes > 1:
            labels.check_classes(classes)
        return labels
    if kind == "mask":
        return SplitMask(raw.reshape(height, width))
    if kind == "scores":
        validity = _read_flag_plane(path, VALIDITY_NAME, height, width)
        return ScoreField(raw.reshape(height, width, classes).astype(np.float64), validity)
    defined = _read_flag_plane(path, DEFINED_NAME, height, width)
    return PredictionSetGrid(raw.reshape(height, width, classes).astype(bool), defined)


def _load_csv(path: Path, kind: str) -> Grid:
    if kind not in ("labels", "mask"):
        raise HeaderPayloadMismatch(f"CSV import supports labels/mask, not {kind!r}")
    if not path.exists():
        raise FileNotFoundError(f"no CSV file at {path}")
    values = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    if kind == "labels":
        return LabelGrid(values.astype(np.int32))
    if (values < 0).any() or (values > 3).any():
        r, c = (int(i) for i in np.argwhere((values < 0) | (values > 3))[0])
        raise InvariantViolation(f"mask code {values[r, c]} at ({r}, {c}) outside 0..3")
    return SplitMask(values.astype(np.uint8))
