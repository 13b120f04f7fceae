"""Dense AOI label fields.

An :class:`AOIMap` assigns exactly one non-negative integer label to every
stimulus pixel. Pixel ``(x, y)`` is column ``x`` and row ``y`` of
``labels``; a gaze sample at float position ``(x, y)`` falls into pixel
``(floor(x), floor(y))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = "P_AOI"


class LabelMapFormatError(ValueError):
    """Raised when a label-map file is malformed."""


@dataclass(frozen=True, eq=False)
class AOIMap:
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 2 or labels.size == 0:
            raise ValueError("labels must be a non-empty 2-d array")
        if labels.min() < 0:
            raise ValueError("AOI labels must be non-negative")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def shape(self):
        return self.labels.shape

    def label_set(self):
        """Sorted array of labels present in the map."""
        return np.unique(self.labels)

    def __eq__(self, other):
        if not isinstance(other, AOIMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.labels, other.labels))

    __hash__ = None

    def label_at(self, x, y):
        """Labels of the pixels containing float positions ``x``, ``y``."""
        xi = np.floor(np.asarray(x)).astype(np.intp)
        yi = np.floor(np.asarray(y)).astype(np.intp)
        return self.labels[yi, xi]


@dataclass(frozen=True, eq=False)
class SubAOISplit:
    """Refinement of an :class:`AOIMap` into sub-AOIs.

    ``parent[j]`` is the AOI that sub-AOI ``j`` was cut from and
    ``vectors[j]`` the unit direction from the parent centroid to the
    sub-AOI centroid (zero when the two coincide).
    """

    sub_labels: np.ndarray
    parent: dict
    vectors: dict

    def as_map(self):
        return AOIMap(self.sub_labels)


def _centroids(labels):
    n = int(labels.max()) + 1
    ys, xs = np.indices(labels.shape)
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n)
    cx = np.bincount(flat, weights=xs.ravel(), minlength=n)
    cy = np.bincount(flat, weights=ys.ravel(), minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        return counts, cx / counts, cy / counts


def centroid_of(m, label):
    """Mean pixel coordinate ``(x, y)`` of ``label`` in ``m``."""
    mask = m.labels == label
    if not mask.any():
        raise KeyError(f"label {label} not present in AOI map")
    ys, xs = np.nonzero(mask)
    return float(xs.mean()), float(ys.mean())


SPLIT_METHODS = ("quadrant",)


def split_sub_aois(m, split_spec="quadrant"):
    """Cut every AOI into up to four quadrants about its centroid.

    A pixel goes to the east half when ``x >= cx`` and to the south half when
    ``y >= cy``. Sub-AOI ids are assigned in ascending parent order, then
    NW, NE, SW, SE; empty quadrants get no id.
    """
    if split_spec not in SPLIT_METHODS:
        raise ValueError(f"unknown split {split_spec!r}; choose from {SPLIT_METHODS}")
    labels = m.labels
    _, cx, cy = _centroids(labels)
    ys, xs = np.indices(labels.shape)
    quad = (xs >= cx[labels]).astype(np.int64) + 2 * (ys >= cy[labels])
    keys, inverse = np.unique(labels * 4 + quad, return_inverse=True)
    sub_labels = inverse.reshape(labels.shape)

    _, scx, scy = _centroids(sub_labels)
    parent, vectors = {}, {}
    for j, key in enumerate(keys):
        p = int(key // 4)
        v = np.array([scx[j] - cx[p], scy[j] - cy[p]])
        norm = np.hypot(*v)
        parent[j] = p
        vectors[j] = v / norm if norm > 1e-12 else np.zeros(2)
    return SubAOISplit(sub_labels, parent, vectors)


def save_label_map(m, path):
    """Write ``m`` as ``P_AOI <width> <height>`` followed by the label rows."""
    lines = [f"{MAGIC} {m.width} {m.height}"]
    lines.extend(" ".join(str(v) for v in row) for row in m.labels.tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_label_map(path):
    text = Path(path).read_text(encoding="ascii", errors="strict")
    tokens = text.split()
    if len(tokens) < 3 or tokens[0] != MAGIC:
        raise LabelMapFormatError(f"{path}: missing '{MAGIC} <width> <height>' header")
    try:
        width, height = int(tokens[1]), int(tokens[2])
        values = [int(tok) for tok in tokens[3:]]
    except ValueError:
        raise LabelMapFormatError(f"{path}: non-integer token") from None
    if width <= 0 or height <= 0:
        raise LabelMapFormatError(f"{path}: bad dimensions {width}x{height}")
    if len(values) != width * height:
        raise LabelMapFormatError(
            f"{path}: expected {width * height} labels, found {len(values)}")
    labels = np.array(values, dtype=np.int64).reshape(height, width)
    if labels.min() < 0:
        raise LabelMapFormatError(f"{path}: negative label")
    return AOIMap(labels)
