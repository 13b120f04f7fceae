"""Loading, validating and splitting gaze recordings.

Recordings are read from a flat CSV with one gaze sample per row::

    recording_id,subject_label,stimulus_id,t,x,y

Samples are grouped by ``recording_id`` (first appearance order is kept) and
sorted by time inside each recording.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("recording_id", "subject_label", "stimulus_id", "t", "x", "y")


class DataFormatError(ValueError):
    """Raised when a gaze CSV cannot be parsed."""


@dataclass(frozen=True, eq=False)
class GazeRecording:
    """One subject viewing one stimulus.

    The samples are stored column-wise: ``t`` in milliseconds and ``x``/``y``
    in stimulus pixels, all float arrays of equal length ordered by ``t``.
    """

    recording_id: str
    subject_label: str
    stimulus_id: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if not (t.shape == x.shape == y.shape) or t.ndim != 1:
            raise ValueError("t, x and y must be 1-d arrays of equal length")
        if t.size == 0:
            raise ValueError(f"recording {self.recording_id!r} has no samples")
        if np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, x, y = t[order], x[order], y[order]
        for name, arr in (("t", t), ("x", x), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.t.size


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of recordings on a ``width`` x ``height`` stimulus."""

    recordings: tuple
    width: int
    height: int
    classes: tuple = ()
    removed_recordings: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("stimulus width and height must be positive")
        recs = tuple(self.recordings)
        object.__setattr__(self, "recordings", recs)
        present = {r.subject_label for r in recs}
        if not self.classes:
            object.__setattr__(self, "classes", tuple(sorted(present)))
        else:
            object.__setattr__(self, "classes", tuple(self.classes))
            missing = present - set(self.classes)
            if missing:
                raise ValueError(f"labels {sorted(missing)} not in classes")

    def __len__(self):
        return len(self.recordings)

    @property
    def labels(self):
        return [r.subject_label for r in self.recordings]

    @property
    def stimulus_ids(self):
        return sorted({r.stimulus_id for r in self.recordings})

    @cached_property
    def flat(self):
        """All samples concatenated: ``(recording_index, x, y)`` arrays."""
        if not self.recordings:
            empty = np.zeros(0)
            return np.zeros(0, dtype=np.intp), empty, empty
        lengths = [len(r) for r in self.recordings]
        rec = np.repeat(np.arange(len(self.recordings)), lengths)
        xs = np.concatenate([r.x for r in self.recordings])
        ys = np.concatenate([r.y for r in self.recordings])
        return rec, xs, ys

    def subset(self, indices):
        """Dataset restricted to the recordings at ``indices`` (order kept)."""
        recs = [self.recordings[i] for i in indices]
        return Dataset(recs, self.width, self.height, self.classes)


def _round_half_up(v):
    return int(math.floor(v + 0.5))


def load_dataset(path, width, height, oob_policy="drop"):
    """Read a gaze CSV into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        CSV with header ``recording_id,subject_label,stimulus_id,t,x,y``.
    width, height : int
        Stimulus size in pixels. Valid coordinates are ``0 <= x < width``
        and ``0 <= y < height``.
    oob_policy : {'drop', 'clamp'}
        What to do with samples outside the stimulus. ``clamp`` moves them to
        the nearest border pixel.

    Recordings left without samples are removed; the number removed is kept
    in ``Dataset.removed_recordings`` and reported as a warning.
    """
    if oob_policy not in ("drop", "clamp"):
        raise ValueError(f"unknown out-of-bounds policy {oob_policy!r}")
    path = Path(path)
    groups = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise DataFormatError(f"{path}: missing columns {missing}")
        idx = [header.index(c) for c in CSV_COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rid, label, stim = (row[i].strip() for i in idx[:3])
                t, x, y = (float(row[i]) for i in idx[3:])
            except (IndexError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not all(math.isfinite(v) for v in (t, x, y)):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            g = groups.setdefault(rid, [label, stim, [], [], []])
            if g[0] != label or g[1] != stim:
                raise DataFormatError(
                    f"{path}:{lineno}: recording {rid!r} changes label or stimulus")
            g[2].append(t)
            g[3].append(x)
            g[4].append(y)
    if not groups:
        raise DataFormatError(f"{path}: no data rows")

    recordings = []
    removed = 0
    for rid, (label, stim, ts, xs, ys) in groups.items():
        t, x, y = np.array(ts), np.array(xs), np.array(ys)
        if oob_policy == "clamp":
            x = np.clip(x, 0, width - 1)
            y = np.clip(y, 0, height - 1)
        else:
            keep = (x >= 0) & (x < width) & (y >= 0) & (y < height)
            t, x, y = t[keep], x[keep], y[keep]
        if t.size == 0:
            removed += 1
            continue
        recordings.append(GazeRecording(rid, label, stim, t, x, y))
    if removed:
        warnings.warn(f"{removed} recording(s) had no in-bounds samples and were removed")
    return Dataset(recordings, width, height, removed_recordings=removed)


def save_dataset(d, path):
    """Write ``d`` in the CSV layout read by :func:`load_dataset`."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in d.recordings:
            for t, x, y in zip(r.t, r.x, r.y):
                w.writerow([r.recording_id, r.subject_label, r.stimulus_id,
                            repr(float(t)), repr(float(x)), repr(float(y))])


def stimulus_holdout_split(d, test_fraction=0.25, seed=0):
    """Split recordings so that no stimulus occurs in both parts.

    ``round(test_fraction * n_stimuli)`` stimuli (at least one, at most
    ``n_stimuli - 1``) are drawn for the test part.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    stimuli = d.stimulus_ids
    if len(stimuli) < 2:
        raise ValueError("stimulus holdout needs at least two distinct stimuli")
    n_test = min(max(1, _round_half_up(test_fraction * len(stimuli))), len(stimuli) - 1)
    rng = np.random.default_rng(seed)
    chosen = {stimuli[i] for i in rng.choice(len(stimuli), size=n_test, replace=False)}
    test_idx = [i for i, r in enumerate(d.recordings) if r.stimulus_id in chosen]
    train_idx = [i for i, r in enumerate(d.recordings) if r.stimulus_id not in chosen]
    return d.subset(train_idx), d.subset(test_idx)


def random_train_val_split(d, val_fraction, rng):
    """Stratified random split of recordings into train and validation parts.

    Every class with at least two recordings contributes
    ``round(val_fraction * n_class)`` recordings (clipped to ``[1, n_class - 1]``)
    to validation; singleton classes stay in train. ``rng`` is advanced, so
    consecutive calls give different splits.
    """
    if len(d) == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    labels = d.labels
    val_idx = []
    for c in d.classes:
        members = [i for i, lab in enumerate(labels) if lab == c]
        if len(members) < 2:
            continue
        n_val = min(max(1, _round_half_up(val_fraction * len(members))), len(members) - 1)
        perm = rng.permutation(len(members))
        val_idx.extend(members[j] for j in perm[:n_val])
    val_set = set(val_idx)
    train_idx = [i for i in range(len(d)) if i not in val_set]
    return d.subset(train_idx), d.subset(sorted(val_set))
