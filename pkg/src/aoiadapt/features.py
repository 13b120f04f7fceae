"""Per-AOI gaze statistics.

Every AOI contributes eleven columns to the feature matrix, in the order of
:data:`STATISTICS`. Undefined statistics are replaced by 0 so that the matrix
is always finite: std needs two samples, skewness three samples and non-zero
spread, and an AOI without samples yields eleven zeros.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STATISTICS = (
    "mean_x", "mean_y", "median_x", "median_y", "mode_x", "mode_y",
    "std_x", "std_y", "skew_x", "skew_y", "count",
)
N_STATS = len(STATISTICS)

# relative floor below which the second central moment counts as zero
_M2_EPS = 1e-24


def _round_half_up(v):
    return np.floor(np.asarray(v, dtype=float) + 0.5)


def _stats_1d(v):
    n = v.size
    if n == 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    mean = float(np.mean(v))
    median = float(np.median(v))
    vals, counts = np.unique(_round_half_up(v), return_counts=True)
    mode = float(vals[np.argmax(counts)])
    dev = v - mean
    m2 = float(np.mean(dev**2))
    std = float(np.sqrt(m2 * n / (n - 1))) if n >= 2 else 0.0
    if n >= 3 and m2 > _M2_EPS * (mean * mean + 1.0):
        skew = float(np.mean(dev**3)) / m2**1.5
    else:
        skew = 0.0
    return mean, median, mode, std, skew


def aoi_statistics(xs, ys):
    """Eleven statistics of the gaze points ``(xs, ys)`` inside one AOI."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size != ys.size:
        raise ValueError(f"length mismatch: {xs.size} x values, {ys.size} y values")
    sx, sy = _stats_1d(xs), _stats_1d(ys)
    out = []
    for a, b in zip(sx, sy):
        out.extend((a, b))
    out.append(float(xs.size))
    return np.array(out)


def _grouped_stats(keys, v, n_groups):
    """Columns mean, median, mode, std, skew of ``v`` per group, shape (G, 5)."""
    out = np.zeros((n_groups, 5))
    if v.size == 0:
        return out
    n = np.bincount(keys, minlength=n_groups).astype(float)
    has = n > 0
    safe_n = np.where(has, n, 1.0)
    mean = np.bincount(keys, weights=v, minlength=n_groups) / safe_n

    order = np.lexsort((v, keys))
    sv = v[order]
    starts = np.concatenate(([0], np.cumsum(n)[:-1])).astype(np.intp)
    ni = n.astype(np.intp)
    lo = starts + np.maximum(ni - 1, 0) // 2
    hi = starts + ni // 2
    median = np.where(has, 0.5 * (sv[np.minimum(lo, v.size - 1)] + sv[np.minimum(hi, v.size - 1)]), 0.0)

    r = _round_half_up(v)
    order = np.lexsort((r, keys))
    sk, sr = keys[order], r[order]
    new_run = np.ones(sk.size, dtype=bool)
    new_run[1:] = (sk[1:] != sk[:-1]) | (sr[1:] != sr[:-1])
    run_start = np.flatnonzero(new_run)
    run_len = np.diff(np.append(run_start, sk.size))
    run_key, run_val = sk[run_start], sr[run_start]
    pick = np.lexsort((run_val, -run_len, run_key))
    first = np.ones(pick.size, dtype=bool)
    first[1:] = run_key[pick][1:] != run_key[pick][:-1]
    mode = np.zeros(n_groups)
    mode[run_key[pick][first]] = run_val[pick][first]

    dev = v - mean[keys]
    m2 = np.bincount(keys, weights=dev**2, minlength=n_groups) / safe_n
    m3 = np.bincount(keys, weights=dev**3, minlength=n_groups) / safe_n
    std = np.where(n >= 2, np.sqrt(m2 * n / np.maximum(n - 1, 1)), 0.0)
    ok = (n >= 3) & (m2 > _M2_EPS * (mean * mean + 1.0))
    skew = np.zeros(n_groups)
    skew[ok] = m3[ok] / m2[ok] ** 1.5

    out[:, 0] = np.where(has, mean, 0.0)
    out[:, 1] = median
    out[:, 2] = mode
    out[:, 3] = std
    out[:, 4] = skew
    return out


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Recordings x (AOIs x 11) feature values.

    ``aoi_labels`` lists the AOIs in column order; ``col_meta[k]`` is the
    ``(aoi_label, statistic)`` pair of column ``k``.
    """

    values: np.ndarray
    recording_ids: tuple
    subject_labels: tuple
    aoi_labels: np.ndarray

    @property
    def col_meta(self):
        return [(int(a), s) for a in self.aoi_labels for s in STATISTICS]

    @property
    def column_names(self):
        return [f"aoi{a}_{s}" for a, s in self.col_meta]

    @property
    def column_aoi(self):
        """AOI label of every column."""
        return np.repeat(self.aoi_labels, N_STATS)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["recording_id", "subject_label", *self.column_names])
            for rid, lab, row in zip(self.recording_ids, self.subject_labels, self.values):
                w.writerow([rid, lab, *(repr(float(v)) for v in row)])


def compute_features(d, m):
    """Feature matrix of dataset ``d`` under AOI map ``m``.

    Columns cover every label currently in ``m`` in ascending order, whether
    or not any recording has samples there.
    """
    if (d.width, d.height) != (m.width, m.height):
        raise ValueError(
            f"dataset is {d.width}x{d.height} but AOI map is {m.width}x{m.height}")
    aoi_labels = m.label_set()
    n_aoi = aoi_labels.size
    n_rec = len(d)
    rec, xs, ys = d.flat
    lab_idx = np.searchsorted(aoi_labels, m.label_at(xs, ys))
    keys = rec * n_aoi + lab_idx
    n_groups = n_rec * n_aoi

    gx = _grouped_stats(keys, xs, n_groups)
    gy = _grouped_stats(keys, ys, n_groups)
    stats = np.empty((n_groups, N_STATS))
    stats[:, 0:10:2] = gx
    stats[:, 1:10:2] = gy
    stats[:, 10] = np.bincount(keys, minlength=n_groups)
    return FeatureMatrix(
        values=stats.reshape(n_rec, n_aoi * N_STATS),
        recording_ids=tuple(r.recording_id for r in d.recordings),
        subject_labels=tuple(r.subject_label for r in d.recordings),
        aoi_labels=aoi_labels,
    )
