"""Importance-driven AOI growth.

Two hill-climbing loops adapt an AOI map to a classification target. Each
iteration draws a fresh train/validation split, scores the current map,
converts the model's feature importances into a per-AOI strength, grows the
map and keeps the grown map only if the validation score does not drop.

* ``run_direct`` lets every AOI take over each 4-neighbour pixel held by a
  weaker AOI, one pixel per iteration.
* ``run_gradient`` cuts every AOI into quadrants, learns which quadrants
  matter, and pushes the AOI along the importance-weighted quadrant
  direction by up to ``max_step`` pixels.

Both growers read from the old map and write into a new one, so the result
does not depend on pixel visiting order. When several AOIs claim the same
pixel the one with the higher importance wins, then the lower label.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from aoiadapt.aoi_map import AOIMap, split_sub_aois
from aoiadapt.classifier import EnsembleParams, TreeEnsemble, average_class_accuracy
from aoiadapt.features import compute_features
from aoiadapt.gaze_data import random_train_val_split

logger = logging.getLogger(__name__)

_NO_WRITER = np.iinfo(np.int64).max


@dataclass(frozen=True)
class AdaptationConfig:
    iterations: int = 50
    val_fraction: float = 1 / 3
    max_step: int = 10
    split: str = "quadrant"
    classifier: EnsembleParams = field(default_factory=EnsembleParams)
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.max_step < 1:
            raise ValueError("max_step must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    metric_old: float
    metric_new: float
    accepted: bool
    n_labels: int
    changed: bool


@dataclass
class AdaptationTrace:
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def accepted_metrics(self):
        return [r.metric_new for r in self.records if r.accepted]

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "metric_old", "metric_new", "accepted", "n_labels"])
            for r in self.records:
                w.writerow([r.iteration, f"{r.metric_old:.6f}", f"{r.metric_new:.6f}",
                            int(r.accepted), r.n_labels])


def aggregate_importance(fi, col_meta, m):
    """Sum the clamped column importances of each AOI.

    ``col_meta`` gives the ``(aoi_label, statistic)`` of every entry of
    ``fi``. Negative importances are set to 0 before summing; labels of ``m``
    without columns get 0.
    """
    fi = np.asarray(fi, dtype=float)
    if fi.size != len(col_meta):
        raise ValueError(f"{fi.size} importances for {len(col_meta)} columns")
    present = {int(v) for v in m.label_set()}
    out = dict.fromkeys(sorted(present), 0.0)
    for value, (label, _) in zip(np.maximum(fi, 0.0), col_meta):
        if label not in present:
            raise ValueError(f"column refers to AOI {label}, absent from the map")
        out[label] += float(value)
    return out


def _lookup(fiaoi, labels):
    n = int(labels.max()) + 1
    imp = np.zeros(n)
    for lab in np.unique(labels):
        imp[lab] = fiaoi[int(lab)]
    return imp


def _priority(fiaoi, labels):
    """Rank of every label: 0 for the strongest claimant.

    Higher importance ranks first, equal importance falls back to the lower
    label id.
    """
    present = [int(v) for v in np.unique(labels)]
    ranked = sorted(present, key=lambda a: (-fiaoi[a], a))
    prio = np.full(int(labels.max()) + 1, _NO_WRITER, dtype=np.int64)
    for rank, a in enumerate(ranked):
        prio[a] = rank
    return prio, np.array(ranked, dtype=np.int64)


def _resolve(labels, best, by_rank):
    written = best != _NO_WRITER
    out = labels.copy()
    out[written] = by_rank[best[written]]
    return AOIMap(out)


def grow_direct(fiaoi, m):
    """One step of all-direction growth.

    A pixel with label ``a`` overwrites each 4-neighbour whose label is
    strictly less important than ``a``.
    """
    L = m.labels
    imp = _lookup(fiaoi, L)
    prio, by_rank = _priority(fiaoi, L)
    H, W = L.shape
    best = np.full(L.shape, _NO_WRITER, dtype=np.int64)
    target_imp = imp[L]
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        # source pixel of target q is q - (dy, dx)
        src = np.full(L.shape, -1, dtype=np.int64)
        ys = slice(max(dy, 0), H + min(dy, 0))
        xs = slice(max(dx, 0), W + min(dx, 0))
        ys_src = slice(max(-dy, 0), H + min(-dy, 0))
        xs_src = slice(max(-dx, 0), W + min(-dx, 0))
        src[ys, xs] = L[ys_src, xs_src]
        valid = src >= 0
        s = np.where(valid, src, 0)
        claim = valid & (imp[s] > target_imp)
        best = np.minimum(best, np.where(claim, prio[s], _NO_WRITER))
    return _resolve(L, best, by_rank)


def importance_to_step(fiaoi, max_step=10):
    """Growth distance per AOI, proportional to its importance.

    The strongest AOI moves ``max_step`` pixels, every other AOI at least one.
    """
    if max_step < 1:
        raise ValueError("max_step must be >= 1")
    top = max(fiaoi.values(), default=0.0)
    if top <= 0:
        return {a: 1 for a in fiaoi}
    return {a: max(1, int(math.floor(v / top * max_step + 0.5))) for a, v in fiaoi.items()}


def compute_gradient_direction(fi_sub, split):
    """Unit growth direction per parent AOI.

    The importance-weighted sum of the parent's sub-AOI vectors is
    normalized; parents whose sum cancels get the zero vector and do not
    grow.
    """
    if set(fi_sub) != set(split.parent):
        raise ValueError("importances must cover exactly the sub-AOIs of the split")
    acc, scale = {}, {}
    for j, p in split.parent.items():
        w = float(fi_sub[j])
        acc[p] = acc.get(p, np.zeros(2)) + w * np.asarray(split.vectors[j], dtype=float)
        scale[p] = scale.get(p, 0.0) + abs(w)
    dirs = {}
    for p in sorted(acc):
        norm = float(np.hypot(*acc[p]))
        dirs[p] = acc[p] / norm if norm > 1e-12 * max(scale[p], 1e-300) else np.zeros(2)
    return dirs


def grow_gradient(dirs, steps, fiaoi, m):
    """March every pixel of an AOI along its direction and overwrite weaker AOIs.

    For a pixel ``p`` of AOI ``a`` the targets are
    ``floor(p + t * dirs[a] + 0.5)`` for ``t = 1 .. steps[a]``; targets
    outside the stimulus are skipped.
    """
    L = m.labels
    H, W = L.shape
    imp = _lookup(fiaoi, L)
    prio, by_rank = _priority(fiaoi, L)
    best = np.full(L.size, _NO_WRITER, dtype=np.int64)
    for a in np.unique(L):
        a = int(a)
        d = np.asarray(dirs.get(a, (0.0, 0.0)), dtype=float)
        if not d.any():
            continue
        ys, xs = np.nonzero(L == a)
        xs, ys = xs.astype(float), ys.astype(float)
        for t in range(1, int(steps[a]) + 1):
            qx = np.floor(xs + t * d[0] + 0.5).astype(np.int64)
            qy = np.floor(ys + t * d[1] + 0.5).astype(np.int64)
            inb = (qx >= 0) & (qx < W) & (qy >= 0) & (qy < H)
            qx, qy = qx[inb], qy[inb]
            hit = imp[L[qy, qx]] < imp[a]
            if hit.any():
                np.minimum.at(best, qy[hit] * W + qx[hit], prio[a])
    return _resolve(L, best.reshape(H, W), by_rank)


def _fit(d, m, model_factory, rng):
    fm = compute_features(d, m)
    model = model_factory().fit(fm.values, fm.subject_labels, rng)
    return model, fm


def _score(model, d, m):
    fm = compute_features(d, m)
    return average_class_accuracy(model.predict(fm.values), fm.subject_labels)


def _default_factory(config):
    return lambda: TreeEnsemble(config.classifier)


def _run(train, m0, config, rng, model_factory, propose, name):
    config = config or AdaptationConfig()
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    model_factory = model_factory or _default_factory(config)
    if len(train.classes) < 2:
        raise ValueError("adaptation needs at least two classes")
    trace = AdaptationTrace()
    m = m0
    for it in range(config.iterations):
        tr, va = random_train_val_split(train, config.val_fraction, rng)
        model, fm = _fit(tr, m, model_factory, rng)
        metric = _score(model, va, m)
        fi = model.importance(fm.values, fm.subject_labels, rng)
        fiaoi = aggregate_importance(fi, fm.col_meta, m)
        m_new = propose(tr, m, fiaoi, rng)
        changed = m_new != m
        if changed:
            model_new, _ = _fit(tr, m_new, model_factory, rng)
            metric_new = _score(model_new, va, m_new)
        else:
            metric_new = metric
        accepted = metric_new >= metric
        if accepted:
            m = m_new
        trace.records.append(IterationRecord(it, metric, metric_new, accepted,
                                             int(m.label_set().size), bool(changed)))
        if config.keep_snapshots and accepted and changed:
            trace.snapshots[it] = m
        logger.debug("%s iter %d: %.4f -> %.4f %s", name, it, metric, metric_new,
                     "accepted" if accepted else "rejected")
    return m, trace


def run_direct(train, m0, config=None, rng=None, model_factory=None):
    """Adapt ``m0`` on ``train`` with one-pixel all-direction growth.

    Returns the final map and the per-iteration trace. ``rng`` may be a
    ``numpy.random.Generator`` or an integer seed.
    """
    def propose(tr, m, fiaoi, rng):
        return grow_direct(fiaoi, m)

    return _run(train, m0, config, rng, model_factory, propose, "direct")


def run_gradient(train, m0, config=None, rng=None, model_factory=None):
    """Adapt ``m0`` on ``train`` with sub-AOI gradient growth."""
    config = config or AdaptationConfig()
    model_factory = model_factory or _default_factory(config)

    def propose(tr, m, fiaoi, rng):
        split = split_sub_aois(m, config.split)
        sub_map = split.as_map()
        sub_model, fm_sub = _fit(tr, sub_map, model_factory, rng)
        fi_sub = sub_model.importance(fm_sub.values, fm_sub.subject_labels, rng)
        fi_sub_aoi = aggregate_importance(fi_sub, fm_sub.col_meta, sub_map)
        dirs = compute_gradient_direction(fi_sub_aoi, split)
        steps = importance_to_step(fiaoi, config.max_step)
        return grow_gradient(dirs, steps, fiaoi, m)

    return _run(train, m0, config, rng, model_factory, propose, "gradient")
