"""Synthetic gaze recordings with known spatial structure.

Each class looks at a set of Gaussian blobs with class-specific dwell
weights; the remaining ``noise`` share of samples is uniform over the
stimulus. Every recording shifts its blobs by a random per-recording jitter,
which is what makes AOI borders that cut through a blob costly: the share of
the blob that spills over the border changes from recording to recording.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from aoiadapt.gaze_data import Dataset, GazeRecording


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 2
    recordings_per_class: int = 20
    samples_per_recording: int = 300
    width: int = 200
    height: int = 200
    # blob centres (x, y), shared by all classes
    blob_centers: tuple = ((62.0, 62.0), (137.0, 137.0))
    # one row of dwell weights over the blobs per class
    blob_weights: tuple = ((0.5, 0.5), (0.5, 0.5))
    blob_spread: float = 10.0
    jitter: float = 0.0
    noise: float = 0.3
    n_stimuli: int = 4
    sample_period_ms: float = 4.0

    def __post_init__(self):
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise fraction must lie in [0, 1]")
        for cx, cy in self.blob_centers:
            if not (0 <= cx < self.width and 0 <= cy < self.height):
                raise ValueError(f"blob centre ({cx}, {cy}) outside the stimulus")
        if len(self.blob_weights) != self.n_classes:
            raise ValueError("need one row of blob weights per class")
        for row in self.blob_weights:
            if len(row) != len(self.blob_centers) or min(row) < 0 or sum(row) <= 0:
                raise ValueError("blob weights must be non-negative, one per blob")
        if self.n_stimuli < 1 or self.recordings_per_class < 1:
            raise ValueError("need at least one stimulus and one recording per class")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for key in ("blob_centers", "blob_weights"):
            if key in data:
                data[key] = tuple(tuple(float(v) for v in row) for row in data[key])
        return cls(**data)


def planted_offset_spec(offset=12.0, noise=0.3, grid=4, n_classes=2,
                        recordings_per_class=20, samples_per_recording=300,
                        size=200, blob_spread=10.0, jitter=8.0, contrast=0.2,
                        n_stimuli=4):
    """Benchmark where informative blobs sit ``offset`` px inside grid cells.

    Two blobs per class pair are placed ``offset`` pixels away from a
    ``grid`` x ``grid`` cell corner, so part of every blob spills into the
    neighbouring cells. Classes differ only in how they split their dwell
    between the blobs: class ``c`` puts ``0.5 + contrast/2`` of its blob
    samples on its preferred blob.
    """
    cell = size / grid
    # blobs just inside the corners shared by interior grid lines
    corners = [(cell * 1, cell * 1), (cell * 3, cell * 3), (cell * 3, cell * 1), (cell * 1, cell * 3)]
    centres = []
    for i in range(max(2, n_classes)):
        gx, gy = corners[i % len(corners)]
        centres.append((gx + offset, gy + offset))
    n_blobs = len(centres)
    weights = []
    for c in range(n_classes):
        row = [(0.5 - contrast / 2) / (n_blobs - 1)] * n_blobs
        row[c % n_blobs] = 0.5 + contrast / 2
        weights.append(tuple(row))
    return SynthSpec(
        n_classes=n_classes,
        recordings_per_class=recordings_per_class,
        samples_per_recording=samples_per_recording,
        width=size,
        height=size,
        blob_centers=tuple(centres),
        blob_weights=tuple(weights),
        blob_spread=blob_spread,
        jitter=jitter,
        noise=noise,
        n_stimuli=n_stimuli,
    )


def _clip(v, size):
    return np.clip(v, 0.0, np.nextafter(size, 0))


def generate_synthetic(spec, seed=0):
    """Draw a :class:`Dataset` from ``spec``; deterministic for a given seed.

    Recordings are emitted class by class and assigned to pseudo-stimuli
    round-robin, so every stimulus holds recordings of every class.
    """
    rng = np.random.default_rng(seed)
    centres = np.asarray(spec.blob_centers, dtype=float)
    n = spec.samples_per_recording
    recordings = []
    k = 0
    for c in range(spec.n_classes):
        w = np.asarray(spec.blob_weights[c], dtype=float)
        w = w / w.sum()
        for r in range(spec.recordings_per_class):
            shift = rng.normal(0.0, spec.jitter, size=centres.shape) if spec.jitter > 0 else 0.0
            own = centres + shift
            is_noise = rng.random(n) < spec.noise
            blob = rng.choice(len(centres), size=n, p=w)
            x = own[blob, 0] + rng.normal(0.0, spec.blob_spread, size=n)
            y = own[blob, 1] + rng.normal(0.0, spec.blob_spread, size=n)
            x[is_noise] = rng.uniform(0, spec.width, size=is_noise.sum())
            y[is_noise] = rng.uniform(0, spec.height, size=is_noise.sum())
            recordings.append(GazeRecording(
                recording_id=f"c{c}_r{r:03d}",
                subject_label=str(c),
                stimulus_id=f"stim{k % spec.n_stimuli}",
                t=np.arange(n) * spec.sample_period_ms,
                x=_clip(x, spec.width),
                y=_clip(y, spec.height),
            ))
            k += 1
    return Dataset(recordings, spec.width, spec.height,
                   classes=tuple(str(c) for c in range(spec.n_classes)))


def shuffle_labels(d, seed=0):
    """Copy of ``d`` with subject labels randomly permuted across recordings."""
    rng = np.random.default_rng(seed)
    labels = [d.recordings[i].subject_label for i in rng.permutation(len(d))]
    recs = [GazeRecording(r.recording_id, lab, r.stimulus_id, r.t, r.x, r.y)
            for r, lab in zip(d.recordings, labels)]
    return Dataset(recs, d.width, d.height, d.classes)
