"""Initial AOI maps: grid, gaze-point K-Means and heatmap watershed."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from aoiadapt.aoi_map import AOIMap

logger = logging.getLogger(__name__)


def grid_init(width, height, rows, cols):
    """Regular ``rows`` x ``cols`` grid, labels assigned row-major.

    Cell ``(r, c)`` spans pixel rows ``floor(r*height/rows)`` up to
    ``floor((r+1)*height/rows)`` and the analogous columns.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and one column")
    if rows > height or cols > width:
        raise ValueError(f"{rows}x{cols} grid does not fit a {width}x{height} stimulus")
    row_edges = (np.arange(rows + 1) * height) // rows
    col_edges = (np.arange(cols + 1) * width) // cols
    row_of = np.searchsorted(row_edges, np.arange(height), side="right") - 1
    col_of = np.searchsorted(col_edges, np.arange(width), side="right") - 1
    return AOIMap(row_of[:, None] * cols + col_of[None, :])


def _pixel_centres(width, height):
    ys, xs = np.indices((height, width))
    return np.column_stack([xs.ravel() + 0.5, ys.ravel() + 0.5])


def _sq_dist(a, b):
    return ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)


def kmeans(points, k, rng, max_iter=100, tol=1e-6):
    """Lloyd's algorithm with k-means++ seeding; returns the centroids."""
    n = points.shape[0]
    centres = np.empty((k, points.shape[1]))
    centres[0] = points[rng.integers(n)]
    d2 = ((points - centres[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            j = rng.integers(n)
        else:
            j = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            j = min(j, n - 1)
        centres[i] = points[j]
        d2 = np.minimum(d2, ((points - centres[i]) ** 2).sum(axis=1))

    for _ in range(max_iter):
        assign = np.argmin(_sq_dist(points, centres), axis=1)
        new = centres.copy()
        for c in range(k):
            members = points[assign == c]
            if len(members):
                new[c] = members.mean(axis=0)
        shift = np.abs(new - centres).max()
        centres = new
        if shift <= tol:
            break
    return centres


def voronoi_labels(centres, width, height):
    """Label each pixel with its nearest centre (lowest index on ties), relabelled densely."""
    px = _pixel_centres(width, height)
    nearest = np.empty(px.shape[0], dtype=np.int64)
    for start in range(0, px.shape[0], 65536):
        chunk = px[start:start + 65536]
        nearest[start:start + 65536] = np.argmin(_sq_dist(chunk, centres), axis=1)
    _, dense = np.unique(nearest, return_inverse=True)
    return AOIMap(dense.reshape(height, width))


def kmeans_init(d, k, seed=0, max_iter=100):
    """Cluster all gaze points of ``d`` and extend the clusters to a Voronoi partition."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _, xs, ys = d.flat
    if xs.size < k:
        raise ValueError(f"{xs.size} gaze samples cannot form {k} clusters")
    points = np.column_stack([xs, ys])
    n_distinct = np.unique(points, axis=0).shape[0]
    if n_distinct < k:
        warnings.warn(f"only {n_distinct} distinct gaze points; reducing k from {k}")
        k = n_distinct
    centres = kmeans(points, k, np.random.default_rng(seed), max_iter=max_iter)
    return voronoi_labels(centres, d.width, d.height)


@dataclass(frozen=True, eq=False)
class Heatmap:
    density: np.ndarray

    @property
    def height(self):
        return self.density.shape[0]

    @property
    def width(self):
        return self.density.shape[1]


def _axis_kernel(coords, size, sigma):
    centres = np.arange(size) + 0.5
    diff = centres[None, :] - coords[:, None]
    k = np.exp(-0.5 * (diff / sigma) ** 2)
    k[np.abs(diff) > 3 * sigma] = 0.0
    return k


def compute_heatmap(d, sigma=25.0, chunk=4096):
    """Normalized sum of Gaussian kernels placed on every gaze sample.

    Kernels are evaluated at pixel centres and cut off beyond ``3 * sigma``
    along each axis.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    _, xs, ys = d.flat
    density = np.zeros((d.height, d.width))
    for s in range(0, xs.size, chunk):
        gx = _axis_kernel(xs[s:s + chunk], d.width, sigma)
        gy = _axis_kernel(ys[s:s + chunk], d.height, sigma)
        density += gy.T @ gx
    total = density.sum()
    if total > 0:
        density /= total
    return Heatmap(density)


_NEIGHBOURS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


def _shifted(a, dy, dx, fill):
    """``out[y, x] = a[y + dy, x + dx]``, ``fill`` outside."""
    H, W = a.shape
    out = np.full(a.shape, fill, dtype=a.dtype)
    if abs(dy) >= H or abs(dx) >= W:
        return out
    out[max(-dy, 0):H - max(dy, 0), max(-dx, 0):W - max(dx, 0)] = \
        a[max(dy, 0):H - max(-dy, 0), max(dx, 0):W - max(-dx, 0)]
    return out


def steepest_ascent_basins(f):
    """Basin id per pixel, following the steepest uphill 8-neighbour.

    Pixels with no strictly higher neighbour are tops; connected groups of
    tops (necessarily of equal height) form one basin. Returns the basin
    map (ids ``0..n-1``) and ``n``.
    """
    H, W = f.shape
    flat_idx = np.arange(H * W).reshape(H, W)
    best_val = f.copy()
    target = flat_idx.copy()
    for dy, dx in _NEIGHBOURS:
        nv = _shifted(f, dy, dx, -np.inf)
        ni = _shifted(flat_idx, dy, dx, -1)
        better = nv > best_val
        best_val = np.where(better, nv, best_val)
        target = np.where(better, ni, target)
    is_top = target == flat_idx
    tops, n_tops = ndimage.label(is_top, structure=np.ones((3, 3)))
    # path compression by repeated pointer doubling
    ptr = target.ravel()
    while True:
        nxt = ptr[ptr]
        if np.array_equal(nxt, ptr):
            break
        ptr = nxt
    basin = tops.ravel()[ptr].reshape(H, W) - 1
    return basin, n_tops


def gradient_segment_heatmap(h, smoothing=2.0, merge_threshold=0.05):
    """Watershed-style segmentation of a heatmap into AOIs.

    The smoothed density is partitioned into steepest-ascent basins. A basin
    whose peak is below ``merge_threshold`` times the global peak is merged
    into the adjacent basin with the highest density along their common
    border, weakest basins first. Surviving basins are relabelled
    0..n-1 in row-major order of their peaks.
    """
    f = h.density.astype(float)
    if smoothing > 0:
        f = ndimage.gaussian_filter(f, smoothing, mode="nearest", truncate=3.0)
    if not np.any(f > 0):
        return AOIMap(np.zeros(f.shape, dtype=np.int64))
    basin, n = steepest_ascent_basins(f)

    flat_f = f.ravel()
    peak = np.full(n, -np.inf)
    np.maximum.at(peak, basin.ravel(), flat_f)
    peak_pos = np.full(n, f.size)
    at_peak = flat_f == peak[basin.ravel()]
    np.minimum.at(peak_pos, basin.ravel()[at_peak], np.flatnonzero(at_peak))

    # pass height between touching basins: max over adjacent pixel pairs of
    # the lower of the two densities
    saddle = {}
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        nb = _shifted(basin, dy, dx, -1)
        nf = _shifted(f, dy, dx, -np.inf)
        mask = (nb >= 0) & (nb != basin)
        a, b = basin[mask], nb[mask]
        h_pair = np.minimum(f[mask], nf[mask])
        for i, j, v in zip(a.tolist(), b.tolist(), h_pair.tolist()):
            key = (i, j) if i < j else (j, i)
            if v > saddle.get(key, -np.inf):
                saddle[key] = v

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    threshold = merge_threshold * f.max()
    for b in sorted(range(n), key=lambda i: (peak[i], peak_pos[i])):
        if peak[b] >= threshold:
            continue
        rb = find(b)
        cands = {}
        for (i, j), v in saddle.items():
            ri, rj = find(i), find(j)
            if ri == rj or rb not in (ri, rj):
                continue
            other = rj if ri == rb else ri
            cands[other] = max(cands.get(other, -np.inf), v)
        if not cands:
            continue
        group_peak = {}
        for i in range(n):
            r = find(i)
            group_peak[r] = max(group_peak.get(r, -np.inf), peak[i])
        target = max(cands, key=lambda o: (cands[o], group_peak[o], -o))
        parent[rb] = target

    roots = np.array([find(i) for i in range(n)])
    top = {}
    for i in range(n):
        key = (-peak[i], peak_pos[i])
        if roots[i] not in top or key < top[roots[i]]:
            top[roots[i]] = key
    relabel = np.zeros(n, dtype=np.int64)
    for new, r in enumerate(sorted(top, key=lambda r: top[r][1])):
        relabel[r] = new
    return AOIMap(relabel[roots[basin]])
