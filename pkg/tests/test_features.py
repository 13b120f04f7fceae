import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoiadapt.aoi_init import grid_init
from aoiadapt.aoi_map import AOIMap
from aoiadapt.features import STATISTICS, aoi_statistics, compute_features
from aoiadapt.gaze_data import Dataset
from conftest import make_recording
from oracles import stats_reference

IDX = {s: i for i, s in enumerate(STATISTICS)}


def test_two_points():
    s = aoi_statistics([1, 3], [2, 4])
    assert s[IDX["mean_x"]] == 2 and s[IDX["mean_y"]] == 3
    assert s[IDX["median_x"]] == 2
    assert s[IDX["std_x"]] == pytest.approx(math.sqrt(2), rel=1e-12)
    assert s[IDX["skew_x"]] == 0
    assert s[IDX["count"]] == 2
    np.testing.assert_allclose(s, stats_reference([1, 3], [2, 4]), rtol=1e-12)


def test_symmetric_has_zero_skew():
    assert aoi_statistics([1, 2, 3], [0, 0, 0])[IDX["skew_x"]] == 0


def test_empty_is_zero():
    np.testing.assert_array_equal(aoi_statistics([], []), np.zeros(11))


def test_length_mismatch():
    with pytest.raises(ValueError):
        aoi_statistics([1, 2], [1])


def test_mode_rounds_and_prefers_smallest():
    s = aoi_statistics([1.4, 0.6, 2.5, 3.49], [0, 0, 0, 0])
    # rounded values 1, 1, 3, 3 -> tie, smallest wins
    assert s[IDX["mode_x"]] == 1


def test_constant_values_have_zero_spread():
    s = aoi_statistics([0.1] * 7, [0.3] * 7)
    assert s[IDX["std_x"]] == pytest.approx(0.0, abs=1e-15)
    assert s[IDX["skew_x"]] == 0 and s[IDX["skew_y"]] == 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 500, allow_nan=False), st.floats(0, 500, allow_nan=False)),
                min_size=0, max_size=40))
def test_matches_reference(points):
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    got = aoi_statistics(xs, ys)
    want = stats_reference(xs, ys)
    for i, (g, w) in enumerate(zip(got, want)):
        if STATISTICS[i].startswith("skew") and abs(w) > 0 and np.var(xs if i % 2 == 0 else ys) < 1e-9:
            continue
        assert g == pytest.approx(w, rel=1e-9, abs=1e-9), STATISTICS[i]


def one_rec(xs, ys, w=10, h=10):
    return Dataset([make_recording("a", "0", "s", xs, ys)], w, h)


def test_single_aoi_composition():
    fm = compute_features(one_rec([1, 3], [2, 4]), AOIMap(np.zeros((10, 10))))
    assert fm.shape == (1, 11)
    np.testing.assert_allclose(fm.values[0], aoi_statistics([1, 3], [2, 4]))
    assert fm.column_names[0] == "aoi0_mean_x"


def test_empty_aoi_columns_are_zero():
    m = AOIMap(np.repeat([[0] * 5 + [1] * 5], 10, axis=0))
    fm = compute_features(one_rec([1, 2, 3], [1, 2, 3]), m)
    assert fm.shape == (1, 22)
    np.testing.assert_array_equal(fm.values[0, 11:], 0)
    assert [a for a, _ in fm.col_meta[::11]] == [0, 1]


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        compute_features(one_rec([1], [1]), AOIMap(np.zeros((5, 5))))


def test_wm_sized_matrix():
    gen = np.random.default_rng(0)
    recs = [make_recording(f"r{i}", str(i % 11), f"s{i % 15}", gen.uniform(0, 400, 50), gen.uniform(0, 300, 50))
            for i in range(165)]
    fm = compute_features(Dataset(recs, 400, 300), grid_init(400, 300, 4, 4))
    assert fm.shape == (165, 176)
    assert np.all(np.isfinite(fm.values))


def test_vectorized_matches_per_aoi_loop(small_dataset):
    m = grid_init(20, 20, 3, 3)
    fm = compute_features(small_dataset, m)
    for row, rec in zip(fm.values, small_dataset.recordings):
        lab = m.label_at(rec.x, rec.y)
        for k, a in enumerate(m.label_set()):
            sel = lab == a
            np.testing.assert_allclose(row[k * 11:(k + 1) * 11], aoi_statistics(rec.x[sel], rec.y[sel]),
                                       rtol=1e-10, atol=1e-10)


def test_counts_sum_to_samples(small_dataset):
    fm = compute_features(small_dataset, grid_init(20, 20, 4, 4))
    counts = fm.values[:, 10::11].sum(axis=1)
    assert counts.tolist() == [len(r) for r in small_dataset.recordings]


def test_row_permutation(small_dataset):
    m = grid_init(20, 20, 2, 2)
    perm = [5, 3, 0, 11, 1, 2, 4, 6, 8, 7, 10, 9]
    a = compute_features(small_dataset, m)
    b = compute_features(small_dataset.subset(perm), m)
    np.testing.assert_array_equal(a.values[perm], b.values)


def test_translation_equivariance():
    gen = np.random.default_rng(3)
    xs, ys = gen.uniform(0, 10, 40), gen.uniform(0, 10, 40)
    grid = np.zeros((10, 10), dtype=int)
    grid[:, 5:] = 1
    shift = 7
    big = np.full((20, 20), 2)
    big[shift:shift + 10, shift:shift + 10] = grid
    a = compute_features(one_rec(xs, ys), AOIMap(grid))
    b = compute_features(one_rec(xs + shift, ys + shift, 20, 20), AOIMap(big))
    va = a.values[0].reshape(-1, 11)
    vb = b.values[0].reshape(-1, 11)[:2]
    shifted = [IDX[s] for s in ("mean_x", "mean_y", "median_x", "median_y", "mode_x", "mode_y")]
    invariant = [IDX[s] for s in ("std_x", "std_y", "skew_x", "skew_y", "count")]
    occupied = va[:, IDX["count"]] > 0
    np.testing.assert_allclose(vb[occupied][:, shifted], va[occupied][:, shifted] + shift, atol=1e-9)
    np.testing.assert_allclose(vb[:, invariant], va[:, invariant], atol=1e-9)


def test_csv_export(tmp_path, small_dataset):
    fm = compute_features(small_dataset, grid_init(20, 20, 2, 2))
    p = tmp_path / "fm.csv"
    fm.to_csv(p)
    header = p.read_text().splitlines()[0].split(",")
    assert header[:3] == ["recording_id", "subject_label", "aoi0_mean_x"]
    assert len(header) == 2 + 44
