import numpy as np
import pytest

from annr.exceptions import DuplicatePointError, InvalidInputError
from annr.spatial_index import Dataset, SpatialIndex, build, linear_scan_nearest


def test_single_point_index():
    ix = build([(0.0, 0.0)])
    assert len(ix) == 1
    assert ix.nearest([3.0, 4.0]) == (0, 5.0)


def test_empty_input_rejected():
    with pytest.raises(InvalidInputError):
        SpatialIndex(np.zeros((0, 2)))


def test_duplicates_rejected():
    with pytest.raises(DuplicatePointError):
        SpatialIndex([(0, 0), (1, 1), (0, 0)])
    ix = SpatialIndex([(0, 0), (1, 1)])
    with pytest.raises(DuplicatePointError):
        ix.insert([1, 1])
    with pytest.raises(InvalidInputError):
        ix.insert([1, 1, 1])


def test_nearest_examples():
    ix = SpatialIndex([(0, 0), (1, 0)])
    j, d = ix.nearest([0.2, 0])
    assert j == 0 and d == pytest.approx(0.2)
    # equidistant: lower index wins
    assert ix.nearest([0.5, 3.0])[0] == 0
    ix2 = SpatialIndex([(1, 0), (0, 0), (-1, 0)])
    assert ix2.nearest([0, 5])[0] == 1
    assert ix2.nearest([0, 0], exclude={1})[0] == 0


def test_all_excluded_raises():
    ix = SpatialIndex([(0, 0), (1, 0)])
    with pytest.raises(InvalidInputError):
        ix.nearest([0, 0], exclude={0, 1})


def test_matches_linear_scan_random():
    rng = np.random.default_rng(7)
    pts = rng.random((500, 3))
    ix = SpatialIndex(pts)
    for q in rng.random((500, 3)):
        j, d = ix.nearest(q)
        jr, dr = linear_scan_nearest(pts, q)
        assert j == jr and abs(d - dr) <= 1e-12


def test_sequential_inserts_match_linear_scan():
    rng = np.random.default_rng(8)
    pts = rng.random((1000, 2))
    ix = SpatialIndex(pts[:3])
    for k, p in enumerate(pts[3:], start=3):
        assert ix.insert(p) == k
        assert ix.nearest(p) == (k, 0.0)
        if k % 37 == 0:
            for q in rng.random((20, 2)):
                assert ix.nearest(q)[0] == linear_scan_nearest(pts[: k + 1], q)[0]
    excl = {5, 17, 999}
    for q in rng.random((100, 2)):
        assert ix.nearest(q, excl)[0] == linear_scan_nearest(pts, q, excl)[0]


def test_ties_across_tree_and_buffer():
    # the buffered point ties with a tree point; the lower index still wins
    ix = SpatialIndex([(0.0, 1.0), (5.0, 5.0), (6.0, 6.0), (7.0, 7.0), (8.0, 8.0)])
    k = ix.insert([0.0, -1.0])
    assert ix.nearest([0.0, 0.0])[0] == 0
    assert ix.nearest([0.0, 0.0], exclude={0})[0] == k


def test_knn_sorted_and_complete():
    rng = np.random.default_rng(9)
    pts = rng.random((60, 2))
    ix = SpatialIndex(pts[:40])
    for p in pts[40:]:
        ix.insert(p)
    q = rng.random(2)
    idx, d = ix.knn(q, 7)
    ref = np.argsort(np.linalg.norm(pts - q, axis=1))[:7]
    assert list(idx) == list(ref)
    assert np.all(np.diff(d) >= 0)


def test_nearest_many_and_within():
    rng = np.random.default_rng(10)
    pts = rng.random((200, 2))
    ix = SpatialIndex(pts[:150])
    for p in pts[150:]:
        ix.insert(p)
    Q = rng.random((300, 2))
    idx, dist = ix.nearest_many(Q)
    for q, j, d in zip(Q, idx, dist):
        jr, dr = linear_scan_nearest(pts, q)
        assert j == jr and abs(d - dr) <= 1e-12
    got = set(ix.within([0.5, 0.5], 0.2).tolist())
    assert got == set(np.nonzero(np.linalg.norm(pts - 0.5, axis=1) <= 0.2)[0].tolist())


def test_dataset_predict():
    ds = Dataset([(0, 0), (1, 0)], [1.0, 5.0])
    assert ds.predict([0.9, 0.0]) == 5.0
    assert ds.predict([0.0, 0.0]) == 1.0
    i = ds.add([2, 0], 7.0)
    assert i == 2 and ds.predict([2.1, 0]) == 7.0
    assert np.allclose(ds.predict(np.array([[0, 0], [1.2, 0], [3, 0]])), [1, 5, 7])
    with pytest.raises(InvalidInputError):
        Dataset([(0, 0)], [1.0, 2.0])


def test_dataset_grows_past_initial_capacity():
    ds = Dataset([(0.0,)], [0.0])
    for k in range(1, 100):
        ds.add([float(k)], float(k * k))
    assert len(ds) == 100
    assert ds.values[-1] == 99.0**2
    assert ds.predict([41.2]) == 41.0**2
