import io
import math

import numpy as np
import pytest
from scipy import integrate

from annr.exceptions import ConfigurationError, InvalidInputError
from annr.geometry import BoundingBox
from annr.spatial_index import Dataset
from annr.testbed import (
    LENS_CENTERS,
    TestSet,
    builtin,
    make_test_set,
    mae,
    norm_histogram,
    rotation,
)

# Modal bin of |x| for uniform points in [-2,2]^6, 20 bins over [0, 2 sqrt 6],
# frozen from 10^6 fresh Monte-Carlo samples (seed 2024).
BALL_BOX_MODE_BIN = 11


def test_ball_examples():
    f = builtin("ball")
    assert f.dim == 6 and np.allclose(f.box.lo, -2) and np.allclose(f.box.hi, 2)
    assert f(np.zeros(6)) == 1.0
    assert f([2, 0, 0, 0, 0, 0]) == 0.0
    assert f([1, 0, 0, 0, 0, 0]) == 1.0


def test_ellipse_examples():
    assert builtin("ellipse")([0.9, 0]) == 1.0
    assert builtin("ellipse", angle=90)([0.9, 0]) == 0.0
    assert builtin("ellipse")([0, 0.6]) == 0.0


def test_ellipse_rotation_consistency():
    rng = np.random.default_rng(0)
    base = builtin("ellipse")
    for angle in rng.uniform(0, 360, 20):
        f = builtin("ellipse", angle=angle)
        x = rng.uniform(-1, 1, (500, 2))
        y = x @ rotation(angle).T
        assert np.array_equal(f.batch(y), base.batch(x))


def test_indicators_are_binary():
    rng = np.random.default_rng(1)
    for name in ("spiral", "ellipse", "ball"):
        f = builtin(name)
        vals = f.batch(f.box.sample(rng, 2000))
        assert set(np.unique(vals)) <= {0.0, 1.0}
        assert 0 < vals.mean() < 1 or name == "ball"


def test_gaussian_is_normalized():
    f = builtin("gaussian")
    total, _ = integrate.dblquad(lambda y, x: f([x, y]), -6, 6, -6, 6)
    assert total == pytest.approx(1.0, rel=1e-6)
    assert f([0, 0]) == pytest.approx(1 / (2 * math.pi * 0.1))


def test_spiral_band():
    f = builtin("spiral")
    a = 0.08
    for theta in (1.0, 7.0, 15.0):
        x = [a * theta * math.cos(theta), a * theta * math.sin(theta)]
        assert f(x) == 1.0
    # past theta_max the band stops
    theta = 6 * math.pi + 1.0
    assert f([0.9 * math.cos(theta), 0.9 * math.sin(theta)]) == 0.0 or a * theta > 1


def test_lens_domain():
    f = builtin("lens")
    inside = f.domain
    pts = f.box.sample(np.random.default_rng(2), 5000)
    ok = inside(pts)
    assert 0 < ok.mean() < 1
    d = np.linalg.norm(pts[ok][:, None, :] - LENS_CENTERS[None], axis=2)
    assert np.all(d <= 5 + 1e-12)
    assert f([0.6, 0.8]) == pytest.approx(1.0)


def test_builtin_errors():
    with pytest.raises(ConfigurationError):
        builtin("banana")
    with pytest.raises(ConfigurationError):
        builtin("ellipse", colour=3)
    with pytest.raises(ConfigurationError):
        builtin("spiral", a=-1)


def test_grid_test_set():
    f = builtin("sqnorm", half_width=1.0)
    f.box = BoundingBox.cube(0, 1, 2)
    ts = make_test_set(f, 4, "grid")
    assert {tuple(p) for p in ts.points} == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert len(make_test_set(builtin("gaussian"), 10_000, "grid")) == 10_000
    with pytest.raises(ConfigurationError):
        make_test_set(builtin("ball"), 16, "grid")


def test_uniform_test_set():
    f = builtin("ball")
    a = make_test_set(f, 10_000, "uniform", seed=3)
    assert np.all(np.abs(a.points) <= 2)
    assert a.digest() == make_test_set(f, 10_000, "uniform", seed=3).digest()
    assert a.digest() != make_test_set(f, 10_000, "uniform", seed=4).digest()
    lens = make_test_set(builtin("lens"), 500, "uniform", seed=1)
    assert len(lens) == 500 and builtin("lens").domain(lens.points).all()


def test_test_set_csv_roundtrip():
    ts = make_test_set(builtin("gaussian"), 50, "uniform", seed=0)
    buf = io.StringIO()
    ts.write_csv(buf)
    assert buf.getvalue().splitlines()[0] == "x0,x1,f"
    back = TestSet.read_csv(io.StringIO(buf.getvalue()))
    assert back.digest() == ts.digest()
    with pytest.raises(InvalidInputError):
        TestSet.read_csv(io.StringIO("a,b\n1,2\n"))


def test_mae_examples():
    ts = TestSet(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]), "file")
    assert mae(lambda x: np.zeros(len(x)), ts) == 2.0
    assert mae(lambda x: np.array([1.0, 3.0]), ts) == 0.0
    ds = Dataset(ts.points, ts.values)
    assert mae(ds.predict, ts) == 0.0
    with pytest.raises(InvalidInputError):
        mae(lambda x: x, TestSet(np.zeros((0, 1)), np.zeros(0), "file"))


def test_mae_shift_identity():
    rng = np.random.default_rng(4)
    ts = TestSet(rng.random((100, 2)), rng.random(100), "file")
    pred = rng.random(100)
    err = pred - ts.values
    assert mae(lambda x: pred + 0.3, ts) == pytest.approx(np.mean(np.abs(err + 0.3)))


def test_norm_histogram_examples():
    counts, freqs, edges = norm_histogram(np.zeros((5, 3)), 4)
    assert counts[0] == 5 and freqs[0] == 1.0
    counts, _, _ = norm_histogram([[0.5, 0], [1.5, 0]], 2, upper=2.0)
    assert list(counts) == [1, 1]
    with pytest.raises(InvalidInputError):
        norm_histogram([[1.0]], 0)


def test_norm_histogram_uniform_mode_matches_monte_carlo():
    pts = BoundingBox.cube(-2, 2, 6).sample(np.random.default_rng(5), 10_000)
    counts, _, edges = norm_histogram(pts, 20, upper=2 * math.sqrt(6))
    assert abs(int(np.argmax(counts)) - BALL_BOX_MODE_BIN) <= 1
    assert edges[BALL_BOX_MODE_BIN] < 2.9 < edges[BALL_BOX_MODE_BIN + 1]
