import numpy as np
import pytest

from driftflow.synthdata import (
    DatasetSpec,
    PointBatch,
    SourceSpec,
    in_support,
    label_from_coords,
    read_csv,
    sample_source,
    sample_target,
)


def test_gaussian_source_mean():
    pts = sample_source(SourceSpec("gaussian_iso", 1.0), 100_000, seed=0).data
    assert np.all(np.abs(pts.mean(axis=0)) < 0.02)


@pytest.mark.parametrize("n", [1, 7, 1000])
def test_circle_source_on_circle(n):
    pts = sample_source(SourceSpec("circle_uniform", 1.0), n, seed=3).data
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)


def test_circle_source_mean_radius_two():
    # uniform angles: E[(cos, sin)] = 0
    pts = sample_source(SourceSpec("circle_uniform", 2.0), 100_000, seed=5).data
    assert np.all(np.abs(pts.mean(axis=0)) < 0.02)


def test_two_moons_zero_noise_on_arcs():
    spec = DatasetSpec("two_moons", noise_std=0.0)
    pts = sample_target(spec, 4, seed=11).data
    up = np.isclose(np.hypot(pts[:, 0], pts[:, 1]), 1.0, atol=1e-12) & (pts[:, 1] >= 0)
    low = np.isclose(np.hypot(pts[:, 0] - 1, pts[:, 1] - 0.5), 1.0, atol=1e-12) & (pts[:, 1] <= 0.5)
    assert np.all(up | low)


def test_checkerboard_never_white():
    pts = sample_target(DatasetSpec("checkerboard", scale=2.0), 10_000, seed=2).data
    parity = (np.floor(pts[:, 0]) + np.floor(pts[:, 1])) % 2
    assert np.all(parity == 0)
    assert np.all(np.abs(pts) <= 2.0)


def _in_rects(pts, rects):
    hits = np.zeros(len(pts), bool)
    for x0, x1, y0, y1 in rects:
        hits |= (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    return hits


def test_letter_f_inside_strokes():
    strokes = [(-0.6, -0.3, -1, 1), (-0.6, 0.6, 0.7, 1), (-0.6, 0.35, -0.05, 0.25)]
    pts = sample_target(DatasetSpec("letter_f"), 10_000, seed=8).data
    assert np.all(_in_rects(pts, strokes))


def test_letter_m_geometry():
    pts = sample_target(DatasetSpec("letter_m"), 10_000, seed=8).data
    assert np.all(in_support(DatasetSpec("letter_m"), pts))
    assert np.all(np.abs(pts[:, 0]) <= 0.9) and np.all(np.abs(pts[:, 1]) <= 1)
    # both outer bars and the diagonal meeting point are populated
    assert np.any(pts[:, 0] < -0.6) and np.any(pts[:, 0] > 0.6)
    assert np.any((np.abs(pts[:, 0]) < 0.1) & (pts[:, 1] < 0))


@pytest.mark.parametrize("name", ["letter_f", "letter_m", "two_moons", "checkerboard"])
def test_support_membership_zero_noise(name):
    spec = DatasetSpec(name, noise_std=0.0)
    pts = sample_target(spec, 2000, seed=4).data
    assert in_support(spec, pts).all()


@pytest.mark.parametrize("name", ["letter_f", "two_moons", "checkerboard", "gaussian_iso"])
def test_same_seed_bitwise(name):
    a = sample_target(DatasetSpec(name), 500, seed=42)
    b = sample_target(DatasetSpec(name), 500, seed=42)
    assert a.data.tobytes() == b.data.tobytes()
    s1 = sample_source(SourceSpec(), 300, seed=9)
    s2 = sample_source(SourceSpec(), 300, seed=9)
    assert s1.data.tobytes() == s2.data.tobytes()


@pytest.mark.parametrize("name,k", [("two_moons", 2), ("checkerboard", 2), ("checkerboard", 4), ("checkerboard", 8)])
def test_label_consistency(name, k):
    spec = DatasetSpec(name, noise_std=0.0, class_count=k)
    batch = sample_target(spec, 2000, seed=1)
    assert batch.labels.min() >= 0 and batch.labels.max() < k
    np.testing.assert_array_equal(label_from_coords(spec, batch.data), batch.labels)


def test_labels_given_are_respected():
    spec = DatasetSpec("checkerboard", noise_std=0.0, class_count=4)
    labels = np.arange(400) % 4
    batch = sample_target(spec, 400, seed=1, labels=labels)
    np.testing.assert_array_equal(batch.labels, labels)
    np.testing.assert_array_equal(label_from_coords(spec, batch.data), labels)


def test_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec("letter_f", class_count=2)
    with pytest.raises(ValueError):
        DatasetSpec("two_moons", scale=0)
    with pytest.raises(ValueError):
        DatasetSpec("two_moons", noise_std=-1)
    with pytest.raises(ValueError):
        SourceSpec("circle_uniform", 0)
    with pytest.raises(ValueError):
        DatasetSpec("spiral")


def test_csv_roundtrip(tmp_path):
    batch = sample_target(DatasetSpec("two_moons", class_count=2), 50, seed=0)
    path = tmp_path / "pts.csv"
    batch.to_csv(path)
    assert path.read_text().splitlines()[0] == "x0,x1,label"
    back = PointBatch.from_csv(path)
    assert back.data.tobytes() == batch.data.tobytes()
    np.testing.assert_array_equal(back.labels, batch.labels)

    plain = sample_source(SourceSpec(), 10, seed=0)
    plain.to_csv(tmp_path / "src.csv")
    data, labels = read_csv(tmp_path / "src.csv")
    assert labels is None and data.tobytes() == plain.data.tobytes()
