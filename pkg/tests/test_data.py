import numpy as np
import pytest

from egan import data


def test_ring8_centers():
    mix = data.ring8()
    np.testing.assert_allclose(np.linalg.norm(mix.centers, axis=1), 2.0)
    np.testing.assert_allclose(mix.centers[2], [0.0, 2.0], atol=1e-15)
    assert mix.sigma == 0.02


def test_grid25_centers():
    mix = data.grid25()
    assert mix.centers.shape == (25, 2)
    assert set(mix.centers[:, 0]) == {-4.0, -2.0, 0.0, 2.0, 4.0}
    assert mix.sigma == 0.05


def test_mixture_samples_near_centers():
    mix = data.ring8()
    x = mix.sample(4000, data.make_rng(0, "data"))
    d = np.linalg.norm(x[:, None] - mix.centers[None], axis=2).min(axis=1)
    assert np.mean(d < 3 * mix.sigma) > 0.98
    nearest = np.linalg.norm(x[:, None] - mix.centers[None], axis=2).argmin(axis=1)
    assert np.bincount(nearest, minlength=8).min() > 400


def test_streams_are_independent_and_reproducible():
    a = data.make_streams(5)
    b = data.make_streams(5)
    a["noise"].standard_normal(100)  # drawing from one stream must not shift another
    assert np.array_equal(a["data"].standard_normal(3), b["data"].standard_normal(3))
    assert not np.array_equal(data.make_rng(5, "data").standard_normal(3),
                              data.make_rng(5, "noise").standard_normal(3))
    assert not np.array_equal(data.make_rng(5, "data").standard_normal(3),
                              data.make_rng(6, "data").standard_normal(3))


def test_unknown_stream():
    with pytest.raises(ValueError):
        data.make_rng(0, "other")


def test_noise_shape():
    assert data.sample_noise(7, 3, data.make_rng(0, "noise")).shape == (7, 3)
    with pytest.raises(ValueError):
        data.sample_noise(0, 2, data.make_rng(0, "noise"))


def test_file_dataset(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("0.5,1.0\n\n-2,3e-1\n")
    ds = data.make_dataset("file", path=str(path))
    x = ds.sample(50, data.make_rng(0, "data"))
    assert x.shape == (50, 2)
    assert {tuple(r) for r in x} <= {(0.5, 1.0), (-2.0, 0.3)}


@pytest.mark.parametrize("text,line", [("1,2\n1,2,3\n", 2), ("a,b\n", 1), ("1\n", 1)])
def test_file_dataset_bad_row(tmp_path, text, line):
    path = tmp_path / "pts.csv"
    path.write_text(text)
    with pytest.raises(data.DataError, match=f":{line}:"):
        data.FileDataset(path)


def test_file_dataset_empty(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("\n")
    with pytest.raises(data.DataError):
        data.FileDataset(path)


def test_make_dataset_overrides_and_unknown():
    assert data.make_dataset("ring8", radius=3.0).centers[0, 0] == 3.0
    with pytest.raises(ValueError):
        data.make_dataset("swissroll")


def test_centroids_and_spacing():
    np.testing.assert_allclose(data.ring8().centers.mean(axis=0), 0.0, atol=1e-15)
    c = data.grid25().centers
    np.testing.assert_allclose(c.mean(axis=0), 0.0, atol=1e-15)
    d = np.linalg.norm(c[:, None] - c[None], axis=2)
    np.fill_diagonal(d, np.inf)
    np.testing.assert_allclose(d.min(axis=1), 2.0)


def test_tiny_sigma_samples_sit_on_centers():
    mix = data.GaussianMixture(data.ring8().centers, 1e-300)
    x = mix.sample(50, data.make_rng(0, "data"))
    assert np.linalg.norm(x[:, None] - mix.centers[None], axis=2).min(axis=1).max() == 0.0


def test_ring8_sample_mean_near_origin():
    x = data.ring8().sample(100_000, data.make_rng(0, "data"))
    assert np.all(np.abs(x.mean(axis=0)) < 0.05)


def test_grid25_component_frequencies_uniform():
    mix = data.grid25()
    n = 100_000
    x = mix.sample(n, data.make_rng(1, "data"))
    idx = np.linalg.norm(x[:, None] - mix.centers[None], axis=2).argmin(axis=1)
    counts = np.bincount(idx, minlength=25)
    p = 1 / 25
    assert np.all(np.abs(counts - n * p) <= 3 * np.sqrt(n * p * (1 - p)))


def test_noise_variance_and_repeatability():
    z = data.sample_noise(100_000, 2, data.make_rng(0, "noise"))
    assert np.all(np.abs(z.var(axis=0) - 1.0) < 0.05)
    assert np.array_equal(data.sample_noise(4, 2, data.make_rng(3, "noise")),
                          data.sample_noise(4, 2, data.make_rng(3, "noise")))
