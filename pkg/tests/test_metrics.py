import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egan import core, data, metrics, nets


def test_coverage_of_true_samples():
    mix = data.ring8()
    x = mix.sample(2500, data.make_rng(1, "eval"))
    rep = metrics.mode_coverage(x, mix)
    assert rep.modes_captured == 8
    assert rep.high_quality_ratio > 0.98


def test_coverage_collapsed_and_far_samples():
    mix = data.ring8()
    x = np.repeat(mix.centers[:1], 100, axis=0)
    rep = metrics.mode_coverage(x, mix)
    assert rep.modes_captured == 1 and rep.counts[0] == 100
    rep = metrics.mode_coverage(np.zeros((100, 2)), mix)
    assert rep.modes_captured == 0 and rep.high_quality_ratio == 0.0


def test_coverage_threshold_counts_sparse_modes_out():
    mix = data.ring8()
    # 9 of 800 samples on mode 1: below 20% of the 100 expected
    x = np.concatenate([np.repeat(mix.centers[:1], 791, axis=0), np.repeat(mix.centers[1:2], 9, axis=0)])
    rep = metrics.mode_coverage(x, mix)
    assert rep.modes_captured == 1 and rep.modes_any == 2


def test_kde_integrates_to_one():
    x = data.ring8().sample(500, data.make_rng(0, "eval"))
    grid = metrics.kde_grid(x, 0.1, resolution=200)
    assert grid.mass() == pytest.approx(1.0, abs=1e-3)
    assert grid.density.shape == (200, 200)


def test_kde_single_point_peak():
    grid = metrics.kde_grid(np.array([[0.0, 0.0]]), 0.5, extent=(-1, 1, -1, 1), resolution=2)
    expected = np.exp(-0.5 * 0.5 / 0.25) / (2 * np.pi * 0.25)
    np.testing.assert_allclose(grid.density, expected)


def test_optimal_discriminator_examples():
    rep = metrics.optimal_discriminator_check(np.array([0.5, 0.5, 0.0]), np.array([0.25, 0.25, 0.5]))
    np.testing.assert_allclose(rep.closed_form, [2 / 3, 2 / 3, 0.0])
    assert rep.ok


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_discriminator_random_pairs(seed):
    rng = np.random.default_rng(seed)
    pd, pg = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
    assert metrics.optimal_discriminator_check(pd, pg).max_deviation <= 1e-3


def test_optimal_discriminator_rejects_unnormalized():
    with pytest.raises(ValueError):
        metrics.optimal_discriminator_check(np.array([0.5, 0.6]), np.array([0.5, 0.5]))


def _log(step, *tags):
    recs = tuple(core.ChildRecord(0, core.Mutation(t), 0.0, 0.0, 0.0) for t in tags)
    return core.EvolutionStepLog(step, recs, (0,), ())


def test_selection_histogram_windows():
    logs = [_log(i, "minimax" if i % 3 else "leastsq") for i in range(7)]
    hist = metrics.selection_histogram(logs, 3)
    assert hist.starts == (0, 3, 6) and hist.lengths == (3, 3, 1)
    assert hist.counts[0] == {"leastsq": 1, "minimax": 2}
    assert hist.totals() == {"leastsq": 3, "minimax": 4}
    with pytest.raises(ValueError):
        metrics.selection_histogram(logs, 8)


def test_latent_interpolation_endpoints_exact():
    rng = np.random.default_rng(0)
    theta = nets.init_mlp(nets.generator_spec(width=8, depth=2), rng)
    z = rng.normal(size=(2, 2))
    path = metrics.latent_interpolation(theta, z[0], z[1], 5)
    assert path.shape == (5, 2)
    assert path[0].tobytes() == nets.gen_forward(theta, z[:1])[0].tobytes()
    assert path[-1].tobytes() == nets.gen_forward(theta, z[1:])[0].tobytes()


def test_csv_writers(tmp_path):
    mix = data.ring8()
    rep = metrics.mode_coverage(mix.sample(100, data.make_rng(0, "eval")), mix)
    metrics.write_coverage_csv(tmp_path / "c.csv", rep)
    assert (tmp_path / "c.csv").read_text().startswith("modes_captured,")
    grid = metrics.kde_grid(np.zeros((1, 2)), 0.1, resolution=4)
    metrics.write_kde_csv(tmp_path / "k.csv", grid)
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0].startswith("# extent=") and len(lines) == 2 + 16


def test_coverage_exact_grid_placement():
    mix = data.grid25()
    rep = metrics.mode_coverage(mix.centers, mix)
    assert rep.modes_captured == 25 and rep.high_quality_ratio == 1.0


def test_coverage_uniform_samples_geometric_ratio():
    mix = data.grid25()
    n = 200_000
    x = np.random.default_rng(0).uniform(-10, 10, size=(n, 2))
    rep = metrics.mode_coverage(x, mix)
    p = 25 * np.pi * 0.15**2 / 400
    assert abs(rep.high_quality_ratio - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_coverage_permutation_invariant():
    mix = data.ring8()
    x = mix.sample(300, data.make_rng(2, "eval")) * 1.01
    rng = np.random.default_rng(0)
    a = metrics.mode_coverage(x, mix)
    b = metrics.mode_coverage(x[rng.permutation(300)], mix)
    perm = rng.permutation(8)
    c = metrics.mode_coverage(x, data.GaussianMixture(mix.centers[perm], mix.sigma))
    assert a.modes_captured == b.modes_captured == c.modes_captured
    assert a.high_quality_ratio == b.high_quality_ratio == c.high_quality_ratio
    assert a.counts == b.counts and sorted(a.counts) == sorted(c.counts)


def test_kde_origin_peak_and_symmetry():
    grid = metrics.kde_grid(np.zeros((1, 2)), 0.3, extent=(-1, 1, -1, 1), resolution=9)
    iy, ix = np.unravel_index(grid.density.argmax(), grid.density.shape)
    assert abs(grid.xs[ix]) < 2 / 9 and abs(grid.ys[iy]) < 2 / 9
    pts = np.array([[0.5, 0.2], [-0.5, 0.2], [1.0, -0.3], [-1.0, -0.3]])
    g = metrics.kde_grid(pts, 0.2, resolution=64)
    np.testing.assert_allclose(g.density, g.density[:, ::-1], rtol=1e-12, atol=1e-300)


def test_kde_mass_ring8_1000():
    x = data.ring8().sample(1000, data.make_rng(0, "eval"))
    assert abs(metrics.kde_grid(x, 0.1).mass() - 1.0) < 0.02


def test_kde_linear_in_weights():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(30, 2)), rng.normal(size=(50, 2))
    pooled = metrics.kde_grid(np.vstack([a, b]), 0.2, resolution=32).density
    mix = (30 * metrics.kde_grid(a, 0.2, resolution=32).density
           + 50 * metrics.kde_grid(b, 0.2, resolution=32).density) / 80
    np.testing.assert_allclose(pooled, mix, rtol=1e-10, atol=1e-300)


def test_optimal_discriminator_trivial_cases():
    p = np.full(4, 0.25)
    rep = metrics.optimal_discriminator_check(p, p)
    np.testing.assert_allclose(rep.searched, 0.5)
    rep = metrics.optimal_discriminator_check(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    np.testing.assert_array_equal(rep.closed_form, [1.0, 0.0])
    assert rep.searched[0] == pytest.approx(0.999) and rep.searched[1] == pytest.approx(0.001)


def test_optimal_discriminator_finer_grid_not_worse():
    rng = np.random.default_rng(4)
    pd, pg = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
    devs = [metrics.optimal_discriminator_check(pd, pg, s).max_deviation for s in (1e-1, 1e-2, 1e-3)]
    assert devs[0] >= devs[1] - 1e-12 and devs[1] >= devs[2] - 1e-12


def test_selection_histogram_constant_and_additive():
    logs = [_log(i, "heuristic") for i in range(6)]
    hist = metrics.selection_histogram(logs, 3)
    assert hist.counts == ({"heuristic": 3}, {"heuristic": 3})
    a = metrics.selection_histogram(logs[:3], 3).totals()
    b = metrics.selection_histogram(logs[3:], 3).totals()
    assert {k: a[k] + b[k] for k in a} == hist.totals()


def test_interpolation_degenerate_and_linear():
    rng = np.random.default_rng(1)
    theta = nets.init_mlp(nets.generator_spec(width=4, depth=1), rng)
    z = rng.normal(size=2)
    path = metrics.latent_interpolation(theta, z, z, 4)
    assert all(np.array_equal(r, path[0]) for r in path)
    lin = nets.init_mlp(nets.MlpSpec(2, (), 2), rng)
    z1, z2 = rng.normal(size=2), rng.normal(size=2)
    path = metrics.latent_interpolation(lin, z1, z2, 6)
    t = np.linspace(0, 1, 6)[:, None]
    np.testing.assert_allclose(path, (1 - t) * path[0] + t * path[-1], atol=1e-12)
    with pytest.raises(nets.StructuralError):
        metrics.latent_interpolation(theta, np.zeros(3), np.zeros(3), 3)
