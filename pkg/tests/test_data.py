import numpy as np
import pytest

from nokit.data import (
    GrfSpec, TaskDataset, generate_dataset, grf_sample, make_sample, poisson_solve,
)
from nokit.discretization import Domain, Field, uniform_grid
from nokit.errors import InvalidArgument, UnsupportedDomain
from nokit.losses import poisson_residual

from conftest import torus1d, torus2d


def radial_spectrum(samples):
    n = samples.shape[-1]
    power = np.mean(np.abs(np.fft.fft2(samples)) ** 2, axis=0)
    k = np.fft.fftfreq(n, 1 / n)
    kr = np.rint(np.hypot(*np.meshgrid(k, k, indexing="ij"))).astype(int)
    radial = np.bincount(kr.ravel(), power.ravel()) / np.bincount(kr.ravel())
    return np.arange(len(radial)), radial


# -- Gaussian random fields ------------------------------------------------------
def test_grf_is_seed_deterministic():
    d = torus2d(32)
    a = grf_sample(GrfSpec(seed=3), d).values
    b = grf_sample(GrfSpec(seed=3), d).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, grf_sample(GrfSpec(seed=4), d).values)


def test_grf_mean_is_statistically_zero():
    d = torus2d(128)
    means, stds = [], []
    for seed in range(100):
        v = grf_sample(GrfSpec(), d, seed=seed).values
        means.append(v.mean())
        stds.append(v.std())
    total = np.mean(means)
    assert abs(total) < 3 * np.mean(stds) / np.sqrt(100 * d.n)


def test_grf_is_stationary():
    # pointwise ensemble variance is the same everywhere on the torus
    d = torus2d(16)
    vals = np.stack([grf_sample(GrfSpec(), d, seed=s).values[:, 0] for s in range(2000)])
    var = vals.var(axis=0)
    # chi-square spread of a variance estimate over 2000 draws is about sqrt(2/2000)
    assert np.max(np.abs(var / var.mean() - 1)) < 6 * np.sqrt(2 / 2000)


def test_grf_spectrum_slope():
    d = torus2d(128)
    samples = np.stack([d.to_grid(grf_sample(GrfSpec(alpha=2.0), d, seed=s).values)[..., 0] for s in range(40)])
    k, radial = radial_spectrum(samples)
    band = (k >= 4) & (k <= 40)
    slope = np.polyfit(np.log(k[band]), np.log(radial[band]), 1)[0]
    assert abs(slope - (-4.0)) < 0.15 * 4.0


def test_grf_band_limit():
    d = torus2d(32)
    v = d.to_grid(grf_sample(GrfSpec(band_limit=4), d).values)[..., 0]
    X = np.fft.fft2(v)
    k = np.abs(np.fft.fftfreq(32, 1 / 32))
    outside = (k[:, None] >= 4) | (k[None, :] >= 4)
    assert np.max(np.abs(X[outside])) < 1e-10


def test_grf_rejects_bad_parameters():
    with pytest.raises(InvalidArgument):
        grf_sample(GrfSpec(alpha=1.0), torus2d(8))
    with pytest.raises(InvalidArgument):
        GrfSpec(tau=0.0)
    with pytest.raises(InvalidArgument):
        grf_sample(GrfSpec(), torus2d(12))
    with pytest.raises(UnsupportedDomain):
        grf_sample(GrfSpec(), uniform_grid(Domain("square"), 8))


# -- Poisson solve ---------------------------------------------------------------
def test_poisson_eigenfunction():
    d = torus2d(32)
    x, y = d.points[:, :1], d.points[:, 1:]
    f = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    u = poisson_solve(Field(d, f)).values
    np.testing.assert_allclose(u, f / (8 * np.pi ** 2), atol=1e-10)


def test_poisson_solution_has_zero_mean_and_is_linear():
    d = torus2d(32)
    f1 = grf_sample(GrfSpec(), d, seed=1)
    f2 = grf_sample(GrfSpec(), d, seed=2)
    u1, u2 = poisson_solve(f1).values, poisson_solve(f2).values
    assert abs(u1.mean()) < 1e-14
    u12 = poisson_solve(Field(d, f1.values + f2.values)).values
    np.testing.assert_allclose(u12, u1 + u2, atol=1e-12)


def test_poisson_1d():
    d = torus1d(64)
    f = np.cos(2 * np.pi * 3 * d.points)
    np.testing.assert_allclose(poisson_solve(Field(d, f)).values, f / (36 * np.pi ** 2), atol=1e-12)


def test_poisson_rejects_nonzero_mean():
    d = torus2d(8)
    with pytest.raises(InvalidArgument, match="zero mean"):
        poisson_solve(Field(d, np.ones((64, 1))))


def test_solver_residual_duality():
    d = torus2d(64)
    for seed in range(5):
        s = make_sample(GrfSpec(), d, seed=seed)
        assert poisson_residual(s.solution, s.forcing) < 1e-10


# -- datasets --------------------------------------------------------------------
@pytest.fixture(scope="module")
def small_dataset():
    return generate_dataset(GrfSpec(), 32, 6, seed=5)


def test_dataset_residuals(small_dataset):
    for i in range(len(small_dataset)):
        s = small_dataset.sample(i)
        assert poisson_residual(s.solution, s.forcing) < 1e-8


def test_dataset_save_load_roundtrip(tmp_path, small_dataset):
    path = tmp_path / "d.nopk"
    small_dataset.save(path)
    ds = TaskDataset.load(path)
    assert ds.forcing.tobytes() == small_dataset.forcing.tobytes()
    assert ds.solution.tobytes() == small_dataset.solution.tobytes()
    assert ds.metadata == small_dataset.metadata


def test_same_seed_gives_identical_files(tmp_path):
    generate_dataset(GrfSpec(), 16, 3, seed=9, path=tmp_path / "a.nopk")
    generate_dataset(GrfSpec(), 16, 3, seed=9, path=tmp_path / "b.nopk")
    assert (tmp_path / "a.nopk").read_bytes() == (tmp_path / "b.nopk").read_bytes()


def test_samples_do_not_depend_on_count():
    a = generate_dataset(GrfSpec(), 16, 2, seed=1)
    b = generate_dataset(GrfSpec(), 16, 5, seed=1)
    np.testing.assert_array_equal(a.forcing, b.forcing[:2])


def test_subsampling_keeps_low_modes(small_dataset):
    n = small_dataset.native_resolution
    full = small_dataset.forcing[0]
    half = small_dataset.forcing[0, ::2, ::2]
    X = np.fft.fft2(full) / n ** 2
    Y = np.fft.fft2(half) / (n // 2) ** 2
    m = n // 4
    for k1 in range(-m + 1, m):
        for k2 in range(-m + 1, m):
            assert abs(X[k1, k2] - Y[k1, k2]) < 1e-10


def test_at_resolution_is_strided(small_dataset):
    disc, f, u = small_dataset.at_resolution(8, [1, 3])
    assert f.shape == (2, 64, 1)
    np.testing.assert_array_equal(disc.to_grid(f[0])[..., 0], small_dataset.forcing[1, ::4, ::4])
    with pytest.raises(InvalidArgument, match="exceeds"):
        small_dataset.at_resolution(64)
    with pytest.raises(InvalidArgument):
        small_dataset.at_resolution(12)


def test_split(small_dataset):
    a, b = small_dataset.split(4)
    assert len(a) == 4 and len(b) == 2
    np.testing.assert_array_equal(b.forcing[0], small_dataset.forcing[4])
    with pytest.raises(InvalidArgument):
        small_dataset.split(6)


def test_load_rejects_foreign_container(tmp_path):
    from nokit.io import container_write
    container_write(tmp_path / "x.nopk", {"forcing": np.zeros((1, 4, 4))})
    with pytest.raises(InvalidArgument, match="solution"):
        TaskDataset.load(tmp_path / "x.nopk")
