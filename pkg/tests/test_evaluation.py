import numpy as np
import pytest

from nokit.data import GrfSpec, generate_dataset
from nokit.discretization import Domain, refine, uniform_grid
from nokit.errors import InvalidArgument
from nokit.evaluation import (
    DriftReport, PoissonOracle, SWEEP_HEADER, discretization_convergence_test, error_decomposition,
    gaussian_kernel, knn_gno_contrast, layer_operator, per_sample_relative_l2, receptive_field_collapse_demo,
    resolution_sweep, skewed_chain, sweep_csv, write_sweep_csv,
)
from nokit.layers import IntegralTransform, KernelNet, pointwise_layer

from conftest import band_limited, sine


@pytest.fixture(scope="module")
def ds():
    # band limit 4: every mode is resolved on the 8-point grid
    return generate_dataset(GrfSpec(), 32, 5, seed=11, band_limit=4)


def chain(n0=16, levels=4):
    return refine(uniform_grid(Domain("torus1d"), n0), levels)


# -- relative error and sweeps -----------------------------------------------------
def test_per_sample_relative_l2():
    w = np.full(4, 0.25)
    target = np.ones((2, 4, 1))
    pred = np.stack([np.ones((4, 1)), 2 * np.ones((4, 1))])
    np.testing.assert_allclose(per_sample_relative_l2(pred, target, w), [0.0, 1.0])


def test_oracle_sweep_rows_are_exact(ds):
    rows = resolution_sweep(PoissonOracle(), ds, [32, 8, 16], "oracle")
    assert [r.resolution for r in rows] == [8, 16, 32]
    for r in rows:
        assert r.rel_l2_mean < 1e-8 and r.rel_l2_std >= 0 and r.n_samples == 5 and r.model == "oracle"


def test_sweep_csv_layout_and_determinism(tmp_path, ds):
    rows = resolution_sweep(PoissonOracle(), ds, [8, 16], "oracle")
    text = sweep_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 3 and lines[1].startswith("8,oracle,")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sweep_csv(a, rows)
    write_sweep_csv(b, resolution_sweep(PoissonOracle(), ds, [16, 8], "oracle"))
    assert a.read_bytes() == b.read_bytes() == text.encode()


def test_sweep_rejects_resolution_not_dividing_native(ds):
    with pytest.raises(InvalidArgument):
        resolution_sweep(PoissonOracle(), ds, [12])


# -- drift ---------------------------------------------------------------------------
def test_pointwise_layer_has_zero_drift():
    net = KernelNet([1, 8, 1], "gelu", seed=0)
    rep = discretization_convergence_test(lambda f: pointwise_layer(f, net), band_limited, chain())
    assert rep.drifts == [0.0, 0.0, 0.0, 0.0]
    assert rep.nonincreasing


def test_integral_transform_drift_decays_at_order_one():
    # the kernel is smooth on the torus, so the Riemann sums converge fast
    layer = IntegralTransform(gaussian_kernel(0.15))
    rep = discretization_convergence_test(layer_operator(layer), [band_limited, sine], chain())
    assert rep.sizes == [16, 32, 64, 128, 256]
    order = -np.polyfit(np.log(rep.sizes[:-1]), np.log(rep.drifts), 1)[0]
    assert order >= 1.0
    assert rep.nonincreasing


@pytest.mark.parametrize("seed", range(3))
def test_learned_kernel_drift_is_nonincreasing(seed):
    # an MLP of raw coordinates jumps across the wrap, which caps the order at one
    layer = IntegralTransform(KernelNet([2, 16, 1], "gelu", seed=seed))
    rep = discretization_convergence_test(layer_operator(layer), [band_limited, sine], chain())
    assert rep.nonincreasing
    assert rep.drifts[-1] < rep.drifts[0] / 4


def test_drift_csv_rows():
    rep = DriftReport([16, 32, 64, 128], [0.5, 0.25, 0.125])
    assert rep.csv().splitlines() == ["level,n,drift_l2", "0,16,0.5", "1,32,0.25", "2,64,0.125"]


def test_nonincreasing_allows_ten_percent_slack():
    assert DriftReport([1, 2, 3, 4], [1.0, 1.09, 1.19]).nonincreasing
    assert not DriftReport([1, 2, 3, 4], [1.0, 1.11, 1.0]).nonincreasing


def test_short_chain_is_rejected():
    with pytest.raises(InvalidArgument):
        discretization_convergence_test(lambda f: f, band_limited, chain(levels=2))


def test_skewed_chain_is_nested():
    c = skewed_chain(16, 4)
    assert [d.n for d in c] == [16, 24, 32, 48, 64]
    for a, b in zip(c, list(c)[1:]):
        np.testing.assert_array_equal(b.points[: a.n], a.points)
    for d in c:
        assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_knn_drift_plateaus_while_gno_converges():
    c = knn_gno_contrast()
    assert c.knn_plateau > 1e-2
    assert c.gno_final < 1e-3


# -- receptive-field collapse ----------------------------------------------------------
def test_discrete_conv_collapses_to_pointwise_limit():
    rep = receptive_field_collapse_demo([0.25, 0.5, 0.25], chain(levels=6), radius=0.25)
    d = rep.conv_to_pointwise
    assert all(b < a for a, b in zip(d, d[1:]))
    assert d[-1] < 1e-4
    assert rep.operator_to_limit[-1] < 1e-2


def test_separation_matches_analytic_value():
    # || sin - sin * sin(2 pi r) / (2 pi r) ||_{L2} = (1 - 2/pi) / sqrt(2) at r = 1/4
    rep = receptive_field_collapse_demo([0.25, 0.5, 0.25], chain(levels=6), radius=0.25)
    assert rep.separation == pytest.approx((1 - 2 / np.pi) / np.sqrt(2), rel=1e-10)
    assert rep.separation > 1e-2


def test_constant_function_limits_coincide():
    c = 1.7
    rep = receptive_field_collapse_demo([0.2, 0.6, 0.2], chain(levels=3), radius=0.25,
                                        f=lambda x: np.full(len(x), c), limit=lambda x: np.full(len(x), c))
    assert rep.separation == pytest.approx(0.0, abs=1e-14)
    assert max(rep.conv_to_pointwise) < 1e-14


# -- error decomposition ---------------------------------------------------------------
def test_oracle_decomposition_terms_vanish(ds):
    rep = error_decomposition(PoissonOracle(), ds, 8, 16, fine_res=32)
    for term in (rep.eps_train, rep.eps_query, rep.drift_train, rep.drift_query):
        assert np.all(term < 1e-8) and np.all(term >= 0)
    assert rep.fraction == 1.0 and not rep.flagged()


class OddPointNoise:
    """Exact at even grid points, wrong at the points only fine grids see."""

    def __init__(self, train_res):
        self.train_res = train_res

    def __call__(self, values, disc):
        out = PoissonOracle()(values, disc)
        n = round(np.sqrt(disc.n))
        if n > self.train_res:
            grid = disc.to_grid(out).copy()
            stride = n // self.train_res
            mask = np.ones((n, n), bool)
            mask[::stride, ::stride] = False
            grid[:, mask] += 1.0
            out = disc.from_grid(grid)
        return out


def test_resolution_dependent_predictor_is_flagged(ds):
    rep = error_decomposition(OddPointNoise(8), ds, 8, 16, fine_res=32)
    assert np.all(rep.eps_train < 1e-8)
    assert rep.flagged()


def test_decomposition_needs_distinct_resolutions(ds):
    with pytest.raises(InvalidArgument):
        error_decomposition(PoissonOracle(), ds, 16, 16)
    with pytest.raises(InvalidArgument):
        error_decomposition(PoissonOracle(), ds, 8, 32, fine_res=16)
