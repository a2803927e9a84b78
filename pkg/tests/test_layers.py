import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nokit import tensor as T
from nokit.discretization import Discretization, Domain, Field, integrate, refine, uniform_grid
from nokit.errors import EmptyNeighborhood, InvalidArgument, ShapeError, UnsupportedDomain
from nokit.layers import (
    AttentionLayer, ConvOperator, EncDecConfig, EncDecLayer, FixedKernel, FNOBlock, IntegralTransform,
    KernelInterpolatedConv, KernelNet, ResolutionWarning, SpectralConv, attention_layer, batch_normalization,
    concat_to_field, conv_operator_direct, destandardize, discrete_conv, domain_padding, encdec_layer,
    fno_block, integral_transform, kernel_interpolated_conv, normalization, pad_grid_tensor,
    pointwise_layer, positional_encoding, real_basis, spectral_conv, spectral_weight_shape, standardize,
    unpad, unpad_grid_tensor,
)
from nokit.tensor import Parameter, grad_check, init_param

from conftest import band_limited, torus1d, torus2d


def split_point(disc, values, i):
    """Replace point ``i`` by two coincident copies carrying half its weight each."""
    w = disc.weights.copy()
    w[i] /= 2
    pts = np.vstack([disc.points, disc.points[i:i + 1]])
    d2 = Discretization(disc.domain, pts, np.append(w, w[i]))
    return d2, np.vstack([values, values[i:i + 1]])


# -- positional encoding ---------------------------------------------------------
def test_positional_encoding_at_origin():
    feats = positional_encoding(np.zeros((1, 2)), 3)
    np.testing.assert_array_equal(feats.reshape(2, 3, 2)[..., 0], 0.0)
    np.testing.assert_array_equal(feats.reshape(2, 3, 2)[..., 1], 1.0)


def test_positional_encoding_hand_values():
    feats = positional_encoding(np.array([[0.5]]), 2)
    np.testing.assert_allclose(feats[0], [1.0, 0.0, 0.0, -1.0], atol=1e-12)


def test_positional_channels():
    d = torus2d(4)
    f = concat_to_field(Field(d, np.ones((16, 3))), positional_encoding(d.points, 4))
    assert f.channels == 3 + 2 * 4 * 2


# -- pointwise -------------------------------------------------------------------
def test_pointwise_identity():
    d = torus1d(8)
    f = Field(d, np.random.default_rng(0).standard_normal((8, 3)))
    out = pointwise_layer(f, KernelNet([3, 3], "identity").set_identity())
    np.testing.assert_array_equal(out.values, f.values)


def test_pointwise_commutes_with_permutation():
    rng = np.random.default_rng(1)
    d = torus1d(8)
    net = KernelNet([2, 5, 3], seed=4)
    v = rng.standard_normal((8, 2))
    perm = rng.permutation(8)
    a = pointwise_layer(Field(d, v), net).values
    b = pointwise_layer(Field(d, v[perm]), net).values
    np.testing.assert_array_equal(a[perm], b)


def test_pointwise_nested_grids_agree():
    chain = refine(torus1d(8), 1)
    net = KernelNet([1, 4, 1], seed=2)
    out = [pointwise_layer(Field(d, band_limited(d.points)), net).values for d in chain]
    np.testing.assert_array_equal(out[1][:8], out[0])


# -- integral transform ----------------------------------------------------------
ONES = FixedKernel(lambda xy: np.ones(xy.shape[:-1]))


@pytest.mark.parametrize("n", [4, 16, 64])
def test_integral_of_ones_is_one(n):
    d = torus2d(n)
    g = integral_transform(Field(d, np.ones((d.n, 1))), None, ONES)
    np.testing.assert_allclose(g.values, 1.0, atol=1e-10)


def test_integral_transform_brute_force_oracle():
    rng = np.random.default_rng(3)
    d = torus1d(4)
    kernel = KernelNet([2, 6, 2], seed=7)
    f = rng.standard_normal((4, 2))
    q = np.array([[0.1], [0.6], [0.95]])
    out = integral_transform(Field(d, f), Discretization(d.domain, q, np.ones(3)), kernel).values
    ref = np.zeros((3, 2))
    for j in range(3):
        for i in range(4):
            k = kernel(np.concatenate([d.points[i], q[j]])).data
            ref[j] += k * f[i] * d.weights[i]
    np.testing.assert_allclose(out, ref, atol=1e-14)


def test_integral_transform_radius_and_bias():
    d = torus1d(16)
    bias = KernelNet([1, 1], "identity", seed=1)
    layer = IntegralTransform(ONES, bias=bias, radius=0.1)
    f = np.ones((16, 1))
    g = layer(f, d).data[0]
    with T.no_grad():
        b = bias(d.points).data
    # three neighbours (offsets -1, 0, 1) of weight 1/16 each
    np.testing.assert_allclose(g, 3 / 16 + b, atol=1e-14)


def test_integral_transform_empty_neighborhood_names_query():
    d = Discretization(Domain("interval"), [[0.0], [0.1]], [0.5, 0.5])
    layer = IntegralTransform(ONES, radius=0.2)
    with pytest.raises(EmptyNeighborhood) as exc:
        layer(np.ones((2, 1)), d, query=np.array([[0.05], [0.9]]))
    assert exc.value.query_index == 1


def test_integral_transform_kernel_shape_checked():
    with pytest.raises(ShapeError):
        IntegralTransform(KernelNet([3, 1]))(np.ones((4, 1)), torus1d(4))


@pytest.mark.parametrize("variant", ["linear", "nonlinear"])
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_integral_transform_weight_splitting(variant, seed):
    rng = np.random.default_rng(seed)
    n = 12
    pts = np.sort(rng.random(n))[:, None]
    d = Discretization(Domain("interval"), pts, rng.random(n))
    widths = [2, 8, 2] if variant == "linear" else [4, 8, 2]
    layer = IntegralTransform(KernelNet(widths, seed=seed), variant=variant)
    f = rng.standard_normal((n, 2))
    i = int(rng.integers(n))
    d2, f2 = split_point(d, f, i)
    with T.no_grad():
        a = layer(f, d, query=pts).data
        b = layer(f2, d2, query=pts).data
    np.testing.assert_allclose(b, a, atol=1e-12, rtol=0)


# -- conv operator -------------------------------------------------------------
@pytest.mark.parametrize("n, k", [(16, 2), (64, 5), (128, 16)])
def test_box_kernel_averages_constants(n, k):
    # radius (k + 1/2) h puts exactly 2k+1 points inside, which the kernel height normalizes
    r = (k + 0.5) / n
    d = torus1d(n)
    g = conv_operator_direct(Field(d, np.full((n, 1), 2.5)), FixedKernel(lambda s: np.full(s.shape[:-1], 1 / (2 * r))), r)
    np.testing.assert_allclose(g.values, 2.5, atol=1e-10)


def test_conv_operator_is_local():
    n, r = 32, 0.1
    d = torus1d(n)
    kern = KernelNet([1, 4, 1], seed=3)
    f = np.random.default_rng(0).standard_normal((n, 1))
    base = conv_operator_direct(Field(d, f), kern, r).values
    j = 5
    for i in range(n):
        dist = abs(d.domain.displacement(d.points[i:i + 1], d.points[j:j + 1])[0, 0])
        if dist > r:
            f2 = f.copy()
            f2[i] += 10.0
            out = conv_operator_direct(Field(d, f2), kern, r).values
            assert out[j, 0] == base[j, 0]


def test_conv_operator_radius_below_spacing():
    with pytest.raises(EmptyNeighborhood):
        conv_operator_direct(Field(torus1d(8), np.ones((8, 1))), ONES, 0.05)


def band_limited_kernel(coef):
    """Real periodic kernel with Fourier coefficients ``coef[k]`` (k >= 0) and their conjugates."""
    def fn(s):
        s = s[..., 0]
        out = np.full(s.shape, coef[0].real)
        for k in range(1, len(coef)):
            out = out + 2 * (coef[k] * np.exp(2j * np.pi * k * s)).real
        return out
    return FixedKernel(fn)


def test_spectral_conv_matches_direct_convolution():
    rng = np.random.default_rng(11)
    modes, n = 6, 128
    coef = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
    coef[0] = coef[0].real
    d = torus1d(n)
    f = Field(d, band_limited(d.points) + 0.3 * np.sin(2 * np.pi * 9 * d.points))
    direct = conv_operator_direct(f, band_limited_kernel(coef), 0.5).values
    spec = spectral_conv(f, coef.reshape(modes, 1, 1)).values
    np.testing.assert_allclose(spec, direct, atol=1e-6, rtol=0)


# -- spectral conv -----------------------------------------------------------------
def test_spectral_identity_weights_reproduce_band_limited_input():
    d = torus2d(16)
    x = d.points
    f = np.sin(2 * np.pi * x[:, :1]) * np.cos(4 * np.pi * x[:, 1:]) + np.cos(2 * np.pi * (x[:, :1] - 2 * x[:, 1:]))
    w = np.ones(spectral_weight_shape(4, 2, 1, 1), dtype=complex)
    np.testing.assert_allclose(spectral_conv(Field(d, f), w).values, f, atol=1e-10)


def test_spectral_mode_zero_gives_mean():
    d = torus1d(32)
    f = 1.5 + band_limited(d.points)
    w = np.zeros((4, 1, 1), dtype=complex)
    w[0] = 1.0
    np.testing.assert_allclose(spectral_conv(Field(d, f), w).values, 1.5, atol=1e-12)


def test_spectral_interpolates_cosine():
    d = torus1d(8)
    f = Field(d, np.cos(2 * np.pi * d.points))
    g = spectral_conv(f, np.ones((4, 1, 1), dtype=complex), n_out=16)
    np.testing.assert_allclose(g.values[:, 0], np.cos(2 * np.pi * np.arange(16) / 16), atol=1e-10)


def test_spectral_2d_query_resolution():
    d = torus2d(16)
    x = d.points
    f = np.sin(2 * np.pi * x[:, :1]) * np.cos(2 * np.pi * x[:, 1:])
    w = np.ones(spectral_weight_shape(4, 2, 1, 1), dtype=complex)
    g = spectral_conv(Field(d, f), w, n_out=32)
    y = g.disc.points
    np.testing.assert_allclose(g.values, np.sin(2 * np.pi * y[:, :1]) * np.cos(2 * np.pi * y[:, 1:]), atol=1e-10)


def test_spectral_warns_on_coarse_grid():
    layer = SpectralConv(1, 1, 8, dim=1)
    with pytest.warns(ResolutionWarning):
        layer(np.ones((8, 1)), torus1d(8))


def test_spectral_rejects_bounded_domain():
    with pytest.raises(UnsupportedDomain):
        SpectralConv(1, 1, 2, dim=1)(np.ones((8, 1)), uniform_grid(Domain("interval"), 8))


def test_spectral_weight_shape_checked():
    with pytest.raises(ShapeError):
        SpectralConv(1, 1, 4, dim=1, weights=Parameter(np.ones((3, 1, 1), dtype=complex)))


# -- FNO block -----------------------------------------------------------------------
def identity_block(channels, modes, dim):
    blk = FNOBlock(channels, modes, dim, activation_name="identity")
    blk.spectral.weights.assign(np.zeros(blk.spectral.weights.shape, dtype=complex))
    blk.skip.set_identity()
    blk.mlp.set_identity()
    return blk


def test_fno_block_reduces_to_identity():
    d = torus2d(8)
    f = Field(d, np.random.default_rng(0).standard_normal((64, 3)))
    np.testing.assert_allclose(fno_block(f, identity_block(3, 2, 2)).values, f.values, atol=1e-14)


def test_fno_block_skip_carries_high_modes():
    d = torus1d(32)
    blk = identity_block(1, 2, 1)
    blk.spectral.weights.assign(np.ones(blk.spectral.weights.shape, dtype=complex))
    f = Field(d, np.cos(2 * np.pi * 6 * d.points))
    g = fno_block(f, blk).values[:, 0]
    coef = np.fft.rfft(g)[6] / 16
    assert abs(coef) > 0.5


# -- attention ---------------------------------------------------------------------
def reference_attention(layer, f):
    k = f @ layer.key.weights[0].data + layer.key.biases[0].data
    q = f @ layer.query.weights[0].data + layer.query.biases[0].data
    v = f @ layer.value.weights[0].data + layer.value.biases[0].data
    logits = q @ k.T * layer.temperature
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return (e / e.sum(axis=1, keepdims=True)) @ v


@pytest.mark.parametrize("n", [1, 7, 64])
def test_equal_weight_attention_is_softmax_attention(n):
    rng = np.random.default_rng(n)
    layer = AttentionLayer(3, 4, 2, seed=n)
    f = rng.standard_normal((n, 3))
    d = Discretization(Domain("interval"), np.linspace(0, 1, n)[:, None], np.full(n, 1.0 / n))
    with T.no_grad():
        out = layer(f, d).data[0]
    np.testing.assert_allclose(out, reference_attention(layer, f), atol=1e-12, rtol=0)


def test_single_point_attention_returns_value():
    layer = AttentionLayer(2, 4, 3, seed=1)
    f = np.array([[0.3, -0.7]])
    d = Discretization(Domain("interval"), [[0.4]], [0.123])
    with T.no_grad():
        out = layer(f, d).data[0]
        v = layer.value(f).data
    np.testing.assert_allclose(out, v, atol=1e-15)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), heads=st.sampled_from([1, 2]))
def test_attention_weight_splitting(seed, heads):
    rng = np.random.default_rng(seed)
    n = 10
    d = Discretization(Domain("interval"), np.sort(rng.random(n))[:, None], rng.random(n) + 0.05)
    layer = AttentionLayer(2, 4, 2, heads=heads, seed=seed)
    f = rng.standard_normal((n, 2))
    d2, f2 = split_point(d, f, int(rng.integers(n)))
    with T.no_grad():
        a = layer(f, d).data[0]
        b = layer(f2, d2).data[0]
    np.testing.assert_allclose(b[:n], a, atol=1e-12, rtol=0)


def test_attention_layer_with_positional_features():
    d = torus1d(8)
    layer = AttentionLayer(1 + 2, 4, 1)
    out = attention_layer(Field(d, np.ones((8, 1))), layer, positional_encoding(d.points, 1))
    assert out.values.shape == (8, 1)


# -- encoder-decoder -----------------------------------------------------------------
def test_real_fourier_encoder_picks_out_modes():
    modes = 3
    d = torus2d(12)
    basis = real_basis(d.domain, d.points, modes)
    layer = EncDecLayer(EncDecConfig(encoder="fourier", basis="real", modes=modes), 2, 1, 1)
    for m in range(basis.shape[1]):
        with T.no_grad():
            v = layer.encode(basis[:, m:m + 1], d).data[0, :, 0]
        expect = np.zeros(basis.shape[1])
        expect[m] = 1.0
        np.testing.assert_allclose(v, expect, atol=1e-8)


def test_zeroed_decoder_output_is_constant():
    d = torus1d(16)
    layer = EncDecLayer(EncDecConfig(latent_dim=8, hidden=8), 1, 1, 1, seed=2)
    last = layer.decoder.weights[-1]
    last.assign(np.zeros(last.shape))
    g = encdec_layer(Field(d, band_limited(d.points)), None, layer).values
    np.testing.assert_allclose(g, g[0, 0], atol=0)


@pytest.mark.parametrize("dim, n, modes", [(1, 32, 5), (2, 16, 4)])
def test_fourier_encdec_reproduces_spectral_conv(dim, n, modes):
    cfg = EncDecConfig(encoder="fourier", basis="complex", modes=modes, latent_map="diagonal", decoder="fourier")
    layer = EncDecLayer(cfg, dim, 2, 3, seed=5)
    d = torus1d(n) if dim == 1 else torus2d(n)
    f = Field(d, np.random.default_rng(0).standard_normal((d.n, 2)))
    w = layer.latent_weights.data.reshape(spectral_weight_shape(modes, dim, 2, 3))
    a = encdec_layer(f, None, layer).values
    b = spectral_conv(f, w).values
    np.testing.assert_allclose(a, b, atol=1e-8, rtol=0)


@pytest.mark.parametrize("encoder", ["mlp", "fourier"])
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_encoder_weight_splitting(encoder, seed):
    rng = np.random.default_rng(seed)
    n = 12
    d = Discretization(Domain("torus1d"), np.sort(rng.random(n))[:, None], rng.random(n))
    cfg = EncDecConfig(encoder=encoder, modes=3, latent_dim=5, hidden=6)
    layer = EncDecLayer(cfg, 1, 2, 1, seed=seed)
    f = rng.standard_normal((n, 2))
    d2, f2 = split_point(d, f, int(rng.integers(n)))
    with T.no_grad():
        a = layer.encode(f, d).data
        b = layer.encode(f2, d2).data
    np.testing.assert_allclose(b, a, atol=1e-12, rtol=0)


def test_encdec_config_validation():
    with pytest.raises(InvalidArgument):
        EncDecConfig(latent_map="diagonal")
    with pytest.raises(InvalidArgument):
        EncDecConfig(encoder="fourier", decoder="fourier")


# -- normalization ---------------------------------------------------------------------
def test_equal_weight_mean_is_arithmetic_mean():
    rng = np.random.default_rng(0)
    d = torus1d(16)
    v = rng.standard_normal((16, 2))
    stats = normalization(Field(d, v))
    np.testing.assert_allclose(stats.mean, v.mean(axis=0), atol=1e-15)
    np.testing.assert_allclose(stats.std, v.std(axis=0), atol=1e-15)


def test_constant_field_statistics():
    d = torus2d(4)
    f = Field(d, np.full((16, 1), 3.0))
    stats = normalization(f)
    np.testing.assert_allclose(stats.mean, [3.0])
    np.testing.assert_allclose(stats.std, [0.0], atol=1e-15)
    np.testing.assert_array_equal(standardize(f, stats).values, 0.0)


def test_mean_is_resolution_consistent():
    chain = refine(uniform_grid(Domain("interval"), 65), 1)
    mus = [normalization(Field(d, np.exp(d.points))).mean[0] for d in chain]
    assert abs(mus[0] - mus[1]) < 1e-4


def test_standardize_roundtrip_and_double_standardize_refused():
    d = torus1d(8)
    f = Field(d, np.random.default_rng(1).standard_normal((8, 1)))
    stats = normalization(f)
    s = standardize(f, stats)
    with pytest.raises(InvalidArgument):
        standardize(s, stats)
    np.testing.assert_allclose(destandardize(s, stats).values, f.values, atol=1e-14)


def test_batch_normalization_matches_per_field_average():
    d = torus1d(8)
    v = np.random.default_rng(2).standard_normal((3, 8, 2))
    a = batch_normalization(v, d.weights)
    b = normalization([Field(d, x) for x in v])
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-15)
    np.testing.assert_allclose(a.std, b.std, atol=1e-15)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_normalization_weight_splitting(seed):
    rng = np.random.default_rng(seed)
    n = 9
    d = Discretization(Domain("interval"), np.sort(rng.random(n))[:, None], rng.random(n))
    v = rng.standard_normal((n, 2))
    d2, v2 = split_point(d, v, int(rng.integers(n)))
    a, b = normalization(Field(d, v)), normalization(Field(d2, v2))
    np.testing.assert_allclose(b.mean, a.mean, atol=1e-12)
    np.testing.assert_allclose(b.std, a.std, atol=1e-12)


# -- padding -------------------------------------------------------------------------
def test_pad_counts():
    d = uniform_grid(Domain("interval"), 64)
    padded, p = domain_padding(Field(d, np.ones((64, 1))), 0.25)
    assert p == 16
    assert padded.disc.grid_shape == (96,)
    assert padded.disc.domain.periodic


def test_unpad_inverts_pad():
    d = uniform_grid(Domain("square"), 10)
    f = Field(d, np.random.default_rng(3).standard_normal((100, 2)))
    padded, p = domain_padding(f, 0.2)
    np.testing.assert_array_equal(unpad(padded, p, d).values, f.values)


def test_pad_width_in_domain_units_is_resolution_independent():
    widths = []
    for n in (64, 128):
        d = uniform_grid(Domain("interval"), n)
        padded, p = domain_padding(Field(d, np.ones((n, 1))), 0.25)
        widths.append(d.domain.lower[0] - padded.disc.domain.lower[0])
    assert abs(widths[0] - widths[1]) <= 1 / 127


def test_grid_tensor_padding_roundtrip():
    x = T.tensor(np.random.default_rng(0).standard_normal((2, 8, 8, 1)))
    y = pad_grid_tensor(x, 0.25, axes=(1, 2))
    assert y.shape == (2, 12, 12, 1)
    np.testing.assert_array_equal(unpad_grid_tensor(y, (2, 2), (1, 2)).data, x.data)


def test_padding_rejects_torus():
    with pytest.raises(InvalidArgument):
        domain_padding(Field(torus1d(8), np.ones((8, 1))), 0.25)


# -- kernel-interpolated conv --------------------------------------------------------
def test_interpolated_conv_at_reference_is_discrete_conv():
    rng = np.random.default_rng(0)
    d = torus1d(32)
    taps = rng.standard_normal(5)
    f = Field(d, band_limited(d.points))
    a = kernel_interpolated_conv(f, taps, 32).values
    with T.no_grad():
        b = discrete_conv(f.values, d, taps).data[0]
    np.testing.assert_array_equal(a, b)


def test_interpolated_conv_keeps_physical_width():
    k, n_ref, n = 2, 16, 32
    taps = np.random.default_rng(1).random(2 * k + 1) + 0.1
    d = torus1d(n)
    f = np.random.default_rng(2).standard_normal((n, 1))
    base = kernel_interpolated_conv(Field(d, f), taps, n_ref).values
    j, reach = 10, k * n // n_ref
    for o in range(-n // 2, n // 2):
        f2 = f.copy()
        f2[(j + o) % n] += 1.0
        changed = kernel_interpolated_conv(Field(d, f2), taps, n_ref).values[j, 0] != base[j, 0]
        assert changed == (abs(o) <= reach)


def test_interpolated_conv_converges_to_fixed_width_average():
    # taps {0,1,0} at spacing h0 define a hat kernel of width h0: refining the
    # grid converges (order 2) to the hat average, not to f
    n_ref = 16
    h0 = 1 / n_ref
    hat = (np.sin(np.pi * h0) / (np.pi * h0)) ** 2
    ns = [32, 64, 128, 256, 512]
    to_hat, to_f = [], []
    for n in ns:
        d = torus1d(n)
        f = np.sin(2 * np.pi * d.points)
        g = kernel_interpolated_conv(Field(d, f), [0.0, 1.0, 0.0], n_ref).values
        to_hat.append(np.sqrt(d.weights @ (g - hat * f) ** 2)[0])
        to_f.append(np.sqrt(d.weights @ (g - f) ** 2)[0])
    order = -np.polyfit(np.log(ns), np.log(to_hat), 1)[0]
    assert order > 1.9
    assert min(to_f) > 0.5 * abs(1 - hat) / np.sqrt(2)


def test_interpolated_identity_taps_reproduce_f_at_reference():
    for n in (16, 64, 256):
        d = torus1d(n)
        f = np.sin(2 * np.pi * d.points)
        g = kernel_interpolated_conv(Field(d, f), [0.0, 1.0, 0.0], n).values
        np.testing.assert_array_equal(g, f)


# -- parameter counts and gradients --------------------------------------------------
def layer_zoo(seed):
    return {
        "kernelnet": (KernelNet([2, 4, 2], seed=seed), lambda L, f, d: L(f)),
        "integral_linear": (IntegralTransform(KernelNet([2, 4, 2], seed=seed), KernelNet([1, 2], seed=seed + 1)),
                            lambda L, f, d: L(f, d)),
        "integral_nonlinear": (IntegralTransform(KernelNet([4, 4, 2], seed=seed), variant="nonlinear", radius=0.3),
                               lambda L, f, d: L(f, d)),
        "conv_operator": (ConvOperator(KernelNet([1, 4, 2], seed=seed), 0.2), lambda L, f, d: L(f, d)),
        "spectral": (SpectralConv(2, 2, 3, dim=1, seed=seed), lambda L, f, d: L(f, d)),
        "spectral_query": (SpectralConv(2, 1, 3, dim=1, seed=seed), lambda L, f, d: L(f, d, n_out=8)),
        "fno_block": (FNOBlock(2, 3, dim=1, seed=seed), lambda L, f, d: L(f, d)),
        "attention": (AttentionLayer(2, 4, 2, heads=2, seed=seed), lambda L, f, d: L(f, d)),
        "encdec_mlp": (EncDecLayer(EncDecConfig(latent_dim=3, hidden=4), 1, 2, 1, seed=seed),
                       lambda L, f, d: L(f, d)),
        "encdec_fourier": (EncDecLayer(EncDecConfig(encoder="fourier", modes=3, latent_map="diagonal",
                                                    decoder="fourier"), 1, 2, 2, seed=seed),
                           lambda L, f, d: L(f, d)),
        "interp_conv": (KernelInterpolatedConv(init_param((3, 2, 2), seed=seed), 8), lambda L, f, d: L(f, d)),
    }


@pytest.mark.parametrize("name", sorted(layer_zoo(0)))
def test_parameter_count_independent_of_resolution(name):
    layer, call = layer_zoo(0)[name]
    before = layer.num_parameters()
    for n in (16, 1024):
        d = torus1d(n)
        with T.no_grad(), warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionWarning)
            if name != "kernelnet" and n == 1024 and name.startswith(("integral", "attention")):
                d = torus1d(64)
            call(layer, np.ones((d.n, 2)), d)
        assert layer.num_parameters() == before


@pytest.mark.parametrize("name", sorted(layer_zoo(0)))
@pytest.mark.parametrize("seed", range(10))
def test_layer_passes_grad_check(name, seed):
    layer, call = layer_zoo(seed)[name]
    rng = np.random.default_rng(seed)
    d = torus1d(16)
    f = Parameter(rng.standard_normal((2, 16, 2)), name="input")
    out_shape = call(layer, f, d).shape
    c = rng.standard_normal(out_shape)
    fn = lambda: T.sum_(call(layer, f, d) * c)
    report = grad_check(fn, layer.parameters() + [f])
    assert report.passed, str(report)
