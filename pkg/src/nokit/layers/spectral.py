"""Spectral convolution and the FNO block."""
from __future__ import annotations

import warnings

import numpy as np

from ..discretization import Discretization, Field, uniform_grid
from ..errors import InvalidArgument, ShapeError, UnsupportedDomain
from ..tensor import (
    Parameter, Tensor, embed, fft, ifft, init_param, irfft, matmul, rfft, take, transpose,
)
from .common import apply_to_field, batch_values, from_grid, to_grid
from .module import KernelNet, Module, activation


class ResolutionWarning(UserWarning):
    """A grid too coarse to represent every parametrized mode."""


def spectral_weight_shape(modes: int, dim: int, c_in: int, c_out: int) -> tuple:
    """``(m, cin, cout)`` in 1D; ``(2m, m, cin, cout)`` in 2D.

    In 2D the first axis holds modes ``0..m-1`` then ``-m..-1`` (full
    spectrum) and the second axis ``0..m-1`` (real-FFT half spectrum).
    """
    if dim == 1:
        return (modes, c_in, c_out)
    if dim == 2:
        return (2 * modes, modes, c_in, c_out)
    raise InvalidArgument(f"spectral convolution supports 1D and 2D, got {dim}D")


def kept_modes(modes: int, n_in: int, n_out: int) -> int:
    """Modes per axis a grid pair can carry: ``k < n/2`` on both sides."""
    usable = min(modes, (n_in + 1) // 2, (n_out + 1) // 2)
    if usable < modes:
        warnings.warn(
            f"grid with {min(n_in, n_out)} points per axis resolves only {usable} of {modes} modes; "
            "higher modes are dropped",
            ResolutionWarning,
            stacklevel=3,
        )
    return usable


class SpectralConv(Module):
    """rfft, multiply the lowest modes by complex weights (contracting channels), irfft.

    Querying ``n_out != n`` evaluates the band-limited output on a different
    grid (Fourier interpolation); spectra are rescaled by ``n_out / n`` per
    axis so amplitudes do not depend on the resolution.
    """

    def __init__(self, c_in: int, c_out: int, modes: int, dim: int = 2, seed=0,
                 init_std: float | None = None, weights: Parameter | None = None):
        self.c_in, self.c_out, self.modes, self.dim = int(c_in), int(c_out), int(modes), int(dim)
        shape = spectral_weight_shape(self.modes, self.dim, self.c_in, self.c_out)
        if weights is None:
            if init_std is None:
                init_std = 1.0 / (self.c_in * self.c_out) ** 0.5 / 2 ** 0.5
            weights = init_param(shape, "complex_gaussian", seed=seed, sigma=init_std)
        elif tuple(weights.shape) != shape:
            raise ShapeError(f"spectral weights must have shape {shape}, got {weights.shape}")
        self.weights = weights

    def _check(self, disc: Discretization):
        if not disc.domain.periodic:
            raise UnsupportedDomain("spectral convolution needs a torus grid")
        if not disc.is_grid:
            raise InvalidArgument("spectral convolution needs a grid discretization")

    def grid_forward(self, xg: Tensor, n_out=None) -> Tensor:
        """``(B, *grid, c_in)`` to ``(B, *grid_out, c_out)``."""
        if xg.shape[-1] != self.c_in:
            raise ShapeError(f"spectral conv expects {self.c_in} channels, got {xg.shape[-1]}")
        grid = xg.shape[1:1 + self.dim]
        if n_out is None:
            grid_out = grid
        elif np.isscalar(n_out):
            grid_out = (int(n_out),) * self.dim
        else:
            grid_out = tuple(int(v) for v in n_out)
        if self.dim == 1:
            return self._forward_1d(xg, grid[0], grid_out[0])
        return self._forward_2d(xg, grid, grid_out)

    def _forward_1d(self, x, n, n_out):
        mk = kept_modes(self.modes, n, n_out)
        X = take(rfft(x, axis=1), np.arange(mk), axis=1)
        W = self.weights if mk == self.modes else take(self.weights, np.arange(mk), axis=0)
        Y = transpose(matmul(transpose(X, (1, 0, 2)), W), (1, 0, 2))
        if n_out != n:
            Y = Y * (n_out / n)
        return irfft(Y, n_out, axis=1, source_n=n_out)

    def _forward_2d(self, x, grid, grid_out):
        (n1, n2), (o1, o2) = grid, grid_out
        m1 = kept_modes(self.modes, n1, o1)
        m2 = kept_modes(self.modes, n2, o2)
        X = take(rfft(x, axis=2), np.arange(m2), axis=2)
        rows_in = np.concatenate([np.arange(m1), np.arange(n1 - m1, n1)])
        X = take(fft(X, axis=1), rows_in, axis=1)
        W = self.weights
        if m1 != self.modes or m2 != self.modes:
            m = self.modes
            W = take(take(W, np.concatenate([np.arange(m1), np.arange(2 * m - m1, 2 * m)]), axis=0),
                     np.arange(m2), axis=1)
        Y = transpose(matmul(transpose(X, (1, 2, 0, 3)), W), (2, 0, 1, 3))
        scale = (o1 / n1) * (o2 / n2)
        if scale != 1.0:
            Y = Y * scale
        rows_out = np.concatenate([np.arange(m1), np.arange(o1 - m1, o1)])
        Y = ifft(embed(Y, rows_out, o1, axis=1), axis=1)
        return irfft(Y, o2, axis=2, source_n=o2)

    def __call__(self, f, disc: Discretization, n_out: int | None = None) -> Tensor:
        self._check(disc)
        xg = to_grid(batch_values(f), disc)
        yg = self.grid_forward(xg, n_out)
        out_disc = disc if n_out is None else uniform_grid(disc.domain, n_out)
        return from_grid(yg, out_disc)


def spectral_conv(field: Field, weights, n_out: int | None = None) -> Field:
    """Field-level spectral convolution with given complex weights."""
    w = weights if isinstance(weights, Parameter) else Parameter(np.asarray(weights, dtype=np.complex128))
    dim = field.disc.dim
    c_in, c_out = w.shape[-2], w.shape[-1]
    modes = w.shape[1] if dim == 2 else w.shape[0]
    layer = SpectralConv(c_in, c_out, modes, dim, weights=w)
    layer._check(field.disc)
    out_disc = field.disc if n_out is None else uniform_grid(field.disc.domain, n_out)
    return apply_to_field(lambda f: layer(f, field.disc, n_out), field, out_disc)


class FNOBlock(Module):
    """``g = MLP(act(spectral_conv(f) + skip(f)))`` with channel count preserved.

    The skip is a pointwise affine map; it carries modes above the spectral
    cutoff through the block.
    """

    def __init__(self, channels: int, modes: int, dim: int = 2, seed=0, activation_name: str = "gelu",
                 mlp_widths=None, init_std: float | None = None):
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        self.spectral = SpectralConv(channels, channels, modes, dim, seed=(*base, 0), init_std=init_std)
        self.skip = KernelNet([channels, channels], "identity", seed=(*base, 1))
        widths = mlp_widths if mlp_widths is not None else [channels, channels]
        if widths[0] != channels or widths[-1] != channels:
            raise InvalidArgument("block MLP must preserve the channel count")
        self.mlp = KernelNet(widths, "gelu", seed=(*base, 2))
        self.activation_name = activation_name
        self._act = activation(activation_name)
        self.dim = dim

    def grid_forward(self, xg: Tensor, n_out=None) -> Tensor:
        spec = self.spectral.grid_forward(xg, n_out)
        if n_out is not None and spec.shape[1:-1] != xg.shape[1:-1]:
            raise InvalidArgument("FNO blocks keep the resolution; resample in the spectral layer only")
        return self.mlp(self._act(spec + self.skip(xg)))

    def __call__(self, f, disc: Discretization) -> Tensor:
        self.spectral._check(disc)
        return from_grid(self.grid_forward(to_grid(batch_values(f), disc)), disc)


def fno_block(field: Field, block: FNOBlock) -> Field:
    return apply_to_field(lambda f: block(f, field.disc), field)
