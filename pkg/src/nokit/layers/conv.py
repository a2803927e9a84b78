"""Index-based circular correlation on grids and its kernel-interpolated operator form."""
from __future__ import annotations

import numpy as np

from ..discretization import Discretization, Field
from ..errors import InvalidArgument, ShapeError
from ..tensor import (
    Parameter, Tensor, as_tensor, irfft, irfftn, matmul, reshape, rfft, rfftn, segment_sum,
    take, transpose,
)
from .common import apply_to_field, batch_values, from_grid, to_grid
from .module import Module

# kernels with at most this many taps use the direct stencil under method="auto"
DIRECT_MAX_TAPS = 49


def taps_with_channels(taps, dim: int) -> Tensor:
    """Tap tensor shaped ``(2k+1,)*dim + (c_in, c_out)``; scalar taps get 1x1 channels."""
    taps = as_tensor(taps)
    if taps.ndim == dim:
        taps = reshape(taps, taps.shape + (1, 1))
    if taps.ndim != dim + 2:
        raise ShapeError(f"taps of shape {taps.shape} do not fit a {dim}D convolution")
    for s in taps.shape[:dim]:
        if s % 2 != 1:
            raise InvalidArgument(f"tap side lengths must be odd, got {taps.shape[:dim]}")
    return taps


def _direct(fg: Tensor, taps: Tensor, dim: int) -> Tensor:
    """``g_j = sum_o K_o f_{j-o}`` as a sum of shifted copies."""
    side = taps.shape[:dim]
    out = None
    for t in np.ndindex(*side):
        shifted = fg
        for ax, ti in enumerate(t):
            n = fg.shape[1 + ax]
            o = ti - side[ax] // 2
            shifted = take(shifted, (np.arange(n) - o) % n, axis=1 + ax)
        term = matmul(shifted, taps[t])
        out = term if out is None else out + term
    return out


def _embed_taps(taps: Tensor, grid: tuple, dim: int) -> Tensor:
    """Fold taps onto the periodic grid (offsets ``o mod n``, overlaps add)."""
    emb = taps
    for ax in range(dim):
        side = taps.shape[ax]
        o = np.arange(side) - side // 2
        emb = segment_sum(emb, o % grid[ax], grid[ax], axis=ax)
    return emb


def _via_fft(fg: Tensor, taps: Tensor, dim: int) -> Tensor:
    grid = fg.shape[1:1 + dim]
    kern = _embed_taps(taps, grid, dim)
    if dim == 1:
        kh = rfft(kern, axis=0)
        fh = rfft(fg, axis=1)
        prod = transpose(matmul(transpose(fh, (1, 0, 2)), kh), (1, 0, 2))
        return irfft(prod, grid[0], axis=1, source_n=grid[0])
    kh = rfftn(kern, axes=(0, 1))
    fh = rfftn(fg, axes=(1, 2))
    prod = transpose(matmul(transpose(fh, (1, 2, 0, 3)), kh), (2, 0, 1, 3))
    return irfftn(prod, grid, axes=(1, 2))


def circular_correlation(fg, taps, dim: int, method: str = "auto") -> Tensor:
    """Stencil ``g_j = sum_{o=-k..k} K_o f_{j-o}`` with periodic wrap on a grid tensor.

    ``fg`` has shape ``(B, *grid, c_in)``.  ``method`` is ``direct``
    (shifted sums; untouched inputs outside the stencil leave outputs
    bit-identical), ``fft`` (convolution theorem) or ``auto``.
    """
    fg = as_tensor(fg)
    taps = taps_with_channels(taps, dim)
    if fg.shape[-1] != taps.shape[-2]:
        raise ShapeError(f"taps expect {taps.shape[-2]} channels, field has {fg.shape[-1]}")
    if method == "auto":
        method = "direct" if int(np.prod(taps.shape[:dim])) <= DIRECT_MAX_TAPS else "fft"
    if method == "direct":
        return _direct(fg, taps, dim)
    if method == "fft":
        return _via_fft(fg, taps, dim)
    raise InvalidArgument(f"unknown convolution method {method!r}")


def discrete_conv(f, disc: Discretization, taps, method: str = "auto") -> Tensor:
    """Index-based stencil on a grid discretization, ``(B, n, c)`` in and out."""
    fg = to_grid(batch_values(f), disc)
    return from_grid(circular_correlation(fg, taps, disc.dim, method), disc)


def interpolation_matrix(k: int, n_ref: int, n: int) -> np.ndarray:
    """Rows map the ``2k+1`` reference taps to taps at spacing ``n_ref / n`` tap units.

    Offsets ``o`` with ``|o| n_ref / n <= k`` are kept; each row holds the
    linear interpolation weights at position ``o n_ref / n``.
    """
    kk = (k * n) // n_ref
    rows = np.zeros((2 * kk + 1, 2 * k + 1))
    for r, o in enumerate(range(-kk, kk + 1)):
        num = o * n_ref + k * n
        base, rem = divmod(num, n)
        if rem == 0:
            rows[r, base] = 1.0
        else:
            frac = rem / n
            rows[r, base] = 1.0 - frac
            rows[r, base + 1] = frac
    return rows


def interpolated_taps(taps, n_ref: int, n: int, dim: int) -> Tensor:
    """Effective taps ``(n_ref / n)^d * M K M^T`` at resolution ``n``."""
    taps = taps_with_channels(taps, dim)
    k = taps.shape[0] // 2
    M = interpolation_matrix(k, n_ref, n)
    ratio = n_ref / n
    side = taps.shape[0]
    rest = taps.shape[1:]
    out = reshape(matmul(Tensor(M), reshape(taps, (side, -1))), (M.shape[0],) + rest)
    if dim == 2:
        moved = transpose(out, (1, 0, 2, 3))
        moved = reshape(matmul(Tensor(M), reshape(moved, (side, -1))), (M.shape[0], M.shape[0]) + rest[1:])
        out = transpose(moved, (1, 0, 2, 3))
    if ratio != 1.0:
        out = out * ratio ** dim
    return out


class KernelInterpolatedConv(Module):
    """Discrete taps learned at ``n_ref`` points per axis, applied as a kernel of fixed physical width."""

    def __init__(self, taps: Parameter, n_ref: int, dim: int = 1, method: str = "auto"):
        self.taps = taps
        self.n_ref = int(n_ref)
        self.dim = dim
        self.method = method

    def __call__(self, f, disc: Discretization) -> Tensor:
        n = disc.grid_shape[0]
        eff = interpolated_taps(self.taps, self.n_ref, n, self.dim)
        return discrete_conv(f, disc, eff, self.method)


def kernel_interpolated_conv(field: Field, taps, n_ref: int, method: str = "auto") -> Field:
    layer = KernelInterpolatedConv(as_tensor(taps), n_ref, field.disc.dim, method)
    return apply_to_field(lambda f: layer(f, field.disc), field)
