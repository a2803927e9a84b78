"""Complete models: FNO, the parameter-matched discrete-conv net, and an exact solver wrapper."""
from __future__ import annotations

import numpy as np

from .discretization import Discretization
from .errors import InvalidArgument, UnsupportedDomain
from .layers.auxiliary import positional_encoding
from .layers.common import batch_values, from_grid, to_grid
from .layers.conv import circular_correlation
from .layers.module import KernelNet, Module, activation
from .layers.spectral import FNOBlock
from .tensor import Tensor, concatenate, init_param, no_grad


class GridModel(Module):
    """Lift -> blocks -> project on a torus grid, with positional features appended to the input.

    Positional features are taken of ``2 (x - lower) / L``, so every feature is periodic on the
    torus with integer frequencies 1, 2, ..., 2**(F-1). A feature with frequency at or above a
    grid's Nyquist aliases differently on each grid, so zero-shot super/sub-resolution needs
    ``2**(F-1) < n/2`` on the coarsest grid used.

    Subclasses provide ``_blocks`` acting on ``(B, *grid, C)`` tensors.
    """

    kind = "grid"

    def _setup(self, in_channels, out_channels, width, num_frequencies, dim, proj_hidden, seed):
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        self.in_channels, self.out_channels, self.width = in_channels, out_channels, width
        self.num_frequencies, self.dim, self.proj_hidden = num_frequencies, dim, proj_hidden
        lift_in = in_channels + 2 * num_frequencies * dim
        self.lift = KernelNet([lift_in, width], "identity", seed=(*base, 100))
        self.project = KernelNet([width, proj_hidden, out_channels], "gelu", seed=(*base, 101))
        self._pos_cache = {}

    def _positional(self, disc: Discretization) -> np.ndarray:
        key = (disc.grid_shape, tuple(map(tuple, disc.domain.bounds)))
        pos = self._pos_cache.get(key)
        if pos is None:
            dom = disc.domain
            pos = positional_encoding(2.0 * (disc.points - dom.lower) / dom.lengths, self.num_frequencies)
            order = np.arange(disc.n) if disc.grid_order is None else disc.grid_order
            pos = pos[order].reshape(disc.grid_shape + (-1,))
            self._pos_cache = {key: pos}
        return pos

    def __call__(self, f, disc: Discretization) -> Tensor:
        if not disc.domain.periodic or not disc.is_grid:
            raise UnsupportedDomain(f"{type(self).__name__} runs on torus grids")
        xg = to_grid(batch_values(f), disc)
        B = xg.shape[0]
        pos = self._positional(disc)
        xg = concatenate([xg, Tensor(np.broadcast_to(pos, (B,) + pos.shape))], axis=-1)
        h = self.lift(xg)
        h = self._blocks(h)
        return from_grid(self.project(h), disc)

    def predict(self, values: np.ndarray, disc: Discretization) -> np.ndarray:
        with no_grad():
            return self(Tensor(values), disc).data


class FNO(GridModel):
    kind = "fno"

    def __init__(self, in_channels: int = 1, out_channels: int = 1, width: int = 32, modes: int = 16,
                 blocks: int = 2, num_frequencies: int = 3, dim: int = 2, proj_hidden: int = 64, seed=0):
        self._setup(in_channels, out_channels, width, num_frequencies, dim, proj_hidden, seed)
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        self.modes, self.n_blocks = modes, blocks
        self.blocks = [FNOBlock(width, modes, dim, seed=(*base, k)) for k in range(blocks)]
        self.name_parameters()

    def _blocks(self, h):
        for blk in self.blocks:
            h = blk.grid_forward(h)
        return h

    def config(self) -> dict:
        return {"kind": self.kind, "in_channels": self.in_channels, "out_channels": self.out_channels,
                "width": self.width, "modes": self.modes, "blocks": self.n_blocks,
                "num_frequencies": self.num_frequencies, "dim": self.dim, "proj_hidden": self.proj_hidden}


class ConvBlock(Module):
    """``MLP(act(discrete_conv(f) + skip(f)))``: the FNO block with an index-based stencil."""

    def __init__(self, channels: int, k: int, dim: int = 2, seed=0, method: str = "fft"):
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        shape = (2 * k + 1,) * dim + (channels, channels)
        self.taps = init_param(shape, "uniform_fan_in", seed=(*base, 0), fan_in=(2 * k + 1) ** dim * channels)
        self.skip = KernelNet([channels, channels], "identity", seed=(*base, 1))
        self.mlp = KernelNet([channels, channels], "gelu", seed=(*base, 2))
        self._act = activation("gelu")
        self.dim, self.method = dim, method

    def grid_forward(self, xg):
        conv = circular_correlation(xg, self.taps, self.dim, self.method)
        return self.mlp(self._act(conv + self.skip(xg)))


class ConvNet(GridModel):
    """Same layout as :class:`FNO` with ``(2k+1)^d``-tap discrete convolutions in the blocks."""

    kind = "convnet"

    def __init__(self, in_channels: int = 1, out_channels: int = 1, width: int = 32, k: int = 15,
                 blocks: int = 2, num_frequencies: int = 3, dim: int = 2, proj_hidden: int = 64, seed=0):
        self._setup(in_channels, out_channels, width, num_frequencies, dim, proj_hidden, seed)
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        self.k, self.n_blocks = k, blocks
        self.blocks = [ConvBlock(width, k, dim, seed=(*base, j)) for j in range(blocks)]
        self.name_parameters()

    def _blocks(self, h):
        for blk in self.blocks:
            h = blk.grid_forward(h)
        return h

    def config(self) -> dict:
        return {"kind": self.kind, "in_channels": self.in_channels, "out_channels": self.out_channels,
                "width": self.width, "k": self.k, "blocks": self.n_blocks,
                "num_frequencies": self.num_frequencies, "dim": self.dim, "proj_hidden": self.proj_hidden}


def matched_conv_k(modes: int, dim: int = 2) -> int:
    """Stencil half-width whose tap count is closest to the FNO's real spectral parameter count per channel pair."""
    target = 2 * (2 * modes * modes if dim == 2 else modes)
    best = min(range(0, 4 * modes), key=lambda k: abs((2 * k + 1) ** dim - target))
    return best


def build_model(config: dict, seed=0) -> Module:
    cfg = dict(config)
    kind = cfg.pop("kind", None)
    if kind == "fno":
        return FNO(seed=seed, **cfg)
    if kind == "convnet":
        return ConvNet(seed=seed, **cfg)
    raise InvalidArgument(f"unknown model kind {kind!r}")
