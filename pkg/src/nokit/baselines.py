"""Non-operator layers used as contrast: an index-based stencil and a kNN mean aggregator."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .discretization import Discretization, Field
from .errors import InvalidArgument
from .layers.common import apply_to_field, batch_values
from .layers.conv import discrete_conv, taps_with_channels
from .layers.module import KernelNet, Module
from .tensor import Parameter, Tensor, init_param, take


class DiscreteConvKernel(Module):
    """Index-based taps of odd side length ``2k+1`` per axis, with channels."""

    def __init__(self, k: int, dim: int = 1, c_in: int = 1, c_out: int = 1, seed=0, taps=None):
        if k < 0:
            raise InvalidArgument(f"k must be >= 0, got {k}")
        shape = (2 * k + 1,) * dim + (c_in, c_out)
        if taps is None:
            self.taps = init_param(shape, "uniform_fan_in", seed=seed, fan_in=(2 * k + 1) ** dim * c_in)
        else:
            arr = taps_with_channels(Tensor(taps), dim).data
            if arr.shape != shape:
                raise InvalidArgument(f"taps must have shape {shape}, got {arr.shape}")
            self.taps = Parameter(arr)
        self.k, self.dim = k, dim

    def __call__(self, f, disc: Discretization, method: str = "auto") -> Tensor:
        return discrete_conv(f, disc, self.taps, method)


def discrete_conv_layer(field: Field, kernel, method: str = "direct") -> Field:
    """``g_j = sum_{i=j-k}^{j+k} K_{j-i} f_i`` with no quadrature scaling.

    ``kernel`` is a :class:`DiscreteConvKernel` or a raw tap array.  The
    default direct method keeps outputs bit-identical when inputs outside
    the stencil change.
    """
    taps = kernel.taps if isinstance(kernel, DiscreteConvKernel) else Tensor(kernel)
    return apply_to_field(lambda f: discrete_conv(f, field.disc, taps, method), field)


def knn_indices(disc: Discretization, query: np.ndarray, k: int) -> np.ndarray:
    """``(m, k)`` indices of the ``k`` nearest input points to each query (periodic on tori)."""
    if k > disc.n or k < 1:
        raise InvalidArgument(f"k_neighbors must be in [1, {disc.n}], got {k}")
    dom = disc.domain
    if dom.periodic:
        tree = cKDTree(dom.wrap(disc.points) - dom.lower, boxsize=dom.lengths)
        q = dom.wrap(query) - dom.lower
    else:
        tree = cKDTree(disc.points)
        q = query
    _, idx = tree.query(q, k=k)
    return np.asarray(idx, dtype=np.int64).reshape(len(query), k)


class KnnGnnLayer(Module):
    """``g(y) = mean_{x in kNN(y)} m(x, y) f(x)``: message passing with ``Delta = 1/k``.

    ``message=None`` passes ``f(x)`` unchanged; a :class:`KernelNet` on
    ``x ⊕ y`` scales it per channel, like the diagonal integral kernel.
    """

    def __init__(self, k_neighbors: int, message: KernelNet | None = None):
        if k_neighbors < 1:
            raise InvalidArgument(f"k_neighbors must be >= 1, got {k_neighbors}")
        self.k_neighbors = int(k_neighbors)
        self.message = message

    def __call__(self, f, disc: Discretization, query=None) -> Tensor:
        f = batch_values(f)
        y = disc.points if query is None else (query.points if isinstance(query, Discretization) else query)
        idx = knn_indices(disc, y, self.k_neighbors)
        m, k = idx.shape
        fi = take(f, idx.reshape(-1), axis=1)
        if self.message is not None:
            xy = np.concatenate([disc.points[idx.reshape(-1)], np.repeat(y, k, axis=0)], axis=1)
            fi = fi * self.message(Tensor(xy))[None]
        B, _, c = fi.shape
        return fi.reshape(B, m, k, c).mean(axis=2)


def knn_gnn_layer(field: Field, k_neighbors: int, message: KernelNet | None = None, query=None) -> Field:
    layer = KnnGnnLayer(k_neighbors, message)
    out_disc = field.disc if query is None else query
    return apply_to_field(lambda f: layer(f, field.disc, query), field, out_disc)
