"""Quadrature-weighted integral transforms on point clouds and grids."""
from __future__ import annotations

import numpy as np

from ..discretization import Discretization, Domain, Field
from ..errors import EmptyNeighborhood, InvalidArgument, ShapeError
from ..tensor import Tensor, as_tensor, concatenate, reshape, segment_sum, take
from .common import apply_to_field, batch_values, grid_spacing
from .module import KernelNet, Module

# pair lists are built in blocks of query points to bound memory
_PAIR_BLOCK = 1 << 22


def _coords(q) -> np.ndarray:
    pts = q.points if isinstance(q, Discretization) else np.asarray(q, dtype=np.float64)
    return pts[:, None] if pts.ndim == 1 else pts


def radius_pairs(domain: Domain, x: np.ndarray, y: np.ndarray, radius: float | None):
    """Index pairs ``(i, j)`` with ``|x_i - y_j| <= radius`` (all pairs if None).

    Distances use the periodic metric on tori.  Pairs are sorted by ``j``,
    then ``i``.  Raises :class:`EmptyNeighborhood` naming the first query
    with no neighbours.
    """
    n, m = len(x), len(y)
    if radius is None:
        jj, ii = np.divmod(np.arange(n * m), n)
        return ii, jj
    block = max(1, _PAIR_BLOCK // max(n, 1))
    ii, jj = [], []
    for start in range(0, m, block):
        ys = y[start:start + block]
        d = domain.displacement(ys, x)
        dist = np.sqrt(np.einsum("jid,jid->ji", d, d))
        j, i = np.nonzero(dist <= radius)
        ii.append(i)
        jj.append(j + start)
    ii = np.concatenate(ii)
    jj = np.concatenate(jj)
    counts = np.bincount(jj, minlength=m)
    if np.any(counts == 0):
        j = int(np.argmin(counts))
        raise EmptyNeighborhood(j, y[j])
    return ii, jj


class IntegralTransform(Module):
    """``g(y_j) = sum_{x_i in B_r(y_j)} K(x_i, y_j[, f(x_i)]) (f(x_i)) Delta_i + b(y_j)``.

    ``variant="linear"`` multiplies the kernel output elementwise with
    ``f(x_i)`` (diagonal kernel, kernel input ``x ⊕ y``, output channels =
    input channels).  ``variant="nonlinear"`` feeds ``x ⊕ y ⊕ f(x_i)`` to the
    kernel and uses its output directly.
    """

    def __init__(self, kernel: KernelNet, bias: KernelNet | None = None, radius: float | None = None,
                 variant: str = "linear"):
        if variant not in ("linear", "nonlinear"):
            raise InvalidArgument(f"unknown integral transform variant {variant!r}")
        if radius is not None and not radius > 0:
            raise InvalidArgument(f"radius must be positive, got {radius}")
        self.kernel = kernel
        self.bias = bias
        self.radius = radius
        self.variant = variant

    def __call__(self, f, disc: Discretization, query=None) -> Tensor:
        f = batch_values(f)
        if f.shape[1] != disc.n:
            raise ShapeError(f"{f.shape[1]} value rows for {disc.n} points")
        x = disc.points
        y = x if query is None else _coords(query)
        d = disc.dim
        ii, jj = radius_pairs(disc.domain, x, y, self.radius)
        pair_xy = np.concatenate([x[ii], y[jj]], axis=1)
        delta = disc.weights[ii][None, :, None]
        fi = take(f, ii, axis=1)
        in_dim = getattr(self.kernel, "in_dim", None)
        if self.variant == "linear":
            if in_dim is not None and in_dim != 2 * d:
                raise ShapeError(f"linear kernel needs {2 * d} inputs, has {in_dim}")
            k = self.kernel(Tensor(pair_xy))[None]
            contrib = k * fi * delta
        else:
            B = f.shape[0]
            if in_dim is not None and in_dim != 2 * d + f.shape[2]:
                raise ShapeError(f"nonlinear kernel needs {2 * d + f.shape[2]} inputs, has {in_dim}")
            xy = Tensor(np.broadcast_to(pair_xy, (B,) + pair_xy.shape))
            contrib = self.kernel(concatenate([xy, fi], axis=2)) * delta
        g = segment_sum(contrib, jj, len(y), axis=1)
        if self.bias is not None:
            g = g + self.bias(Tensor(y))[None]
        return g


def integral_transform(field: Field, query: Discretization | None, kernel: KernelNet,
                       bias: KernelNet | None = None, radius: float | None = None,
                       variant: str = "linear") -> Field:
    layer = IntegralTransform(kernel, bias, radius, variant)
    query = field.disc if query is None else query
    return apply_to_field(lambda f: layer(f, field.disc, query), field, query)


class ConvOperator(Module):
    """``g(y_j) = sum_{|x_i - y_j| <= r} K(y_j - x_i) f(x_i) Delta_i`` on a grid.

    The kernel acts on the (minimum-image) offset and returns either one
    value per pair or one value per channel.
    """

    def __init__(self, kernel, radius: float):
        if not radius > 0:
            raise InvalidArgument(f"radius must be positive, got {radius}")
        self.kernel = kernel
        self.radius = float(radius)
        self._cache = {}

    def _pairs(self, disc: Discretization):
        key = id(disc)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is disc:
            return hit[1:]
        if not disc.is_grid:
            raise InvalidArgument("conv_operator_direct needs an equispaced grid")
        h = grid_spacing(disc)
        if self.radius < float(np.min(h)):
            raise EmptyNeighborhood(0, disc.points[0])
        x = disc.points
        ii, jj = radius_pairs(disc.domain, x, x, self.radius)
        # y_j - x_i with the minimum image on tori
        diff = x[jj] - x[ii]
        if disc.domain.periodic:
            L = disc.domain.lengths
            diff = diff - L * np.round(diff / L)
        self._cache = {key: (disc, ii, jj, diff)}
        return ii, jj, diff

    def __call__(self, f, disc: Discretization) -> Tensor:
        f = batch_values(f)
        ii, jj, diff = self._pairs(disc)
        k = as_tensor(self.kernel(Tensor(diff)))
        contrib = reshape(k, (1,) + k.shape) * take(f, ii, axis=1) * disc.weights[ii][None, :, None]
        return segment_sum(contrib, jj, disc.n, axis=1)


def conv_operator_direct(field: Field, kernel, radius: float) -> Field:
    layer = ConvOperator(kernel, radius)
    return apply_to_field(lambda f: layer(f, field.disc), field)
