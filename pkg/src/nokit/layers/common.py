"""Helpers shared by the layers: batching fields and moving between storage and grid layout."""
from __future__ import annotations

import numpy as np

from ..discretization import Discretization, Field
from ..errors import InvalidArgument, ShapeError
from ..tensor import Tensor, as_tensor, no_grad, reshape, take


def batch_values(x) -> Tensor:
    """Values as a ``(B, n, c)`` tensor; a Field or ``(n, c)`` array gets B = 1."""
    if isinstance(x, Field):
        x = x.values
    x = as_tensor(x)
    if x.ndim == 2:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 3:
        raise ShapeError(f"expected (B, n, c) values, got {x.shape}")
    return x


def to_grid(x: Tensor, disc: Discretization) -> Tensor:
    """``(B, n, c)`` storage order to ``(B, *grid_shape, c)``."""
    if not disc.is_grid:
        raise InvalidArgument("this layer needs a grid discretization")
    if x.shape[1] != disc.n:
        raise ShapeError(f"{x.shape[1]} value rows for {disc.n} points")
    if disc.grid_order is not None:
        x = take(x, disc.grid_order, axis=1)
    return reshape(x, (x.shape[0],) + disc.grid_shape + (x.shape[-1],))


def from_grid(x: Tensor, disc: Discretization) -> Tensor:
    """Inverse of :func:`to_grid`."""
    flat = reshape(x, (x.shape[0], disc.n, x.shape[-1]))
    if disc.grid_order is not None:
        flat = take(flat, np.argsort(disc.grid_order), axis=1)
    return flat


def grid_spacing(disc: Discretization) -> np.ndarray:
    """Per-axis spacing of an equispaced grid."""
    n = np.array(disc.grid_shape, dtype=np.float64)
    L = disc.domain.lengths
    return L / n if disc.domain.periodic else L / np.maximum(n - 1, 1)


def apply_to_field(fn, field: Field, out_disc: Discretization | None = None) -> Field:
    """Run a tensor-level layer on one Field without recording a graph."""
    with no_grad():
        out = fn(batch_values(field))
    out_disc = field.disc if out_disc is None else out_disc
    return Field(out_disc, out.data[0])
