"""Positional encoding, weighted normalization and domain padding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..discretization import Discretization, Domain, Field
from ..errors import InvalidArgument, ShapeError
from ..tensor import Tensor, as_tensor, take
from .common import grid_spacing

NORM_EPS = 1e-8


def positional_encoding(coords, num_frequencies: int) -> np.ndarray:
    """Sin/cos features of angles ``2^k pi x``, ``k = 0..F-1``, per axis.

    Output has ``2 F d`` columns ordered axis, then frequency, then (sin, cos).
    """
    if num_frequencies < 1:
        raise InvalidArgument(f"num_frequencies must be >= 1, got {num_frequencies}")
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    angles = (2.0 ** np.arange(num_frequencies)) * np.pi * x[..., None]
    feats = np.stack([np.sin(angles), np.cos(angles)], axis=-1)
    return feats.reshape(x.shape[0], -1)


def concat_to_field(field: Field, features) -> Field:
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape[0] != field.disc.n:
        raise ShapeError(f"{feats.shape[0]} feature rows for {field.disc.n} points")
    return Field(field.disc, np.concatenate([field.values, feats.reshape(field.disc.n, -1)], axis=1))


# -- normalization -------------------------------------------------------------
@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def _weighted_stats(values: np.ndarray, weights: np.ndarray):
    w = weights / weights.sum()
    mu = np.einsum("...nc,n->...c", values, w)
    var = np.einsum("...nc,n->...c", (values - mu[..., None, :]) ** 2, w)
    return mu, np.sqrt(var)


def normalization(fields) -> NormStats:
    """Quadrature-weighted per-channel mean and std.

    ``mu = sum f Delta / sum Delta`` and ``sigma^2 = sum (f - mu)^2 Delta / sum Delta``.
    For several fields the per-sample statistics are averaged.
    """
    if isinstance(fields, Field):
        fields = [fields]
    mus, sigmas = [], []
    for f in fields:
        mu, sigma = _weighted_stats(f.values, f.disc.weights)
        mus.append(mu)
        sigmas.append(sigma)
    return NormStats(np.mean(mus, axis=0), np.mean(sigmas, axis=0))


def batch_normalization(values: np.ndarray, weights: np.ndarray) -> NormStats:
    """Same as :func:`normalization` for a ``(B, n, c)`` array on one discretization."""
    mu, sigma = _weighted_stats(np.asarray(values, dtype=np.float64), np.asarray(weights, dtype=np.float64))
    return NormStats(mu.mean(axis=0), sigma.mean(axis=0))


def standardize(field: Field, stats: NormStats) -> Field:
    """``(f - mu) / max(sigma, eps)``; refuses an already standardized field."""
    if field.standardized:
        raise InvalidArgument("field is already standardized")
    values = (field.values - stats.mean) / np.maximum(stats.std, NORM_EPS)
    return Field(field.disc, values, standardized=True)


def destandardize(field: Field, stats: NormStats) -> Field:
    if not field.standardized:
        raise InvalidArgument("field is not standardized")
    return Field(field.disc, field.values * np.maximum(stats.std, NORM_EPS) + stats.mean)


# -- padding -------------------------------------------------------------------
def pad_count(n: int, pad_fraction: float) -> int:
    if pad_fraction < 0:
        raise InvalidArgument(f"pad_fraction must be >= 0, got {pad_fraction}")
    return int(round(pad_fraction * n))


def pad_indices(n: int, p: int) -> np.ndarray:
    """Indices replicating the boundary values ``p`` times on each side."""
    return np.clip(np.arange(-p, n + p), 0, n - 1)


def pad_grid_tensor(x, pad_fraction: float, axes) -> Tensor:
    """Edge padding of a grid tensor along ``axes`` (differentiable)."""
    x = as_tensor(x)
    for ax in axes:
        n = x.shape[ax]
        x = take(x, pad_indices(n, pad_count(n, pad_fraction)), axis=ax)
    return x


def unpad_grid_tensor(x, counts, axes) -> Tensor:
    x = as_tensor(x)
    idx = [slice(None)] * x.ndim
    for ax, p in zip(axes, counts):
        idx[ax] = slice(p, x.shape[ax] - p)
    return x[tuple(idx)]


def domain_padding(field: Field, pad_fraction: float):
    """Extend a bounded equispaced grid to a larger torus by edge replication.

    Returns ``(padded_field, pad)`` where ``pad`` is the per-side point count.
    The padded grid keeps the spacing, so the physical pad width is
    ``pad * h`` for every resolution.
    """
    disc = field.disc
    if not disc.is_grid or disc.domain.periodic:
        raise InvalidArgument("domain_padding needs a grid on a non-periodic domain")
    n = disc.grid_shape[0]
    p = pad_count(n, pad_fraction)
    h = grid_spacing(disc)
    grid = disc.to_grid(field.values)
    idx = pad_indices(n, p)
    for ax in range(disc.dim):
        grid = np.take(grid, idx, axis=ax)
    m = n + 2 * p
    lo = disc.domain.lower - p * h
    bounds = tuple((float(lo[k]), float(lo[k] + m * h[k])) for k in range(disc.dim))
    kind = "torus1d" if disc.dim == 1 else "torus2d"
    axes = [lo[k] + h[k] * np.arange(m) for k in range(disc.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    weights = np.full(points.shape[0], float(np.prod(h)))
    torus = Discretization(Domain(kind, bounds), points, weights, grid_shape=(m,) * disc.dim, rule="grid")
    values = grid.reshape(-1, field.channels)
    return Field(torus, values, field.standardized), p


def unpad(padded: Field, pad: int, original: Discretization) -> Field:
    """Crop ``pad`` points per side and restore the original discretization."""
    m = padded.disc.grid_shape[0]
    grid = padded.disc.to_grid(padded.values)
    sl = (slice(pad, m - pad),) * padded.disc.dim
    values = original.from_grid(grid[sl])
    return Field(original, values, padded.standardized)
