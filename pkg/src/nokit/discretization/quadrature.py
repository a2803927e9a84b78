"""Quadrature weights, grid construction, integration and refinement."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import InvalidArgument
from .core import Discretization, Domain, Field, RefinementChain
from .delaunay import delaunay_weights_2d

_DUP_TOL = 1e-12


def riemann_weights_1d(points, domain: Domain) -> np.ndarray:
    """Half-gap weights ``(x[i+1] - x[i-1]) / 2``.

    On an interval the end points also take the gap to the domain boundary,
    so the weights always sum to the interval length.  On a torus the
    neighbours wrap around.
    """
    if domain.dim != 1:
        raise InvalidArgument("riemann_weights_1d needs a one-dimensional domain")
    x = np.asarray(points, dtype=np.float64).reshape(-1)
    (a, b), = domain.bounds
    gaps = np.diff(x)
    if np.any(np.abs(gaps) <= _DUP_TOL):
        raise InvalidArgument("duplicate points in 1D quadrature input")
    if np.any(gaps < 0):
        raise InvalidArgument("points must be strictly increasing")
    if x.size and (x[0] < a - _DUP_TOL or x[-1] > b + _DUP_TOL):
        raise InvalidArgument("points outside the domain")
    n = x.size
    if n == 1:
        return np.array([b - a])
    if domain.periodic:
        L = b - a
        right = np.append(x[1:], x[0] + L)
        left = np.insert(x[:-1], 0, x[-1] - L)
        if right[-1] - x[-1] <= _DUP_TOL:
            raise InvalidArgument("duplicate points under periodic identification")
        return (right - left) / 2
    w = np.empty(n)
    w[1:-1] = (x[2:] - x[:-2]) / 2
    w[0] = (x[1] - x[0]) / 2 + (x[0] - a)
    w[-1] = (x[-1] - x[-2]) / 2 + (b - x[-1])
    return w


def monte_carlo_weights(points, density: Callable) -> np.ndarray:
    """Importance weights ``1 / (n p(x_i))`` for i.i.d. samples drawn from ``p``."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    p = np.asarray(density(pts), dtype=np.float64).reshape(-1)
    if p.shape[0] != n:
        raise InvalidArgument(f"density returned {p.shape[0]} values for {n} points")
    if np.any(~(p > 0)):
        i = int(np.argmin(np.where(p > 0, np.inf, -1.0)))
        raise InvalidArgument(f"density must be strictly positive, got {p[i]} at point #{i}")
    return 1.0 / (n * p)


def integrate(field: Field) -> np.ndarray:
    """Quadrature sum of each channel."""
    return field.disc.weights @ field.values


def _axis_points(domain: Domain, axis: int, n: int) -> np.ndarray:
    lo, hi = domain.bounds[axis]
    if domain.periodic:
        return lo + (hi - lo) * np.arange(n) / n
    if n == 1:
        return np.array([(lo + hi) / 2])
    return np.linspace(lo, hi, n)


def uniform_grid(domain: Domain, n_per_axis: int) -> Discretization:
    """Equispaced tensor grid, row-major storage.

    Tori drop the identified right end point and use equal weights; bounded
    axes include both end points and take 1D Riemann weights (product rule
    in 2D).
    """
    n = int(n_per_axis)
    if n != n_per_axis or n < 1:
        raise InvalidArgument(f"n_per_axis must be a positive integer, got {n_per_axis}")
    axes = [_axis_points(domain, k, n) for k in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    if domain.periodic:
        weights = np.full(points.shape[0], domain.measure / points.shape[0])
    else:
        ax_w = [riemann_weights_1d(a, Domain("interval", (domain.bounds[k],))) for k, a in enumerate(axes)]
        weights = ax_w[0]
        for w in ax_w[1:]:
            weights = np.multiply.outer(weights, w).reshape(-1)
    return Discretization(domain, points, weights, grid_shape=(n,) * domain.dim, rule="grid")


def point_cloud(domain: Domain, points, rule: str = "riemann", density: Callable | None = None) -> Discretization:
    """Wrap an arbitrary cloud (any storage order) and compute its weights."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if rule == "riemann":
        if domain.dim != 1:
            raise InvalidArgument("the riemann rule applies to 1D clouds only")
        order = np.argsort(pts[:, 0], kind="stable")
        w = np.empty(len(pts))
        w[order] = riemann_weights_1d(pts[order, 0], domain)
    elif rule == "delaunay":
        if domain.dim != 2:
            raise InvalidArgument("the delaunay rule applies to 2D clouds only")
        w = delaunay_weights_2d(pts)
    elif rule == "monte_carlo":
        if density is None:
            raise InvalidArgument("monte_carlo rule needs a density")
        w = monte_carlo_weights(pts, density)
    elif rule == "uniform":
        w = np.full(len(pts), domain.measure / len(pts))
    else:
        raise InvalidArgument(f"unknown weight rule {rule!r}")
    return Discretization(domain, pts, w, rule=rule, density=density)


def _refine_once(disc: Discretization) -> Discretization:
    m = disc.grid_shape[0]
    fine_n = 2 * m if disc.domain.periodic else 2 * m - 1
    fine = uniform_grid(disc.domain, fine_n)
    # coarse grid multi-index i maps to fine multi-index 2 i; grid_order maps
    # row-major position to storage row, so its inverse gives each row's position
    coarse_rm = np.arange(disc.n) if disc.grid_order is None else np.argsort(disc.grid_order)
    coarse_idx = np.stack(np.unravel_index(coarse_rm, disc.grid_shape), axis=-1)
    old_in_fine = np.ravel_multi_index(tuple((2 * coarse_idx).T), fine.grid_shape)
    is_old = np.zeros(fine.n, dtype=bool)
    is_old[old_in_fine] = True
    new_rm = np.nonzero(~is_old)[0]
    storage_to_rm = np.concatenate([old_in_fine, new_rm])
    points = np.concatenate([disc.points, fine.points[new_rm]])
    weights = fine.weights[storage_to_rm]
    grid_order = np.argsort(storage_to_rm)
    return Discretization(disc.domain, points, weights, grid_shape=fine.grid_shape,
                          grid_order=grid_order, rule="grid")


def refine(disc: Discretization, levels: int) -> RefinementChain:
    """Dyadic refinement chain starting at ``disc`` (``levels`` extra levels)."""
    if not disc.is_grid or disc.rule != "grid":
        raise InvalidArgument("refine supports grid discretizations only")
    if levels < 0:
        raise InvalidArgument("levels must be nonnegative")
    chain = [disc]
    for _ in range(levels):
        chain.append(_refine_once(chain[-1]))
    return RefinementChain(tuple(chain))


def subsample(field: Field, target_n: int, seed: int = 0) -> Field:
    """Coarser view of ``field``.

    Grids are strided (``target_n`` is the total point count of the coarse
    grid); clouds draw a uniform subset without replacement and recompute
    weights with the discretization's own rule.
    """
    disc = field.disc
    if target_n > disc.n or target_n < 1:
        raise InvalidArgument(f"cannot subsample {disc.n} points to {target_n}")
    if disc.is_grid and disc.rule == "grid":
        d = disc.dim
        m = int(round(target_n ** (1.0 / d)))
        if m ** d != target_n:
            raise InvalidArgument(f"{target_n} is not a grid size in {d}D")
        n = disc.grid_shape[0]
        if disc.domain.periodic:
            if n % m:
                raise InvalidArgument(f"grid {n} is not divisible into {m}")
            stride = n // m
        else:
            if m == 1 or (n - 1) % (m - 1):
                raise InvalidArgument(f"grid {n} cannot be strided down to {m}")
            stride = (n - 1) // (m - 1)
        coarse = uniform_grid(disc.domain, m)
        grid = disc.to_grid(field.values)
        sl = (slice(None, None, stride),) * d
        values = grid[sl].reshape(-1, field.channels)
        return Field(coarse, values, field.standardized)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(disc.n, size=target_n, replace=False))
    sub = point_cloud(disc.domain, disc.points[idx], rule=disc.rule, density=disc.density)
    return Field(sub, field.values[idx], field.standardized)
