"""Domains, discretizations (points + quadrature weights) and sampled fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidArgument, ShapeError

DOMAIN_KINDS = {"interval": 1, "torus1d": 1, "square": 2, "torus2d": 2}

# tolerance for "inside the domain" checks on stored coordinates
_INSIDE_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    kind: str
    bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise InvalidArgument(f"unknown domain kind {self.kind!r}")
        d = DOMAIN_KINDS[self.kind]
        bounds = self.bounds
        if bounds is None:
            bounds = ((0.0, 1.0),) * d
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != d:
            raise InvalidArgument(f"{self.kind} needs {d} axis bounds, got {len(bounds)}")
        for lo, hi in bounds:
            if not lo < hi:
                raise InvalidArgument(f"domain bounds must satisfy lower < upper, got ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return DOMAIN_KINDS[self.kind]

    @property
    def periodic(self) -> bool:
        return self.kind.startswith("torus")

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map coordinates into the fundamental cell (identity for non-periodic kinds)."""
        points = np.asarray(points, dtype=np.float64)
        if not self.periodic:
            return points
        return self.lower + np.mod(points - self.lower, self.lengths)

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pairwise ``b - a`` of shape (len(a), len(b), d); minimum image on tori."""
        diff = np.asarray(b)[None, :, :] - np.asarray(a)[:, None, :]
        if self.periodic:
            L = self.lengths
            diff = diff - L * np.round(diff / L)
        return diff

    def contains(self, points: np.ndarray, tol: float = _INSIDE_TOL) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        lo, hi = self.lower, self.upper
        if self.periodic:
            inside = (points >= lo - tol) & (points < hi + tol)
        else:
            inside = (points >= lo - tol) & (points <= hi + tol)
        return np.all(inside, axis=-1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bounds": [list(b) for b in self.bounds]}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(d["kind"], tuple(tuple(b) for b in d["bounds"]))


@dataclass(frozen=True, eq=False)
class Discretization:
    """A point cloud with per-point quadrature weights.

    For grids, ``grid_shape`` is set and ``grid_order`` (optional) lists the
    storage rows in row-major grid order.  Refined grids keep the coarse
    points as a prefix, so their storage order is not row-major.
    """

    domain: Domain
    points: np.ndarray
    weights: np.ndarray
    grid_shape: Optional[tuple] = None
    grid_order: Optional[np.ndarray] = None
    rule: str = "custom"
    density: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != self.domain.dim:
            raise ShapeError(f"points must be (n, {self.domain.dim}), got {pts.shape}")
        n = pts.shape[0]
        if n < 1:
            raise InvalidArgument("a discretization needs at least one point")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != n:
            raise ShapeError(f"{w.shape[0]} weights for {n} points")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgument("quadrature weights must be finite and nonnegative")
        if not np.all(self.domain.contains(pts)):
            bad = int(np.argmin(self.domain.contains(pts)))
            raise InvalidArgument(f"point #{bad} {pts[bad].tolist()} lies outside {self.domain.bounds}")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "weights", _readonly(w))
        if self.grid_shape is not None:
            shape = tuple(int(s) for s in self.grid_shape)
            if int(np.prod(shape)) != n:
                raise ShapeError(f"grid shape {shape} does not match {n} points")
            object.__setattr__(self, "grid_shape", shape)
        if self.grid_order is not None:
            order = np.asarray(self.grid_order, dtype=np.int64)
            if self.grid_shape is None or sorted(order.tolist()) != list(range(n)):
                raise InvalidArgument("grid_order must be a permutation of a grid discretization")
            if np.array_equal(order, np.arange(n)):
                order = None
            else:
                order.setflags(write=False)
            object.__setattr__(self, "grid_order", order)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def is_grid(self) -> bool:
        return self.grid_shape is not None

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape per-point values ``(..., n, c)`` to ``(..., *grid_shape, c)``."""
        if not self.is_grid:
            raise InvalidArgument("discretization is not a grid")
        values = np.asarray(values)
        if self.grid_order is not None:
            values = np.take(values, self.grid_order, axis=-2)
        return values.reshape(values.shape[:-2] + self.grid_shape + values.shape[-1:])

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_grid`."""
        d = len(self.grid_shape)
        values = np.asarray(values)
        flat = values.reshape(values.shape[: -d - 1] + (self.n,) + values.shape[-1:])
        if self.grid_order is not None:
            flat = np.take(flat, np.argsort(self.grid_order), axis=-2)
        return flat


@dataclass(frozen=True, eq=False)
class Field:
    disc: Discretization
    values: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ShapeError(f"field values must be (n, c), got {v.shape}")
        if v.shape[0] != self.disc.n:
            raise ShapeError(f"{v.shape[0]} value rows for {self.disc.n} points")
        if v.shape[1] < 1:
            raise ShapeError("fields need at least one channel")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class RefinementChain:
    """Nested discretizations; each level's points prefix the next level's."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise InvalidArgument("empty refinement chain")
        for k, (a, b) in enumerate(zip(levels, levels[1:])):
            if b.n < a.n or not np.array_equal(b.points[: a.n], a.points):
                raise InvalidArgument(f"level {k + 1} does not contain level {k} as a prefix")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, k):
        return self.levels[k]
