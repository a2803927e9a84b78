"""Gaussian random forcings and their Poisson solutions on the torus.

The task maps a forcing ``f`` to the zero-mean solution ``u`` of
``-Laplace u = f``.  Samples are drawn once at a fine native grid and
subsampled for coarser resolutions, so every resolution sees the same
underlying functions.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .discretization import Discretization, Domain, Field, uniform_grid
from .errors import InvalidArgument, ShapeError, UnsupportedDomain
from .io import container_read, container_write
from .tensor import fftlib, make_rng
from .tensor.fft import is_power_of_two

NATIVE_RESOLUTION = 256
MEAN_TOLERANCE = 1e-6
TASK_NOTE = "Poisson stand-in for a forcing-to-vorticity map: -Laplace u = f on the unit torus, zero-mean gauge"


@dataclass(frozen=True)
class GrfSpec:
    """Gaussian measure with spectral density ``sigma^2 (4 pi^2 |k|^2 + tau^2)^(-alpha)``.

    ``band_limit`` keeps only modes with ``|k_i| < band_limit`` on every
    axis (``None`` keeps all modes the grid resolves).  The ``k = 0`` mode
    is always dropped so samples have zero mean.
    """

    sigma: float = 1.0
    tau: float = 3.0
    alpha: float = 2.0
    seed: int = 0
    band_limit: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidArgument(f"sigma must be positive, got {self.sigma}")
        if not self.tau > 0:
            raise InvalidArgument(f"tau must be positive, got {self.tau}")
        if self.band_limit is not None and self.band_limit < 1:
            raise InvalidArgument(f"band_limit must be >= 1, got {self.band_limit}")

    def to_dict(self) -> dict:
        return asdict(self)


def _torus_grid(disc: Discretization, what: str):
    if not disc.domain.periodic or not disc.is_grid:
        raise UnsupportedDomain(f"{what} needs an equispaced torus grid")
    for n in disc.grid_shape:
        if not is_power_of_two(n):
            raise InvalidArgument(f"{what} needs power-of-two grids, got {disc.grid_shape}")


def _wavenumbers(disc: Discretization):
    """Full-spectrum integer wavenumbers on leading axes, half spectrum on the last."""
    shape = disc.grid_shape
    ks = [np.fft.fftfreq(n, 1.0 / n) for n in shape[:-1]] + [np.arange(shape[-1] // 2 + 1, dtype=np.float64)]
    return np.meshgrid(*ks, indexing="ij")


def grf_sample(spec: GrfSpec, grid: Discretization, seed=None) -> Field:
    """Spectral synthesis on a torus grid.

    White noise is transformed, scaled by the square root of the spectral
    density and transformed back; Hermitian symmetry comes for free because
    the noise is real.  ``seed`` overrides ``spec.seed``.
    """
    _torus_grid(grid, "grf_sample")
    d = grid.dim
    if spec.alpha <= d / 2:
        raise InvalidArgument(f"alpha must exceed d/2 = {d / 2} for a summable spectrum, got {spec.alpha}")
    shape = grid.grid_shape
    rng = make_rng(spec.seed if seed is None else seed)
    noise = rng.standard_normal(shape)
    axes = tuple(range(d))
    k = _wavenumbers(grid)
    L = grid.domain.lengths
    k2 = sum((2 * np.pi * ki / Li) ** 2 for ki, Li in zip(k, L))
    amp = spec.sigma * (k2 + spec.tau ** 2) ** (-spec.alpha / 2)
    amp[(0,) * d] = 0.0
    if spec.band_limit is not None:
        for ki in k:
            amp[np.abs(ki) >= spec.band_limit] = 0.0
    # n^(d/2) turns the unnormalized transform of unit white noise into unit-variance coefficients
    scale = float(np.prod(shape)) ** 0.5
    spec_hat = fftlib.rfftn(noise, axes=axes) * amp
    values = scale * fftlib.irfftn(spec_hat, s=shape, axes=axes)
    return Field(grid, grid.from_grid(values[..., None]))


def poisson_solve(f: Field) -> Field:
    """Zero-mean solution of ``-Laplace u = f`` on a torus grid, per channel.

    A mean below ``1e-6`` in magnitude is removed first; a larger mean has no
    periodic solution and is rejected.
    """
    disc = f.disc
    _torus_grid(disc, "poisson_solve")
    mean = (disc.weights @ f.values) / disc.weights.sum()
    if np.any(np.abs(mean) >= MEAN_TOLERANCE):
        raise InvalidArgument(f"forcing must have zero mean, got {mean.tolist()}")
    d = disc.dim
    axes = tuple(range(d))
    grid = disc.to_grid(f.values - mean)
    k = _wavenumbers(disc)
    k2 = sum((2 * np.pi * ki / Li) ** 2 for ki, Li in zip(k, disc.domain.lengths))
    inv = np.zeros_like(k2)
    np.divide(1.0, k2, out=inv, where=k2 > 0)
    U = fftlib.rfftn(grid, axes=axes) * inv[..., None]
    u = fftlib.irfftn(U, s=disc.grid_shape, axes=axes)
    return Field(disc, disc.from_grid(u))


@dataclass(frozen=True)
class TaskSample:
    forcing: Field
    solution: Field

    def __post_init__(self):
        if self.forcing.disc is not self.solution.disc and not np.array_equal(
                self.forcing.disc.points, self.solution.disc.points):
            raise ShapeError("forcing and solution must share a discretization")


def make_sample(spec: GrfSpec, grid: Discretization, seed=None) -> TaskSample:
    f = grf_sample(spec, grid, seed)
    return TaskSample(f, poisson_solve(f))


class TaskDataset:
    """Forcing/solution pairs stored as ``(N, n, n)`` grids on the unit torus."""

    def __init__(self, forcing: np.ndarray, solution: np.ndarray, metadata: dict | None = None,
                 domain: Domain | None = None):
        forcing = np.asarray(forcing, dtype=np.float64)
        solution = np.asarray(solution, dtype=np.float64)
        if forcing.shape != solution.shape or forcing.ndim < 2:
            raise ShapeError(f"forcing {forcing.shape} and solution {solution.shape} must match as (N, *grid)")
        self.forcing, self.solution = forcing, solution
        self.metadata = dict(metadata or {})
        dim = forcing.ndim - 1
        self.domain = domain if domain is not None else Domain("torus2d" if dim == 2 else "torus1d")
        if self.domain.dim != dim:
            raise ShapeError(f"{dim}D grids on a {self.domain.dim}D domain")

    def __len__(self):
        return self.forcing.shape[0]

    @property
    def native_resolution(self) -> int:
        return self.forcing.shape[1]

    def check_resolution(self, res: int) -> int:
        n = self.native_resolution
        if res > n:
            raise InvalidArgument(f"resolution {res} exceeds the native resolution {n}")
        if res < 1 or n % res:
            raise InvalidArgument(f"resolution {res} is not a divisor of the native resolution {n}")
        return n // res

    def grid(self, res: int) -> Discretization:
        self.check_resolution(res)
        return uniform_grid(self.domain, res)

    def at_resolution(self, res: int, indices=None):
        """``(disc, inputs, targets)`` with values shaped ``(N, res^d, 1)`` by strided subsampling."""
        stride = self.check_resolution(res)
        idx = np.arange(len(self)) if indices is None else np.asarray(indices, dtype=np.int64)
        sl = (idx,) + (slice(None, None, stride),) * (self.forcing.ndim - 1)
        f = self.forcing[sl].reshape(len(idx), -1, 1)
        u = self.solution[sl].reshape(len(idx), -1, 1)
        return self.grid(res), f, u

    def split(self, n_train: int):
        if not 0 < n_train < len(self):
            raise InvalidArgument(f"train split {n_train} must lie strictly between 0 and {len(self)}")
        meta = dict(self.metadata)
        return (TaskDataset(self.forcing[:n_train], self.solution[:n_train], meta, self.domain),
                TaskDataset(self.forcing[n_train:], self.solution[n_train:], meta, self.domain))

    def sample(self, i: int, res: int | None = None) -> TaskSample:
        res = self.native_resolution if res is None else res
        disc, f, u = self.at_resolution(res, [i])
        return TaskSample(Field(disc, f[0]), Field(disc, u[0]))

    def save(self, path) -> None:
        container_write(path, {"forcing": self.forcing, "solution": self.solution}, self.metadata)

    @classmethod
    def load(cls, path) -> "TaskDataset":
        c = container_read(path)
        for name in ("forcing", "solution"):
            if name not in c:
                raise InvalidArgument(f"{path}: dataset file lacks the {name!r} entry")
        return cls(c["forcing"], c["solution"], c.metadata)


def generate_dataset(spec: GrfSpec, n: int = NATIVE_RESOLUTION, count: int = 1, seed: int = 0,
                     path=None, band_limit=True) -> TaskDataset:
    """Draw ``count`` forcings on an ``n x n`` torus grid and solve for each.

    Sample ``i`` uses the seed ``(seed, i)``, so samples do not depend on
    ``count``.  ``band_limit=True`` keeps only modes ``|k_i| < n/4``, so
    halving the resolution leaves every mode it can represent untouched; an
    integer sets the cutoff directly and ``False`` keeps every mode (a cutoff
    already in ``spec`` wins).  ``path`` (optional) receives the container
    file.
    """
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    if band_limit is not False and band_limit is not None and spec.band_limit is None:
        cutoff = max(n // 4, 1) if band_limit is True else int(band_limit)
        spec = GrfSpec(spec.sigma, spec.tau, spec.alpha, spec.seed, cutoff)
    grid = uniform_grid(Domain("torus2d"), n)
    forcing = np.empty((count, n, n))
    solution = np.empty((count, n, n))
    for i in range(count):
        s = make_sample(spec, grid, seed=(seed, i))
        forcing[i] = grid.to_grid(s.forcing.values)[..., 0]
        solution[i] = grid.to_grid(s.solution.values)[..., 0]
    meta = {"task": TASK_NOTE, "grf": spec.to_dict(), "resolution": n, "count": count, "seed": seed,
            "domain": grid.domain.to_dict(), "layout": "(N, n, n) row-major grid values"}
    ds = TaskDataset(forcing, solution, meta)
    if path is not None:
        ds.save(path)
    return ds
