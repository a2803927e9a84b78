"""Losses defined on functions: quadrature-weighted L2, relative L2, H1 and a Poisson residual.

Every loss accepts :class:`Field` pairs (returning a float) or ``(B, n, c)``
tensors together with their discretization (returning a scalar tensor that
averages the per-sample losses over the batch).
"""
from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from .discretization import Discretization, Field
from .errors import InvalidArgument, ShapeError, UnsupportedDomain
from .layers.common import batch_values, from_grid, grid_spacing, to_grid
from .tensor import Tensor, abs2, irfft, mul, no_grad, rfft, sqrt, sub, take
from .tensor.fft import is_power_of_two

LOSS_KINDS = ("l2", "relative_l2", "h1", "poisson_residual")
DERIVATIVE_MODES = ("fourier", "central-difference")


def _prepare(pred, target, disc):
    """Batched tensors, the shared discretization, and whether to return a float."""
    as_float = isinstance(pred, Field)
    if isinstance(pred, Field):
        disc = pred.disc if disc is None else disc
    if isinstance(target, Field) and target.disc is not disc:
        other = target.disc
        if other.n != disc.n or not np.array_equal(other.points, disc.points):
            raise ShapeError("loss arguments live on different discretizations")
    if disc is None:
        raise InvalidArgument("a discretization is needed for tensor arguments")
    p, t = batch_values(pred), batch_values(target)
    if p.shape != t.shape:
        raise ShapeError(f"loss arguments have shapes {p.shape} and {t.shape}")
    if p.shape[1] != disc.n:
        raise ShapeError(f"{p.shape[1]} value rows for {disc.n} points")
    return p, t, disc, as_float


def _finish(per_sample: Tensor, as_float: bool):
    loss = per_sample.mean()
    return float(loss.data) if as_float else loss


def _maybe_no_grad(active: bool):
    return no_grad() if active else nullcontext()


def _weighted_sq(e: Tensor, disc: Discretization) -> Tensor:
    """Per-sample ``sum_j |e_j|^2 Delta_j`` over points and channels."""
    return (abs2(e) * disc.weights[None, :, None]).sum(axis=(1, 2))


def l2_loss(pred, target, disc: Discretization | None = None):
    """``sum_j |g - g*|^2(y_j) Delta_j`` (squared L2 norm of the error)."""
    p, t, disc, as_float = _prepare(pred, target, disc)
    with _maybe_no_grad(as_float):
        return _finish(_weighted_sq(sub(p, t), disc), as_float)


def relative_l2(pred, target, disc: Discretization | None = None):
    """``||g - g*|| / ||g*||`` with quadrature norms; averaged over a batch."""
    p, t, disc, as_float = _prepare(pred, target, disc)
    with _maybe_no_grad(as_float):
        denom = _weighted_sq(t, disc).data
        if np.any(denom <= 0):
            raise InvalidArgument("relative L2 error is undefined for a zero-norm target")
        per = sqrt(_weighted_sq(sub(p, t), disc)) * (1.0 / np.sqrt(denom))
        return _finish(per, as_float)


# -- derivatives ---------------------------------------------------------------
def _check_fourier_grid(disc: Discretization):
    if not disc.domain.periodic or not disc.is_grid:
        raise UnsupportedDomain("Fourier differentiation needs an equispaced torus grid")
    for n in disc.grid_shape:
        if not is_power_of_two(n):
            raise InvalidArgument(f"Fourier differentiation needs power-of-two grids, got {n}")


def _fourier_multiplier(n: int, length: float, axis: int, ndim: int, order: int = 1) -> np.ndarray:
    k = np.arange(n // 2 + 1, dtype=np.float64)
    mult = (2j * np.pi * k / length) ** order
    if n % 2 == 0 and order % 2:
        # the unpaired Nyquist mode has no well-defined odd derivative
        mult[n // 2] = 0.0
    shape = [1] * ndim
    shape[axis] = n // 2 + 1
    return mult.reshape(shape)


def grid_derivative(xg: Tensor, disc: Discretization, axis: int, mode: str = "fourier") -> Tensor:
    """Derivative of ``(B, *grid, c)`` values along grid axis ``axis``."""
    if mode not in DERIVATIVE_MODES:
        raise InvalidArgument(f"unknown derivative mode {mode!r}")
    if not 0 <= axis < disc.dim:
        raise InvalidArgument(f"axis {axis} out of range for a {disc.dim}D grid")
    ta = axis + 1
    n = disc.grid_shape[axis]
    if mode == "fourier":
        _check_fourier_grid(disc)
        mult = _fourier_multiplier(n, disc.domain.lengths[axis], ta, xg.ndim)
        return irfft(mul(rfft(xg, axis=ta), mult), n, axis=ta)
    if not disc.is_grid:
        raise InvalidArgument("finite differences need a grid discretization")
    h = grid_spacing(disc)[axis]
    idx = np.arange(n)
    if disc.domain.periodic:
        ip, im = (idx + 1) % n, (idx - 1) % n
        span = np.full(n, 2.0)
    else:
        # one-sided differences at the two end points
        ip, im = np.minimum(idx + 1, n - 1), np.maximum(idx - 1, 0)
        span = (ip - im).astype(np.float64)
    shape = [1] * xg.ndim
    shape[ta] = n
    coef = (1.0 / (span * h)).reshape(shape)
    return mul(sub(take(xg, ip, axis=ta), take(xg, im, axis=ta)), coef)


def fourier_derivative(field: Field, axis: int = 0) -> Field:
    """Spectral derivative along ``axis``: mode ``k`` is multiplied by ``2 pi i k / L``.

    The Nyquist mode of an even-length axis is set to zero.
    """
    _check_fourier_grid(field.disc)
    with no_grad():
        xg = to_grid(batch_values(field), field.disc)
        d = grid_derivative(xg, field.disc, axis, "fourier")
        out = from_grid(d, field.disc)
    return Field(field.disc, out.data[0])


def h1_loss(pred, target, disc: Discretization | None = None, mode: str = "fourier"):
    """``sum_j (|g - g*|^2 + |grad g - grad g*|^2) Delta_j``."""
    if mode not in DERIVATIVE_MODES:
        raise InvalidArgument(f"unknown derivative mode {mode!r}")
    p, t, disc, as_float = _prepare(pred, target, disc)
    if mode == "fourier":
        _check_fourier_grid(disc)
    elif not disc.is_grid:
        raise InvalidArgument("finite differences need a grid discretization")
    with _maybe_no_grad(as_float):
        e = sub(p, t)
        total = _weighted_sq(e, disc)
        eg = to_grid(e, disc)
        for ax in range(disc.dim):
            de = from_grid(grid_derivative(eg, disc, ax, mode), disc)
            total = total + _weighted_sq(de, disc)
        return _finish(total, as_float)


def laplacian(xg: Tensor, disc: Discretization) -> Tensor:
    """Sum of second Fourier derivatives; the multiplier ``-(2 pi k / L)^2`` keeps the Nyquist mode."""
    _check_fourier_grid(disc)
    out = None
    for ax in range(disc.dim):
        n, ta = disc.grid_shape[ax], ax + 1
        mult = _fourier_multiplier(n, disc.domain.lengths[ax], ta, xg.ndim, order=2).real
        d2 = irfft(mul(rfft(xg, axis=ta), mult), n, axis=ta)
        out = d2 if out is None else out + d2
    return out


def poisson_residual(u, f, disc: Discretization | None = None):
    """``||(-Laplace u) - f||^2`` under quadrature, on a torus grid."""
    p, t, disc, as_float = _prepare(u, f, disc)
    _check_fourier_grid(disc)
    with _maybe_no_grad(as_float):
        lap = from_grid(laplacian(to_grid(p, disc), disc), disc)
        return _finish(_weighted_sq(sub(-lap, t), disc), as_float)


# -- combined objective --------------------------------------------------------
@dataclass(frozen=True)
class LossSpec:
    """Fixed-weight sum of loss terms, e.g. ``{"l2": 1.0, "h1": 0.1}``.

    ``poisson_residual`` compares the prediction with the model input
    (the forcing); every other term compares it with the target.
    """

    weights: tuple = (("l2", 1.0),)
    derivative: str = "fourier"

    def __post_init__(self):
        w = self.weights
        items = tuple(w.items()) if isinstance(w, dict) else tuple((str(k), v) for k, v in w)
        names = [k for k, _ in items]
        if not items:
            raise InvalidArgument("a loss needs at least one term")
        if len(set(names)) != len(names):
            raise InvalidArgument(f"repeated loss terms in {names}")
        for k, v in items:
            if k not in LOSS_KINDS:
                raise InvalidArgument(f"unknown loss kind {k!r}; expected one of {LOSS_KINDS}")
            if not (np.isfinite(v) and v >= 0):
                raise InvalidArgument(f"loss weight for {k!r} must be finite and >= 0, got {v}")
        if not any(v > 0 for _, v in items):
            raise InvalidArgument("at least one loss weight must be positive")
        if self.derivative not in DERIVATIVE_MODES:
            raise InvalidArgument(f"unknown derivative mode {self.derivative!r}")
        object.__setattr__(self, "weights", tuple((k, float(v)) for k, v in items))

    @classmethod
    def single(cls, kind: str) -> "LossSpec":
        return cls(((kind, 1.0),))

    def to_dict(self) -> dict:
        return {"weights": dict(self.weights), "derivative": self.derivative}

    def __call__(self, pred, target, disc: Discretization | None = None, inputs=None):
        total = None
        for kind, w in self.weights:
            if w == 0:
                continue
            if kind == "l2":
                term = l2_loss(pred, target, disc)
            elif kind == "relative_l2":
                term = relative_l2(pred, target, disc)
            elif kind == "h1":
                term = h1_loss(pred, target, disc, self.derivative)
            else:
                if inputs is None:
                    raise InvalidArgument("the poisson_residual term needs the forcing as inputs")
                term = poisson_residual(pred, inputs, disc)
            term = term * w
            total = term if total is None else total + term
        return total
