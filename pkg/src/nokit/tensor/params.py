"""Trainable parameters and their initialisation."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .autodiff import Tensor

SCHEMES = ("uniform_fan_in", "complex_gaussian", "zeros", "ones")


class Parameter(Tensor):
    """A named leaf tensor that the optimizer updates."""

    def __init__(self, data, name: str = "param"):
        super().__init__(data, requires_grad=True, name=name)
        self.trainable = True

    def assign(self, value):
        value = np.asarray(value, dtype=self.dtype)
        if value.shape != self.shape:
            raise InvalidArgument(f"cannot assign shape {value.shape} to parameter {self.name} {self.shape}")
        self.data = value.copy()


def make_rng(seed) -> np.random.Generator:
    """Generator from an int or a sequence of ints (entropy for SeedSequence)."""
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    return np.random.default_rng(np.random.SeedSequence(entropy))


def init_param(shape, scheme: str = "uniform_fan_in", seed=0, sigma: float | None = None,
               fan_in: int | None = None, name: str = "param") -> Parameter:
    """Draw a parameter deterministically from ``seed``.

    ``uniform_fan_in`` draws ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; fan-in
    defaults to the product of all but the last axis.  ``complex_gaussian``
    draws real and imaginary parts i.i.d. ``N(0, sigma^2)``, so each
    component has std ``sigma`` and the complex magnitude has RMS
    ``sigma * sqrt(2)``.
    """
    shape = tuple(int(s) for s in shape)
    rng = make_rng(seed)
    if scheme == "uniform_fan_in":
        if fan_in is None:
            fan_in = int(np.prod(shape[:-1])) if len(shape) > 1 else (shape[0] if shape else 1)
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        data = rng.uniform(-bound, bound, size=shape)
    elif scheme == "complex_gaussian":
        if sigma is None or not sigma > 0:
            raise InvalidArgument(f"complex_gaussian needs sigma > 0, got {sigma}")
        data = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    elif scheme == "zeros":
        data = np.zeros(shape)
    elif scheme == "ones":
        data = np.ones(shape)
    else:
        raise InvalidArgument(f"unknown init scheme {scheme!r}; expected one of {SCHEMES}")
    return Parameter(data, name=name)
