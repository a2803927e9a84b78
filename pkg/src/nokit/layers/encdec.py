"""Encoder-decoder layer: quadrature inner products, a latent map, and a queryable decoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..discretization import Discretization, Domain, Field
from ..errors import InvalidArgument, ShapeError
from ..tensor import Tensor, add, as_tensor, concatenate, init_param, matmul, real, reshape, transpose
from .common import apply_to_field, batch_values
from .integral import _coords
from .module import KernelNet, Module

DEFAULT_LATENT_DIM = 64


def fourier_wavenumbers(modes: int, dim: int) -> np.ndarray:
    """Retained wave vectors ``(K, dim)``; same layout as the spectral weights."""
    if dim == 1:
        return np.arange(modes)[:, None]
    k1 = np.concatenate([np.arange(modes), np.arange(-modes, 0)])
    k2 = np.arange(modes)
    return np.stack(np.meshgrid(k1, k2, indexing="ij"), axis=-1).reshape(-1, 2)


def _unit_coords(domain: Domain, x: np.ndarray) -> np.ndarray:
    return (x - domain.lower) / domain.lengths


def complex_basis(domain: Domain, x: np.ndarray, modes: int) -> np.ndarray:
    """``exp(2 pi i k . u)`` at unit coordinates ``u``; shape ``(n, K)``."""
    k = fourier_wavenumbers(modes, domain.dim)
    return np.exp(2j * np.pi * _unit_coords(domain, x) @ k.T)


def decoder_factors(modes: int, dim: int) -> np.ndarray:
    """1 for modes without a conjugate partner in the half spectrum, else 2."""
    k = fourier_wavenumbers(modes, dim)
    return np.where(k[:, -1] == 0, 1.0, 2.0)


def real_basis(domain: Domain, x: np.ndarray, modes: int) -> np.ndarray:
    """Orthonormal ``{1, sqrt2 cos, sqrt2 sin}`` products up to frequency ``modes - 1``."""
    u = _unit_coords(domain, x)
    cols = []
    for ax in range(domain.dim):
        t = u[:, ax]
        c = [np.ones_like(t)]
        for k in range(1, modes):
            c.append(np.sqrt(2.0) * np.cos(2 * np.pi * k * t))
            c.append(np.sqrt(2.0) * np.sin(2 * np.pi * k * t))
        cols.append(np.stack(c, axis=1))
    basis = cols[0]
    for extra in cols[1:]:
        basis = (basis[:, :, None] * extra[:, None, :]).reshape(len(u), -1)
    return basis / np.sqrt(domain.measure)


@dataclass(frozen=True)
class EncDecConfig:
    encoder: str = "mlp"              # mlp | fourier
    basis: str = "complex"            # fourier encoder basis: complex | real
    modes: int = 8
    latent_dim: int = DEFAULT_LATENT_DIM
    latent_map: str = "mlp"           # mlp | diagonal
    decoder: str = "nomad"            # nomad | fourier
    hidden: int = 64

    def __post_init__(self):
        if self.encoder not in ("mlp", "fourier"):
            raise InvalidArgument(f"unknown encoder {self.encoder!r}")
        if self.basis not in ("complex", "real"):
            raise InvalidArgument(f"unknown Fourier basis {self.basis!r}")
        if self.latent_map not in ("mlp", "diagonal"):
            raise InvalidArgument(f"unknown latent map {self.latent_map!r}")
        if self.decoder not in ("nomad", "fourier"):
            raise InvalidArgument(f"unknown decoder {self.decoder!r}")
        if self.latent_dim < 1 or self.modes < 1:
            raise InvalidArgument("latent_dim and modes must be >= 1")
        if self.latent_map == "diagonal" and self.encoder != "fourier":
            raise InvalidArgument("the diagonal latent map acts on Fourier coefficients")
        if self.decoder == "fourier" and not (self.encoder == "fourier" and self.basis == "complex"
                                              and self.latent_map == "diagonal"):
            raise InvalidArgument("the Fourier decoder needs a complex Fourier encoder and a diagonal latent map")


class EncDecLayer(Module):
    """``v_j = sum_i b_j(x_i)^T f(x_i) Delta_i``, ``w = K(v)``, ``g(y) = decoder(w, y)``."""

    def __init__(self, config: EncDecConfig, dim: int, c_in: int, c_out: int, seed=0):
        self.config = config
        self.dim, self.c_in, self.c_out = dim, c_in, c_out
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        cfg = config
        if cfg.encoder == "mlp":
            self.encoder = KernelNet([dim, cfg.hidden, cfg.latent_dim * c_in], "gelu", seed=(*base, 0))
            flat = cfg.latent_dim
        else:
            K = len(fourier_wavenumbers(cfg.modes, dim)) if cfg.basis == "complex" else (2 * cfg.modes - 1) ** dim
            self._n_modes = K
            flat = K * c_in * (2 if cfg.basis == "complex" else 1)
        self._flat = flat
        if cfg.latent_map == "mlp":
            self.latent = KernelNet([flat, cfg.hidden, flat], "gelu", seed=(*base, 1))
        else:
            shape = (self._n_modes, c_in, c_out)
            if cfg.basis == "complex":
                self.latent_weights = init_param(shape, "complex_gaussian", seed=(*base, 1),
                                                 sigma=1.0 / np.sqrt(2 * c_in))
            else:
                self.latent_weights = init_param(shape, "uniform_fan_in", seed=(*base, 1), fan_in=c_in)
        if cfg.decoder == "nomad":
            dec_in = flat if cfg.latent_map == "mlp" else self._n_modes * c_out * (2 if cfg.basis == "complex" else 1)
            self.decoder = KernelNet([dec_in + dim, cfg.hidden, c_out], "gelu", seed=(*base, 2))

    # -- pieces ---------------------------------------------------------------
    def encode(self, f, disc: Discretization) -> Tensor:
        """Inner products: ``(B, latent)`` for the MLP basis, ``(B, K, c_in)`` for Fourier."""
        f = batch_values(f)
        if f.shape[-1] != self.c_in:
            raise ShapeError(f"encoder expects {self.c_in} channels, got {f.shape[-1]}")
        B, n, c = f.shape
        fw = f * disc.weights[None, :, None]
        if self.config.encoder == "mlp":
            enc = reshape(self.encoder(Tensor(disc.points)), (n * c, self.config.latent_dim))
            return matmul(reshape(fw, (B, n * c)), enc)
        if self.config.basis == "complex":
            basis = np.conj(complex_basis(disc.domain, disc.points, self.config.modes)) / disc.domain.measure
        else:
            basis = real_basis(disc.domain, disc.points, self.config.modes)
        return matmul(Tensor(basis.T), fw)

    def _flatten(self, v: Tensor) -> Tensor:
        B = v.shape[0]
        flat = reshape(v, (B, -1))
        if v.is_complex:
            flat = concatenate([real(flat), flat.imag], axis=1)
        return flat

    def map_latent(self, v: Tensor) -> Tensor:
        if self.config.latent_map == "mlp":
            return self.latent(self._flatten(v) if v.ndim == 3 else v)
        # per-mode channel mixing
        return transpose(matmul(transpose(v, (1, 0, 2)), self.latent_weights), (1, 0, 2))

    def decode(self, w: Tensor, query: np.ndarray, domain: Domain) -> Tensor:
        m = len(query)
        if self.config.decoder == "fourier":
            basis = complex_basis(domain, query, self.config.modes) * decoder_factors(self.config.modes, self.dim)
            return real(matmul(Tensor(basis), w))
        lat = self._flatten(w) if w.ndim == 3 else w
        B, L = lat.shape
        lat = add(reshape(lat, (B, 1, L)), np.zeros((1, m, L)))
        y = Tensor(np.broadcast_to(query, (B, m, query.shape[1])))
        return self.decoder(concatenate([lat, y], axis=2))

    def __call__(self, f, disc: Discretization, query=None) -> Tensor:
        y = disc.points if query is None else _coords(query)
        return self.decode(self.map_latent(self.encode(f, disc)), y, disc.domain)


def encdec_layer(field: Field, query: Discretization | None, layer: EncDecLayer) -> Field:
    query = field.disc if query is None else query
    return apply_to_field(lambda f: layer(f, field.disc, query), field, query)
