"""Self-attention with quadrature weights.

``g(y_j) = sum_i w_i exp(tau <k_i, q_j>) v_i / sum_l w_l exp(tau <k_l, q_j>)``
with ``w`` the quadrature weights of the input points.  Outputs exist only at
the input points (no cross-attention queries).
"""
from __future__ import annotations

import numpy as np

from ..discretization import Discretization, Field
from ..errors import InvalidArgument, ShapeError
from ..tensor import Tensor, concatenate, matmul, reshape, softmax, transpose
from .common import apply_to_field, batch_values
from .module import KernelNet, Module


class AttentionLayer(Module):
    """Multi-head self-attention; heads split the key and value widths and are concatenated."""

    def __init__(self, c_in: int, d_att: int, c_out: int, heads: int = 1, temperature: float | None = None,
                 seed=0):
        if d_att % heads or c_out % heads:
            raise InvalidArgument("attention and output widths must be divisible by the head count")
        base = seed if isinstance(seed, (tuple, list)) else (seed,)
        self.key = KernelNet([c_in, d_att], "identity", seed=(*base, 0))
        self.query = KernelNet([c_in, d_att], "identity", seed=(*base, 1))
        self.value = KernelNet([c_in, c_out], "identity", seed=(*base, 2))
        self.heads = heads
        self.d_att = d_att
        tau = (d_att // heads) ** -0.5 if temperature is None else float(temperature)
        if not tau > 0:
            raise InvalidArgument(f"temperature must be positive, got {tau}")
        self.temperature = tau

    def _split(self, t: Tensor) -> Tensor:
        B, n, w = t.shape
        return transpose(reshape(t, (B, n, self.heads, w // self.heads)), (0, 2, 1, 3))

    def __call__(self, f, disc: Discretization | None = None, weights=None) -> Tensor:
        """``weights=None`` with ``disc=None`` gives plain softmax attention."""
        f = batch_values(f)
        if f.shape[-1] != self.key.in_dim:
            raise ShapeError(f"attention expects {self.key.in_dim} channels, got {f.shape[-1]}")
        if weights is None and disc is not None:
            weights = disc.weights
        k = self._split(self.key(f))
        q = self._split(self.query(f))
        v = self._split(self.value(f))
        logits = matmul(q, transpose(k, (0, 1, 3, 2))) * self.temperature
        w = None if weights is None else np.asarray(weights, dtype=np.float64)[None, None, None, :]
        attn = softmax(logits, axis=-1, weights=w)
        out = matmul(attn, v)
        B, h, n, dv = out.shape
        return reshape(transpose(out, (0, 2, 1, 3)), (B, n, h * dv))


def attention_layer(field: Field, layer: AttentionLayer, positional=None) -> Field:
    """Quadrature attention on a Field; optional positional features are concatenated first."""
    def run(f):
        if positional is not None:
            pos = Tensor(np.asarray(positional, dtype=np.float64)[None])
            f = concatenate([f, pos], axis=2)
        return layer(f, field.disc)

    return apply_to_field(run, field)
