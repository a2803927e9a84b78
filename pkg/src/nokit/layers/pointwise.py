"""Pointwise (Nemytskii) layers: the same map applied at every point."""
from __future__ import annotations

from ..discretization import Field
from ..errors import ShapeError
from .common import apply_to_field
from .module import KernelNet


def pointwise_layer(field: Field, net: KernelNet) -> Field:
    """``g(x_i) = K(f(x_i))`` row by row; the discretization is unchanged."""
    if net.in_dim != field.channels:
        raise ShapeError(f"net expects {net.in_dim} channels, field has {field.channels}")
    return apply_to_field(net, field)
