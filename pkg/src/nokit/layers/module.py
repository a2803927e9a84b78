"""Parameter containers and the MLP used for kernels and pointwise maps."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument, ShapeError
from ..tensor import Parameter, Tensor, as_tensor, gelu, identity, init_param, relu, tanh

ACTIVATIONS = {"gelu": gelu, "relu": relu, "tanh": tanh, "identity": identity}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise InvalidArgument(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


class Module:
    """Base class collecting :class:`Parameter` attributes and sub-modules.

    Parameter names are dotted attribute paths, so they are unique within a
    model by construction.
    """

    def named_parameters(self, prefix: str = "") -> dict:
        out = {}
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            path = f"{prefix}{key}"
            if isinstance(value, Parameter):
                out[path] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(path + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Parameter):
                        out[f"{path}.{i}"] = item
                    elif isinstance(item, Module):
                        out.update(item.named_parameters(f"{path}.{i}."))
        return out

    def parameters(self) -> list:
        return list(self.named_parameters().values())

    def name_parameters(self):
        """Write the dotted paths into each parameter's ``name``."""
        for name, p in self.named_parameters().items():
            p.name = name
        return self

    def num_parameters(self) -> int:
        """Real degrees of freedom (a complex entry counts twice)."""
        return int(sum(p.size * (2 if p.is_complex else 1) for p in self.parameters()))

    def state_dict(self) -> dict:
        return {k: p.data.copy() for k, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict):
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise InvalidArgument(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in params.items():
            p.assign(state[k])

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


class KernelNet(Module):
    """MLP ``widths[0] -> ... -> widths[-1]`` with an activation between layers.

    Weights are stored as ``(in, out)`` so inputs of shape ``(..., in)`` map to
    ``(..., out)``.  The parameter count depends only on ``widths``.
    """

    def __init__(self, widths, activation_name: str = "gelu", seed=0, final_activation: bool = False,
                 bias: bool = True):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise InvalidArgument(f"KernelNet widths must have >= 2 entries, all >= 1, got {widths}")
        self.widths = widths
        self.activation_name = activation_name
        self._act = activation(activation_name)
        self._final_activation = final_activation
        self.weights = []
        self.biases = []
        for k, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            base = seed if isinstance(seed, (tuple, list)) else (seed,)
            self.weights.append(init_param((a, b), "uniform_fan_in", seed=(*base, k, 0)))
            if bias:
                self.biases.append(init_param((b,), "uniform_fan_in", seed=(*base, k, 1), fan_in=a))

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"KernelNet expects {self.in_dim} input features, got {x.shape[-1]}")
        last = len(self.weights) - 1
        for k, w in enumerate(self.weights):
            x = x @ w if x.ndim >= 2 else (x.reshape(1, -1) @ w).reshape(-1)
            if self.biases:
                x = x + self.biases[k]
            if k < last or self._final_activation:
                x = self._act(x)
        return x

    def set_identity(self):
        """Make a single-layer net the identity map (square widths only)."""
        if len(self.weights) != 1 or self.widths[0] != self.widths[1]:
            raise InvalidArgument("identity needs a single square layer")
        self.weights[0].assign(np.eye(self.widths[0]))
        for b in self.biases:
            b.assign(np.zeros(b.shape))
        return self


class FixedKernel:
    """Parameter-free kernel wrapping a numpy function of ``(..., d)`` inputs."""

    def __init__(self, fn, out_dim: int = 1):
        self.fn = fn
        self.out_dim = out_dim

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        val = np.asarray(self.fn(x.data), dtype=np.float64)
        if val.ndim == x.ndim - 1:
            val = val[..., None]
        return Tensor(val)

    def parameters(self) -> list:
        return []

    def named_parameters(self, prefix: str = "") -> dict:
        return {}
