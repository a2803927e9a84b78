"""Tensors with reverse-mode autodiff, radix-2 FFTs and parameters."""
from . import fft as fftlib
from .autodiff import (
    Tape, Tensor, abs2, add, as_tensor, backward, concatenate, conj, div, embed, exp, fft,
    gelu, getitem, grad_enabled, identity, ifft, imag, irfft, irfftn, matmul, mean, moveaxis,
    mul, neg, no_grad, real, relu, reshape, rfft, rfftn, scale, segment_sum, softmax, sqrt, stack, sub,
    sum_, swapaxes, take, tanh, tensor, transpose,
)
from .gradcheck import GradCheckReport, grad_check
from .params import Parameter, init_param, make_rng

__all__ = [
    "Tape", "Tensor", "abs2", "add", "as_tensor", "backward", "concatenate", "conj", "div",
    "embed", "exp", "fft", "fftlib", "gelu", "getitem", "grad_enabled", "identity", "ifft",
    "imag", "irfft", "irfftn", "matmul", "mean", "moveaxis", "mul", "neg", "no_grad", "real",
    "relu", "reshape", "rfft", "rfftn", "scale", "segment_sum", "softmax", "sqrt", "stack", "sub", "sum_",
    "swapaxes", "take", "tanh", "tensor", "transpose", "GradCheckReport", "grad_check",
    "Parameter", "init_param", "make_rng",
]
