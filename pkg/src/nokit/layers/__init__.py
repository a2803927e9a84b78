"""Neural-operator layers acting on sampled functions."""
from .attention import AttentionLayer, attention_layer
from .auxiliary import (
    NORM_EPS, NormStats, batch_normalization, concat_to_field, destandardize, domain_padding,
    normalization, pad_grid_tensor, positional_encoding, standardize, unpad, unpad_grid_tensor,
)
from .common import apply_to_field, batch_values, from_grid, grid_spacing, to_grid
from .conv import (
    KernelInterpolatedConv, circular_correlation, discrete_conv, interpolated_taps,
    interpolation_matrix, kernel_interpolated_conv,
)
from .encdec import EncDecConfig, EncDecLayer, encdec_layer, fourier_wavenumbers, real_basis
from .integral import ConvOperator, IntegralTransform, conv_operator_direct, integral_transform, radius_pairs
from .module import FixedKernel, KernelNet, Module, activation
from .pointwise import pointwise_layer
from .spectral import FNOBlock, ResolutionWarning, SpectralConv, fno_block, spectral_conv, spectral_weight_shape

__all__ = [
    "AttentionLayer", "attention_layer", "NORM_EPS", "NormStats", "batch_normalization",
    "concat_to_field", "destandardize", "domain_padding", "normalization", "pad_grid_tensor",
    "positional_encoding", "standardize", "unpad", "unpad_grid_tensor", "apply_to_field",
    "batch_values", "from_grid", "grid_spacing", "to_grid", "KernelInterpolatedConv",
    "circular_correlation", "discrete_conv", "interpolated_taps", "interpolation_matrix",
    "kernel_interpolated_conv", "EncDecConfig", "EncDecLayer", "encdec_layer",
    "fourier_wavenumbers", "real_basis", "ConvOperator", "IntegralTransform",
    "conv_operator_direct", "integral_transform", "radius_pairs", "FixedKernel", "KernelNet",
    "Module", "activation", "pointwise_layer", "FNOBlock", "ResolutionWarning", "SpectralConv",
    "fno_block", "spectral_conv", "spectral_weight_shape",
]
