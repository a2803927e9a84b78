"""Radix-2 Cooley-Tukey FFT on numpy arrays.

Power-of-two lengths recurse on even/odd halves down to length 16, where a
dense DFT matrix finishes the job.

Convention: the forward transform is unnormalized,
``X[k] = sum_j x[j] exp(-2 pi i j k / n)``, and inverse transforms carry the
``1/n`` factor.  Lengths must be powers of two unless ``allow_dft=True``, which
falls back to a direct O(n^2) DFT.

Real transforms pack the even/odd samples of a length-n signal into one
complex signal of length n/2 and split the result afterwards.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import InvalidArgument, UnsupportedLength


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# lengths at or below this are finished with a small dense DFT matrix
BASE_LENGTH = 16


@lru_cache(maxsize=64)
def _twiddles(n: int) -> np.ndarray:
    tw = np.exp(-2j * np.pi * np.arange(n // 2) / n)[:, None]
    tw.setflags(write=False)
    return tw


@lru_cache(maxsize=32)
def _dft_matrix(n: int) -> np.ndarray:
    jk = np.outer(np.arange(n), np.arange(n)) % n
    mat = np.exp(-2j * np.pi * jk / n)
    mat.setflags(write=False)
    return mat


def _split(shape, axis):
    pre = int(np.prod(shape[:axis], dtype=np.int64))
    post = int(np.prod(shape[axis + 1:], dtype=np.int64))
    return pre, post


def _check_length(n: int, allow_dft: bool) -> bool:
    """True when the radix-2 path applies."""
    if is_power_of_two(n):
        return True
    if allow_dft and n >= 1:
        return False
    raise UnsupportedLength(f"FFT length {n} is not a power of two")


def _fft_core(y: np.ndarray) -> np.ndarray:
    """Forward transform along axis 1 of a ``(pre, n, post)`` array.

    Decimation in time: the even and odd samples are transformed together
    (stacked on the leading axis) and combined with one butterfly stage.
    """
    pre, n, post = y.shape
    if n <= BASE_LENGTH:
        return np.matmul(_dft_matrix(n), y)
    h = n // 2
    z = y.reshape(pre, h, 2, post).transpose(0, 2, 1, 3).reshape(pre * 2, h, post)
    z = _fft_core(z).reshape(pre, 2, h, post)
    even = z[:, 0]
    odd = z[:, 1] * _twiddles(n)
    out = np.empty((pre, n, post), dtype=np.complex128)
    np.add(even, odd, out=out[:, :h])
    np.subtract(even, odd, out=out[:, h:])
    return out


def fft(x, axis: int = -1, allow_dft: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    axis %= x.ndim
    n = x.shape[axis]
    if not _check_length(n, allow_dft):
        return np.moveaxis(np.moveaxis(x, axis, -1) @ _dft_matrix(n).T, -1, axis)
    pre, post = _split(x.shape, axis)
    return _fft_core(x.reshape(pre, n, post)).reshape(x.shape)


def ifft(X, axis: int = -1, allow_dft: bool = False) -> np.ndarray:
    X = np.asarray(X, dtype=np.complex128)
    n = X.shape[axis]
    return np.conj(fft(np.conj(X), axis, allow_dft)) / n


@lru_cache(maxsize=64)
def _half_twiddles(n: int) -> np.ndarray:
    w = np.exp(-2j * np.pi * np.arange(n // 2 + 1) / n)[:, None]
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _odd_twiddles(n: int) -> np.ndarray:
    w = -0.5j * _half_twiddles(n)[: n // 2]
    w.setflags(write=False)
    return w


def rfft(x, axis: int = -1, allow_dft: bool = False) -> np.ndarray:
    """Half spectrum ``X[0..n//2]`` of a real signal."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        raise InvalidArgument("rfft expects real input")
    x = np.asarray(x, dtype=np.float64)
    axis %= x.ndim
    n = x.shape[axis]
    radix2 = _check_length(n, allow_dft)
    if not radix2 or n < 4:
        full = fft(x, axis, allow_dft)
        return np.take(full, np.arange(n // 2 + 1), axis=axis)
    pre, post = _split(x.shape, axis)
    h = n // 2
    xr = x.reshape(pre, h, 2, post)
    z = np.empty((pre, h, post), dtype=np.complex128)
    z.real = xr[:, :, 0]
    z.imag = xr[:, :, 1]
    Z = _fft_core(z)
    # Z[k] and conj(Z[h - k]) for k = 0..h-1
    Zc = np.empty_like(Z)
    Zc[:, 0] = Z[:, 0]
    Zc[:, 1:] = Z[:, :0:-1]
    np.conjugate(Zc, out=Zc)
    X = np.empty((pre, h + 1, post), dtype=np.complex128)
    S = X[:, :h]
    np.add(Z, Zc, out=S)
    S *= 0.5
    np.subtract(Z, Zc, out=Z)
    Z *= _odd_twiddles(n)
    S += Z
    # Nyquist: Re Z[0] - Im Z[0], read from its conjugate
    X[:, h] = Zc[:, 0].real + Zc[:, 0].imag
    out_shape = x.shape[:axis] + (h + 1,) + x.shape[axis + 1:]
    return X.reshape(out_shape)


def source_length(m: int, n: int, source_n: int | None = None) -> int:
    """Length of the signal a half spectrum of ``m`` modes came from.

    A complete half spectrum for length ``n`` means source length ``n``;
    fewer modes are read as the spectrum of an even-length ``2 (m - 1)``
    signal being interpolated up to ``n``.
    """
    if source_n is not None:
        return int(source_n)
    if m == n // 2 + 1 or m < 2:
        return n
    return 2 * (m - 1)


def irfft(X, n: int | None = None, axis: int = -1, allow_dft: bool = False,
          source_n: int | None = None) -> np.ndarray:
    """Real signal of length ``n`` from a half spectrum.

    The result carries the factor ``1 / source_n`` (see :func:`source_length`).
    Missing modes are zero, so ``irfft(rfft(x), 2 * len(x))`` is the Fourier
    interpolation of ``x`` at twice the resolution.  The imaginary parts of
    the zero and Nyquist modes do not contribute.
    """
    X = np.asarray(X, dtype=np.complex128)
    axis %= X.ndim
    m = X.shape[axis]
    if n is None:
        n = 2 * (m - 1)
    if n < 1 or m > n // 2 + 1:
        raise InvalidArgument(f"irfft output length {n} cannot represent {m} modes")
    scale = n / source_length(m, n, source_n)
    out = _irfft_std(X, n, axis, allow_dft)
    return out * scale if scale != 1.0 else out


def _irfft_std(X, n, axis, allow_dft):
    m = X.shape[axis]
    radix2 = _check_length(n, allow_dft)
    pre, post = _split(X.shape, axis)
    h = n // 2
    if m == h + 1:
        Xh = X.reshape(pre, m, post)
    else:
        Xh = np.zeros((pre, h + 1, post), dtype=np.complex128)
        Xh[:, :m] = X.reshape(pre, m, post)
    out_shape = X.shape[:axis] + (n,) + X.shape[axis + 1:]
    if not radix2 or n < 4:
        full = np.zeros((pre, n, post), dtype=np.complex128)
        full[:, : min(m, h + 1)] = Xh[:, : min(m, h + 1)]
        k = np.arange(1, h + 1)
        k = k[n - k != k]
        full[:, n - k] = np.conj(Xh[:, k])
        if n % 2 == 0 and n > 1:
            full[:, h] = Xh[:, h].real
        full[:, 0] = Xh[:, 0].real
        return ifft(full, 1, allow_dft).real.reshape(out_shape)
    # conj of the packed half-length spectrum, built from conj(X[k]) and X[h - k]
    A = Xh[:, :h]
    Xr = Xh[:, h:0:-1]
    D = np.conj(A)
    S = D + Xr
    np.subtract(D, Xr, out=D)
    # a real signal carries no imaginary part at the zero and Nyquist modes
    r0, rh = Xh[:, 0].real, Xh[:, h].real
    S[:, 0] = r0 + rh
    D[:, 0] = r0 - rh
    S *= 0.5
    D *= _odd_twiddles(n)
    S += D
    zc = _fft_core(S)
    out = np.empty((pre, h, 2, post))
    np.multiply(zc.real, 1.0 / h, out=out[:, :, 0])
    np.multiply(zc.imag, -1.0 / h, out=out[:, :, 1])
    return out.reshape(out_shape)


def rfftn(x, axes=(-2, -1), allow_dft: bool = False) -> np.ndarray:
    """Real transform on the last listed axis, full transforms on the others."""
    axes = tuple(axes)
    out = rfft(x, axes[-1], allow_dft)
    for ax in axes[:-1]:
        out = fft(out, ax, allow_dft)
    return out


def irfftn(X, s, axes=(-2, -1), allow_dft: bool = False) -> np.ndarray:
    axes = tuple(axes)
    out = X
    for ax in axes[:-1]:
        out = ifft(out, ax, allow_dft)
    return irfft(out, s[-1], axes[-1], allow_dft, source_n=s[-1])
