"""Unitary DFT and the complex/real embeddings used throughout the receiver.

All transforms act on the last axis, so leading axes behave as batch axes.
The forward kernel is ``exp(-2j*pi*k*n/N)`` and both directions carry a
``1/sqrt(N)`` scale, which makes the DFT matrix ``F`` satisfy ``F^H F = I``.
"""

from functools import lru_cache

import numpy as np


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=32)
def _bit_reverse_perm(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(x: np.ndarray, sign: int) -> np.ndarray:
    """Iterative decimation-in-time butterfly over the last axis (unscaled)."""
    n = x.shape[-1]
    a = x[..., _bit_reverse_perm(n)].astype(np.complex128, copy=True)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(a.shape[:-1] + (n // size, size))
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * tw
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        a = blocks.reshape(a.shape)
        size *= 2
    return a


def _direct(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    k = np.arange(n)
    kernel = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    return x.astype(np.complex128) @ kernel.T


def _transform(x, sign: int, method: str) -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[-1] if x.ndim else 0
    if n == 0:
        raise ValueError("cannot transform a zero-length vector")
    if method == "auto":
        method = "radix2" if _is_pow2(n) else "direct"
    if method == "radix2":
        if not _is_pow2(n):
            raise ValueError(f"radix-2 transform needs a power-of-two length, got {n}")
        out = _radix2(x, sign)
    elif method == "direct":
        out = _direct(x, sign)
    else:
        raise ValueError(f"unknown transform method {method!r}")
    return out / np.sqrt(n)


def fft_unitary(x, method: str = "auto") -> np.ndarray:
    """Apply the unitary DFT matrix ``F`` along the last axis.

    ``method`` is ``"radix2"`` (power-of-two lengths), ``"direct"`` (any
    length, O(N^2)) or ``"auto"``, which picks radix-2 when it can.
    """
    return _transform(x, -1, method)


def ifft_unitary(x, method: str = "auto") -> np.ndarray:
    """Apply ``F^H`` along the last axis."""
    return _transform(x, +1, method)


@lru_cache(maxsize=16)
def _dft_matrix_cached(n: int) -> np.ndarray:
    m = fft_unitary(np.eye(n, dtype=complex))
    # rows of eye transformed give columns of F; F is symmetric anyway
    m = m.T.copy()
    m.setflags(write=False)
    return m


def dft_matrix(n: int) -> np.ndarray:
    """Return the N x N unitary DFT matrix ``F`` (read-only, cached)."""
    if n <= 0:
        raise ValueError("DFT size must be positive")
    return _dft_matrix_cached(int(n))


def complex_to_real_mat(m) -> np.ndarray:
    """Embed a complex matrix as ``[[Re, -Im], [Im, Re]]``.

    The embedding satisfies ``complex_to_real_mat(M) @ stack_vec(x) ==
    stack_vec(M @ x)`` and is multiplicative. Leading batch axes are kept.
    """
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    re, im = m.real, m.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def stack_vec(x) -> np.ndarray:
    """``[Re(x); Im(x)]`` along the last axis."""
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=-1).astype(float)


def unstack_vec(x_r) -> np.ndarray:
    """Inverse of :func:`stack_vec`."""
    x_r = np.asarray(x_r, dtype=float)
    n2 = x_r.shape[-1]
    if n2 % 2:
        raise ValueError(f"real-stacked vector must have even length, got {n2}")
    n = n2 // 2
    return x_r[..., :n] + 1j * x_r[..., n:]


def solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` by pivoted LU, raising on singular systems."""
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular system in solve: {exc}") from exc
