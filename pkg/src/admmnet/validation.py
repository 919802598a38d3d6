"""Input validation helpers shared across the library.

All public entry points normalize their array inputs through these
functions so that shape/dtype errors surface early with a clear message
instead of deep inside a Fourier or convolution call.
"""

import numpy as np

__all__ = [
    "as_grid",
    "as_mask",
    "as_kernel",
    "as_filter_bank",
    "check_same_shape",
    "check_finite",
]


def as_grid(x, name="grid"):
    """Coerce ``x`` to a 2-D complex128 array and validate it.

    Accepts real or complex input; real data is promoted to complex with a
    zero imaginary part. Raises ``ValueError`` on wrong rank, empty axes or
    non-finite entries.
    """
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    check_finite(arr, name)
    return arr


def as_mask(m, name="mask"):
    """Coerce ``m`` to a 2-D boolean sampling mask with at least one kept entry."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError(f"{name} must be boolean or 0/1 valued")
        arr = arr.astype(bool)
    if not arr.any():
        raise ValueError(f"{name} keeps no frequency; at least one is required")
    return arr


def as_kernel(k, name="kernel"):
    """Coerce ``k`` to a square, odd-sized, real float64 tap array."""
    arr = np.asarray(k, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square 2-D, got shape {arr.shape}")
    if arr.shape[0] % 2 != 1:
        raise ValueError(f"{name} size must be odd, got {arr.shape[0]}")
    check_finite(arr, name)
    return arr


def as_filter_bank(taps, name="filter bank"):
    """Coerce ``taps`` to an (L, w, w) real float64 stack of odd square kernels."""
    arr = np.asarray(taps, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"{name} must have shape (L, w, w), got {arr.shape}")
    if arr.shape[1] % 2 != 1:
        raise ValueError(f"{name} kernel size must be odd, got {arr.shape[1]}")
    check_finite(arr, name)
    return arr


def check_same_shape(a, b, what="operands"):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch between {what}: {a.shape} vs {b.shape}")


def check_finite(arr, name):
    if not np.all(np.isfinite(arr.view(np.float64) if np.iscomplexobj(arr) else arr)):
        raise ValueError(f"{name} contains NaN or Inf")
