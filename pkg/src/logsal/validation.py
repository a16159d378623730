"""Input validation helpers shared across the package."""

import numpy as np

__all__ = ["check_grid", "check_complex_grid", "check_tensor3d", "check_same_shape"]


def check_grid(x, name="grid"):
    """Coerce to a finite 2-D float64 array.

    Raises ValueError on wrong rank, empty dims, or non-finite values.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have positive dims, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_complex_grid(x, name="grid"):
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_tensor3d(x, name="tensor"):
    """Coerce to (A, H, W) float64; a 2-D input becomes a single channel."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2:
        a = a[np.newaxis]
    if a.ndim != 3:
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {a.shape}")
    if min(a.shape) < 1:
        raise ValueError(f"{name} must have positive dims, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_same_shape(a, b, what="arrays"):
    if a.shape != b.shape:
        raise ValueError(f"{what} must share shape, got {a.shape} vs {b.shape}")
