"""Input validation helpers shared by the operators and estimators."""

import numpy as np

__all__ = [
    "check_volume",
    "check_kspace",
    "check_mask",
    "check_maps",
    "check_finite",
    "dims_to_shape",
]


def dims_to_shape(dims):
    """Convert ``(nx, ny, nz)`` dims into the ``(nz, ny, nx)`` array shape."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    nx, ny, nz = dims
    return nz, ny, nx


def check_finite(arr, what="array"):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}")
    return arr


def check_volume(x, shape=None):
    """Return ``x`` as a complex128 array of rank 3, optionally of a given shape."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected a 3D volume, got shape {x.shape}")
    if shape is not None and x.shape != tuple(shape):
        raise ValueError(f"volume shape {x.shape} does not match expected {tuple(shape)}")
    return x.astype(np.complex128, copy=False)


def check_kspace(y, shape=None):
    y = np.asarray(y)
    if y.ndim == 3:
        y = y[None]
    if y.ndim != 4:
        raise ValueError(f"expected k-space of shape (ncoils, nz, ny, nx), got {y.shape}")
    if shape is not None and y.shape != tuple(shape):
        raise ValueError(f"k-space shape {y.shape} does not match expected {tuple(shape)}")
    return y.astype(np.complex128, copy=False)


def check_mask(mask):
    mask = np.array(mask, dtype=bool)
    if mask.ndim == 3 and mask.shape[-1] == 1:
        mask = mask[..., 0]
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2D over (nz, ny), got shape {mask.shape}")
    if not mask.any():
        raise ValueError("mask has no sampled positions")
    return mask


def check_maps(maps):
    maps = np.array(maps, dtype=np.complex128)
    if maps.ndim == 3:
        maps = maps[None]
    if maps.ndim != 4:
        raise ValueError(f"coil maps must have shape (ncoils, nz, ny, nx), got {maps.shape}")
    return check_finite(maps, "coil maps")
