"""Complex volume primitives and the CVOL container format.

Volumes are plain ``numpy`` arrays.  A single volume has shape ``(nz, ny, nx)``
(C-order, x fastest), multi-coil k-space has shape ``(ncoils, nz, ny, nx)``.
Everything is computed in complex128; files hold complex64.
"""

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "vdot",
    "norm2",
    "norm1",
    "axpy",
    "channel_sign",
    "CvolFormatError",
    "write_cvol",
    "read_cvol",
]

CVOL_MAGIC = b"CVOL"
CVOL_VERSION = 1
DTYPE_COMPLEX64 = 0
DTYPE_BOOL = 1
_HEADER = struct.Struct("<4s6I")


class CvolFormatError(ValueError):
    """Raised for malformed or unsupported CVOL files."""


def _same_shape(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def vdot(a, b):
    """Return ``sum(conj(a) * b)`` over all entries."""
    a, b = _same_shape(a, b)
    return complex(np.vdot(a.ravel(), b.ravel()))


def norm2(a):
    return float(np.sqrt(max(vdot(a, a).real, 0.0)))


def norm1(a):
    """Channelwise l1 norm, ``sum(|Re a| + |Im a|)``."""
    a = np.asarray(a)
    return float(np.abs(a.real).sum() + np.abs(a.imag).sum())


def axpy(alpha, x, y):
    x, y = _same_shape(x, y)
    return alpha * x + y


def channel_sign(a):
    """Sign of the real and imaginary channels separately, with sign(0) = 0."""
    a = np.asarray(a)
    return np.sign(a.real) + 1j * np.sign(a.imag)


def write_cvol(path, data):
    """Write a volume, k-space array or boolean mask as CVOL.

    ``data`` may have 1 to 4 dimensions; leading axes are (coil, z, y, x) and
    missing ones are taken as 1.  Masks of shape ``(nz, ny)`` are stored with
    ``nx = 1``.
    """
    data = np.asarray(data)
    if data.dtype == bool:
        dtype = DTYPE_BOOL
        if data.ndim == 2:
            data = data[:, :, None]
        payload = data.astype(np.uint8)
    else:
        dtype = DTYPE_COMPLEX64
        payload = data.astype("<c8")
        if not np.all(np.isfinite(payload)):
            raise ValueError("refusing to write non-finite values")
    if not 1 <= payload.ndim <= 4:
        raise ValueError(f"unsupported rank {payload.ndim}")
    shape = (1,) * (4 - payload.ndim) + payload.shape
    ncoils, nz, ny, nx = shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CVOL_MAGIC, CVOL_VERSION, dtype, ncoils, nx, ny, nz))
        fh.write(np.ascontiguousarray(payload).tobytes())


def read_cvol(path):
    """Read a CVOL file.

    Complex files come back as complex128 with shape ``(nz, ny, nx)`` when
    ``ncoils == 1`` and ``(ncoils, nz, ny, nx)`` otherwise.  Boolean files come
    back as masks of shape ``(nz, ny)``.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise OSError(f"{path}: truncated CVOL header")
    magic, version, dtype, ncoils, nx, ny, nz = _HEADER.unpack_from(raw)
    if magic != CVOL_MAGIC:
        raise CvolFormatError(f"{path}: bad magic {magic!r}")
    if version != CVOL_VERSION:
        raise CvolFormatError(f"{path}: unsupported version {version}")
    count = ncoils * nx * ny * nz
    body = raw[_HEADER.size:]
    if dtype == DTYPE_COMPLEX64:
        itemsize, np_dtype = 8, "<c8"
    elif dtype == DTYPE_BOOL:
        itemsize, np_dtype = 1, np.uint8
    else:
        raise CvolFormatError(f"{path}: unknown dtype code {dtype}")
    if len(body) != count * itemsize:
        raise OSError(f"{path}: expected {count * itemsize} data bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype=np_dtype).reshape(ncoils, nz, ny, nx)
    if dtype == DTYPE_BOOL:
        if ncoils != 1 or nx != 1:
            raise CvolFormatError(f"{path}: boolean CVOL must have ncoils = nx = 1")
        return arr[0, :, :, 0].astype(bool)
    arr = arr.astype(np.complex128)
    return arr[0] if ncoils == 1 else arr
