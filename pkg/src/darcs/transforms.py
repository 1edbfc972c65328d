"""Sparsifying transforms and their proximal machinery.

Every transform exposes ``forward(x)`` and ``pullback(x, v)``, the transposed
Jacobian at ``x`` applied to ``v`` in the real two-channel sense.  For linear
transforms the pullback ignores ``x`` and is the adjoint.
"""

import numpy as np

from .network import branch_forward, branch_vjp, net_forward, net_vjp

__all__ = [
    "SparsifyingTransform",
    "FiniteDifference",
    "HaarWavelet",
    "LearnedResidual",
    "finite_difference_forward",
    "finite_difference_adjoint",
    "haar_dwt_forward",
    "haar_dwt_inverse",
    "max_haar_levels",
    "soft_threshold",
    "learned_residual_forward",
    "learned_residual_pullback",
    "sparsity_fraction",
]


class SparsifyingTransform:
    linear = False

    def forward(self, x):
        raise NotImplementedError

    def pullback(self, x, v):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)


def finite_difference_forward(x):
    """Forward differences along x, y and z, stacked as channels in that order.

    The last index along each axis gets a zero coefficient.
    """
    x = np.asarray(x, dtype=np.complex128)
    out = np.zeros((3,) + x.shape, dtype=np.complex128)
    # array axes are (z, y, x)
    out[0, :, :, :-1] = x[:, :, 1:] - x[:, :, :-1]
    out[1, :, :-1, :] = x[:, 1:, :] - x[:, :-1, :]
    out[2, :-1, :, :] = x[1:, :, :] - x[:-1, :, :]
    return out


def _neg_divergence(v, axis):
    # adjoint of d[i] = x[i+1] - x[i] for i < n-1, d[n-1] = 0
    n = v.shape[axis]
    v = np.moveaxis(v, axis, 0)
    out = np.zeros_like(v)
    out[0] = -v[0]
    out[1:n - 1] = v[:n - 2] - v[1:n - 1]
    if n > 1:
        out[n - 1] = v[n - 2]
    else:
        out[0] = 0
    return np.moveaxis(out, 0, axis)


def finite_difference_adjoint(v):
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 4 or v.shape[0] != 3:
        raise ValueError(f"expected coefficients of shape (3, nz, ny, nx), got {v.shape}")
    return _neg_divergence(v[0], 2) + _neg_divergence(v[1], 1) + _neg_divergence(v[2], 0)


def max_haar_levels(shape, cap=3):
    """Largest level count up to ``cap`` that divides every axis of ``shape``."""
    levels = 0
    while levels < cap and all(n % 2 ** (levels + 1) == 0 for n in shape):
        levels += 1
    return levels


def _check_levels(shape, levels):
    if levels < 1:
        raise ValueError("levels must be >= 1")
    for n in shape:
        if n % (2 ** levels):
            raise ValueError(f"dims {shape} not divisible by 2**{levels}")


def _haar_axis(a, axis):
    a = np.moveaxis(a, axis, 0)
    lo = (a[0::2] + a[1::2]) / np.sqrt(2.0)
    hi = (a[0::2] - a[1::2]) / np.sqrt(2.0)
    return np.moveaxis(np.concatenate([lo, hi]), 0, axis)


def _ihaar_axis(a, axis):
    a = np.moveaxis(a, axis, 0)
    half = a.shape[0] // 2
    lo, hi = a[:half], a[half:]
    out = np.empty_like(a)
    out[0::2] = (lo + hi) / np.sqrt(2.0)
    out[1::2] = (lo - hi) / np.sqrt(2.0)
    return np.moveaxis(out, 0, axis)


def haar_dwt_forward(x, levels=1):
    """Orthonormal separable 3D Haar analysis in the usual octave layout.

    Level ``l`` works in place on the low-pass corner left by level ``l-1``.
    """
    x = np.asarray(x, dtype=np.complex128)
    _check_levels(x.shape, levels)
    c = x.copy()
    for lev in range(levels):
        sl = tuple(slice(0, n >> lev) for n in x.shape)
        block = c[sl]
        for axis in range(3):
            block = _haar_axis(block, axis)
        c[sl] = block
    return c


def haar_dwt_inverse(coeffs, levels=1):
    c = np.array(coeffs, dtype=np.complex128)
    _check_levels(c.shape, levels)
    for lev in reversed(range(levels)):
        sl = tuple(slice(0, n >> lev) for n in c.shape)
        block = c[sl]
        for axis in reversed(range(3)):
            block = _ihaar_axis(block, axis)
        c[sl] = block
    return c


def soft_threshold(v, tau):
    """Complex magnitude shrinkage ``v * max(0, 1 - tau/|v|)`` with 0 mapped to 0."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v)
    mag = np.abs(v)
    scale = np.maximum(1.0 - tau / np.where(mag > 0, mag, 1.0), 0.0)
    return np.where(mag > 0, v * scale, 0)


class FiniteDifference(SparsifyingTransform):
    linear = True
    orthonormal = False

    def forward(self, x):
        return finite_difference_forward(x)

    def adjoint(self, v):
        return finite_difference_adjoint(v)

    def pullback(self, x, v):
        return finite_difference_adjoint(v)


class HaarWavelet(SparsifyingTransform):
    linear = True
    orthonormal = True

    def __init__(self, levels=1):
        self.levels = levels

    def forward(self, x):
        return haar_dwt_forward(x, self.levels)

    def adjoint(self, v):
        return haar_dwt_inverse(v, self.levels)

    def pullback(self, x, v):
        return haar_dwt_inverse(v, self.levels)


def learned_residual_forward(net, x):
    """Artifact estimate ``G(x) - x``.

    With a global residual this is the pre-residual branch output, taken
    directly rather than by subtraction.
    """
    if net.global_residual:
        return branch_forward(net, x)
    return net_forward(net, x) - np.asarray(x, dtype=np.complex128)


def learned_residual_pullback(net, x, v):
    """``(J - I)^T v`` where ``J`` is the Jacobian of ``G`` at ``x``."""
    if net.global_residual:
        return branch_vjp(net, x, v)
    return net_vjp(net, x, v) - np.asarray(v, dtype=np.complex128)


class LearnedResidual(SparsifyingTransform):
    """The map ``x -> G(x) - x`` induced by a de-aliasing network."""

    def __init__(self, net):
        self.net = net

    def forward(self, x):
        return learned_residual_forward(self.net, x)

    def pullback(self, x, v):
        return learned_residual_pullback(self.net, x, v)


def sparsity_fraction(t, rel_threshold=0.1):
    """Fraction of entries with ``|t| < rel_threshold * max|t|``; 1.0 for an all-zero map."""
    mag = np.abs(np.asarray(t))
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        return 1.0
    return float(np.mean(mag < rel_threshold * peak))
