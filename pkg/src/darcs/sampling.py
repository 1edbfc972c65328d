"""Poisson-disc undersampling masks on the (ky, kz) phase-encode plane.

Masks are boolean arrays of shape ``(nz, ny)``.  The generator throws darts in
a seeded random order, rejecting any point closer than ``r`` to an already
accepted one, and bisects on ``r`` until the requested acceleration is met.
The dense center block is added afterwards and takes no part in the distance
test.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SplitMix64",
    "MaskConfig",
    "SamplingMask",
    "MaskGenerationError",
    "generate_poisson_mask",
    "mask_acceleration",
    "center_slices",
]

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood golden-gamma increment).

    ``bounded(n)`` maps a 64-bit draw onto ``[0, n)`` with a multiply-shift,
    ``(draw * n) >> 64``, so sequences are reproducible in any language with
    64-bit unsigned arithmetic.
    """

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def bounded(self, n):
        return (self.next_u64() * n) >> 64

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``, swapping from the top down."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.bounded(i + 1)
            order[i], order[j] = order[j], order[i]
        return order


class MaskGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MaskConfig:
    ny: int
    nz: int
    accel: float
    center: tuple = (24, 24)
    seed: int = 0
    tolerance: float = 0.05

    def __post_init__(self):
        cy, cz = self.center
        if self.ny < 1 or self.nz < 1:
            raise ValueError("grid dims must be positive")
        if not (0 <= cy <= self.ny and 0 <= cz <= self.nz):
            raise ValueError(f"center {self.center} does not fit in a {self.ny}x{self.nz} grid")
        if self.accel < 1:
            raise ValueError("acceleration must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")


@dataclass
class SamplingMask:
    """A generated mask plus the metadata needed to audit it."""

    mask: np.ndarray
    center: tuple
    r_min: float
    target_accel: float = field(default=1.0)
    iterations: int = 0

    def __array__(self, dtype=None, copy=None):
        return self.mask if dtype is None else self.mask.astype(dtype)

    @property
    def acceleration(self):
        return mask_acceleration(self.mask)


def center_slices(ny, nz, center):
    """Index slices ``(z, y)`` of the centered ``cy x cz`` block."""
    cy, cz = center
    y0 = ny // 2 - cy // 2
    z0 = nz // 2 - cz // 2
    return slice(z0, z0 + cz), slice(y0, y0 + cy)


def mask_acceleration(mask):
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mask has no sampled positions")
    return mask.size / n


def _throw_darts(points, ny, nz, radius):
    """Accept points in order unless one within ``radius`` is already taken."""
    rad = max(int(math.ceil(radius)) - 1, 0)
    if rad == 0:
        return list(points)
    offs = np.arange(-rad, rad + 1)
    disk = (offs[:, None] ** 2 + offs[None, :] ** 2) < radius * radius
    occ = np.zeros((nz + 2 * rad, ny + 2 * rad), dtype=bool)
    width = 2 * rad + 1
    accepted = []
    for z, y in points:
        if (occ[z:z + width, y:y + width] & disk).any():
            continue
        occ[z + rad, y + rad] = True
        accepted.append((z, y))
    return accepted


def generate_poisson_mask(cfg):
    """Generate a Poisson-disc mask for ``cfg``; see the module docstring."""
    ny, nz = cfg.ny, cfg.nz
    mask = np.zeros((nz, ny), dtype=bool)
    zs, ys = center_slices(ny, nz, cfg.center)
    if cfg.accel == 1:
        mask[:] = True
        return SamplingMask(mask, tuple(cfg.center), 0.0, 1.0, 0)

    in_center = np.zeros_like(mask)
    in_center[zs, ys] = True
    n_center = int(in_center.sum())
    flat = [divmod(i, ny) for i in range(ny * nz)]
    periphery = [p for p in flat if not in_center[p]]
    rng = SplitMix64(cfg.seed)
    order = [periphery[i] for i in rng.permutation(len(periphery))]

    def within(count):
        if n_center + count == 0:
            return False
        return abs(mask.size / (n_center + count) - cfg.accel) <= cfg.tolerance * cfg.accel

    need = int(round(ny * nz / cfg.accel)) - n_center
    if need < 0 or not within(need):
        achieved = mask.size / max(n_center, 1)
        raise MaskGenerationError(
            f"could not reach R={cfg.accel} within {cfg.tolerance:.0%} with a "
            f"{cfg.center[0]}x{cfg.center[1]} center; achieved R={achieved:.3f}"
        )

    # count(r) is a step function, so bisect for the largest radius that still
    # yields enough darts and stop throwing once ``need`` are placed
    lo, hi = 1.0, float(max(ny, nz))
    best = None
    for it in range(1, 31):
        r = 0.5 * (lo + hi)
        accepted = _throw_darts(order, ny, nz, r)
        if within(len(accepted)):
            best = (r, accepted, it)
            break
        if len(accepted) >= need:
            lo = r
        else:
            hi = r
        if hi - lo < 1e-3:
            break
    if best is None:
        accepted = _throw_darts(order, ny, nz, lo)[:need]
        if len(accepted) < need or not within(len(accepted)):
            achieved = mask.size / max(n_center + len(accepted), 1)
            raise MaskGenerationError(
                f"could not reach R={cfg.accel} within {cfg.tolerance:.0%}; achieved R={achieved:.3f}"
            )
        best = (lo, accepted, it)
    r, accepted, it = best
    for z, y in accepted:
        mask[z, y] = True
    mask[zs, ys] = True
    return SamplingMask(mask, tuple(cfg.center), r, float(cfg.accel), it)
