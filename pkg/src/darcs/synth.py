"""Synthetic ground truth, coil sensitivities and undersampled k-space."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .validation import dims_to_shape

__all__ = [
    "PhantomConstants",
    "PHANTOM",
    "SimConfig",
    "make_phantom",
    "make_coil_maps",
    "simulate_kspace",
    "normalized_grid",
    "body_support",
]


@dataclass(frozen=True)
class PhantomConstants:
    n_ellipsoids: tuple = (5, 10)        # inclusive range, body included
    body_radii: tuple = (0.78, 0.70, 0.80)
    body_intensity: float = 0.35
    inner_radius: tuple = (0.12, 0.35)
    inner_intensity: tuple = (0.08, 0.35)
    n_tubes: tuple = (2, 3)
    tube_radius_vox: tuple = (1.0, 1.5)  # diameter 2-3 voxels
    tube_intensity: tuple = (0.75, 1.0)
    tube_samples: int = 400
    phase_amplitude: float = 0.6         # radians, linear + quadratic terms
    coil_lobe_width: float = 0.9         # gaussian sigma in normalized units
    coil_ring_radius: float = 1.3
    support_margin: float = 1.08         # body radii scale where sensitivity is full
    support_rolloff: float = 0.0         # cosine taper width beyond the margin


PHANTOM = PhantomConstants()


@dataclass(frozen=True)
class SimConfig:
    dims: tuple
    n_coils: int = 4
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        dims_to_shape(self.dims)
        if self.n_coils < 1:
            raise ValueError("n_coils must be >= 1")
        if self.noise_level < 0:
            raise ValueError("noise level must be >= 0")


def normalized_grid(shape):
    """Voxel-center coordinates in [-1, 1] as (z, y, x) arrays."""
    axes = [np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1) for n in shape]
    return np.meshgrid(*axes, indexing="ij")


def _curve(rng, n_samples):
    # quadratic Bezier through the inner body; endpoints on opposite sides
    ang = rng.uniform(0, 2 * np.pi)
    p0 = np.array([rng.uniform(-0.5, 0.5), 0.55 * np.sin(ang), 0.55 * np.cos(ang)])
    p2 = np.array([rng.uniform(-0.5, 0.5), -0.55 * np.sin(ang), -0.55 * np.cos(ang)])
    p1 = rng.uniform(-0.45, 0.45, size=3)
    t = np.linspace(0.0, 1.0, n_samples)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2


def make_phantom(dims, seed=0, constants=PHANTOM):
    """Ellipsoids plus thin bright tubes with a smooth phase, max magnitude 1."""
    shape = dims_to_shape(dims)
    rng = np.random.default_rng(seed)
    c = constants
    z, y, x = normalized_grid(shape)
    mag = np.zeros(shape)

    bz, by, bx = c.body_radii
    body = (x / bx) ** 2 + (y / by) ** 2 + (z / bz) ** 2 <= 1.0
    mag[body] = c.body_intensity

    n_ell = int(rng.integers(c.n_ellipsoids[0], c.n_ellipsoids[1] + 1))
    for _ in range(n_ell - 1):
        center = rng.uniform(-0.4, 0.4, size=3)
        radii = rng.uniform(*c.inner_radius, size=3)
        rot = _rotation(rng.uniform(0, np.pi, size=3))
        pts = np.stack([z - center[0], y - center[1], x - center[2]], axis=-1) @ rot.T
        inside = np.sum((pts / radii) ** 2, axis=-1) <= 1.0
        mag[inside & body] += rng.uniform(*c.inner_intensity)

    # tubes: distance to a sampled curve measured in voxel units
    scale = np.array([(n - 1) / 2.0 if n > 1 else 1.0 for n in shape])
    vox = np.stack([z, y, x], axis=-1).reshape(-1, 3) * scale
    n_tubes = int(rng.integers(c.n_tubes[0], c.n_tubes[1] + 1))
    for _ in range(n_tubes):
        curve = _curve(rng, c.tube_samples) * scale
        dist, _ = cKDTree(curve).query(vox)
        radius = rng.uniform(*c.tube_radius_vox)
        inside = (dist <= radius).reshape(shape) & body
        mag[inside] = np.maximum(mag[inside], rng.uniform(*c.tube_intensity))

    coef = rng.uniform(-1, 1, size=7) * c.phase_amplitude
    phase = (coef[0] + coef[1] * x + coef[2] * y + coef[3] * z
             + 0.5 * (coef[4] * x * y + coef[5] * x * x + coef[6] * y * z))
    peak = np.unravel_index(np.argmax(mag), shape)
    phase = phase - phase[peak]
    vol = (mag / mag.max()) * np.exp(1j * phase)
    # the peak has zero phase so it is exactly 1; rounding in exp() can push
    # other plateau voxels a few ulps above 1
    vol[peak] = 1.0
    over = np.abs(vol) > 1.0
    vol[over] *= 1.0 - 4 * np.finfo(float).eps
    return vol


def _rotation(angles):
    a, b, g = angles
    rz = np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])
    ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    rx = np.array([[1, 0, 0], [0, np.cos(g), -np.sin(g)], [0, np.sin(g), np.cos(g)]])
    return rz @ ry @ rx


def body_support(dims, rolloff=None, constants=PHANTOM):
    """Envelope that is 1 on the slightly dilated phantom body and 0 outside.

    With ``rolloff > 0`` the edge becomes a raised cosine over that many
    normalized units of ellipsoidal radius.  The default is a hard edge: a
    taper leaves small but nonzero sensitivities in the background, and those
    voxels become near-null directions of the normal operator.
    """
    rolloff = constants.support_rolloff if rolloff is None else float(rolloff)
    shape = dims_to_shape(dims)
    z, y, x = normalized_grid(shape)
    bz, by, bx = constants.body_radii
    rho = np.sqrt((x / bx) ** 2 + (y / by) ** 2 + (z / bz) ** 2)
    excess = rho - constants.support_margin
    if rolloff <= 0:
        return (excess <= 0).astype(np.float64)
    s = np.clip(excess / rolloff, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * s))


def make_coil_maps(dims, n_coils=4, seed=0, support=None, constants=PHANTOM):
    """Gaussian-lobe coil sensitivities placed around the volume.

    The maps are SOS-normalized to 1 at every voxel and then, if ``support``
    is given (e.g. ``body_support(dims)``), multiplied by it so that the sum
    of squares equals ``support**2``: 1 on the object, rolling off to 0 in
    the background.  Returns an array of shape ``(n_coils, nz, ny, nx)``.
    """
    if n_coils < 1:
        raise ValueError("n_coils must be >= 1")
    shape = dims_to_shape(dims)
    rng = np.random.default_rng(seed)
    z, y, x = normalized_grid(shape)
    maps = np.empty((n_coils,) + shape, dtype=np.complex128)
    offset = rng.uniform(0, 2 * np.pi)
    w = constants.coil_lobe_width
    for c in range(n_coils):
        ang = offset + 2 * np.pi * c / n_coils
        cx = constants.coil_ring_radius * np.cos(ang)
        cy = constants.coil_ring_radius * np.sin(ang)
        cz = 0.5 * (-1) ** c if n_coils > 2 else 0.0
        d2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
        k = rng.uniform(-1.0, 1.0, size=3)
        phase = rng.uniform(0, 2 * np.pi) + k[0] * x + k[1] * y + k[2] * z
        maps[c] = np.exp(-d2 / (2 * w * w)) * np.exp(1j * phase)
    sos = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    maps /= sos
    if support is not None:
        support = np.asarray(support, dtype=np.float64)
        if support.shape != shape or support.min() < 0 or support.max() > 1:
            raise ValueError("support must be in [0, 1] with the volume's shape")
        maps *= support
    return maps


def simulate_kspace(x, model, noise_level=0.0, seed=0):
    """``D (A x + eps)`` with ``||eps|| = noise_level * ||A x||`` on sampled positions."""
    if noise_level < 0:
        raise ValueError("noise level must be >= 0")
    clean = model.forward(x)
    if noise_level == 0:
        return clean
    rng = np.random.default_rng(seed)
    sampled = np.broadcast_to(model.mask[:, :, None], clean.shape[1:])
    sampled = np.broadcast_to(sampled, clean.shape)
    noise = np.zeros_like(clean)
    n = int(sampled.sum())
    noise[sampled] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    noise *= noise_level * np.linalg.norm(clean) / np.linalg.norm(noise)
    return clean + noise
