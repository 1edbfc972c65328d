"""Multi-coil Cartesian imaging operator ``A = D F S``."""

import numpy as np
import scipy.fft

from ._threads import n_workers
from .validation import check_kspace, check_mask, check_maps, check_volume

__all__ = [
    "fft_centered",
    "ifft_centered",
    "ForwardModel",
    "apply_forward",
    "apply_adjoint",
    "apply_normal",
]

_AXES = (-3, -2, -1)


def fft_centered(x):
    """Unitary 3D DFT over the last three axes with DC at ``n // 2``."""
    x = np.asarray(x, dtype=np.complex128)
    k = scipy.fft.fftn(scipy.fft.ifftshift(x, axes=_AXES), axes=_AXES, norm="ortho",
                       workers=n_workers())
    return scipy.fft.fftshift(k, axes=_AXES)


def ifft_centered(k):
    k = np.asarray(k, dtype=np.complex128)
    x = scipy.fft.ifftn(scipy.fft.ifftshift(k, axes=_AXES), axes=_AXES, norm="ortho",
                        workers=n_workers())
    return scipy.fft.fftshift(x, axes=_AXES)


class ForwardModel:
    """Coil sensitivities, Fourier transform and phase-encode undersampling.

    Parameters
    ----------
    maps : ndarray, shape (ncoils, nz, ny, nx)
        Complex coil sensitivities.
    mask : ndarray of bool, shape (nz, ny)
        Sampling pattern on the phase-encode plane; the readout axis x is
        always fully sampled.
    """

    def __init__(self, maps, mask):
        maps = check_maps(maps)
        mask = check_mask(mask)
        if mask.shape != maps.shape[1:3]:
            raise ValueError(f"mask shape {mask.shape} does not match maps {maps.shape[1:3]} (nz, ny)")
        self.maps = maps
        self.mask = mask
        self.maps.flags.writeable = False
        self.mask.flags.writeable = False
        self._kmask = mask[:, :, None]
        self._conj_maps = np.conj(maps)
        # F^H D F is a circular convolution, so the centering shifts cancel and
        # the fully sampled x transform drops out of A^H A
        self._nmask = scipy.fft.ifftshift(mask)[:, :, None]

    @property
    def ncoils(self):
        return self.maps.shape[0]

    @property
    def shape(self):
        """Image array shape ``(nz, ny, nx)``."""
        return self.maps.shape[1:]

    @property
    def dims(self):
        """Image dims ``(nx, ny, nz)``."""
        nz, ny, nx = self.shape
        return nx, ny, nz

    def forward(self, x):
        x = check_volume(x, self.shape)
        k = fft_centered(self.maps * x)
        return np.where(self._kmask, k, 0)

    def adjoint(self, y):
        y = check_kspace(y, (self.ncoils,) + self.shape)
        coil_images = ifft_centered(np.where(self._kmask, y, 0))
        return np.einsum("c...,c...->...", self._conj_maps, coil_images)

    def normal(self, x, mu=0.0):
        """``A^H A x + mu x``, evaluated with 2D transforms over (z, y)."""
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        x = check_volume(x, self.shape)
        workers = n_workers()
        k = scipy.fft.fftn(self.maps * x, axes=(1, 2), norm="ortho", workers=workers,
                           overwrite_x=True)
        k *= self._nmask
        k = scipy.fft.ifftn(k, axes=(1, 2), norm="ortho", workers=workers, overwrite_x=True)
        out = np.einsum("c...,c...->...", self._conj_maps, k)
        if mu:
            out += mu * x
        return out

    __call__ = forward


def apply_forward(model, x):
    return model.forward(x)


def apply_adjoint(model, y):
    return model.adjoint(y)


def apply_normal(model, mu, x):
    return model.normal(x, mu)
