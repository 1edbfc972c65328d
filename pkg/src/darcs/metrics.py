"""Image quality metrics for complex volumes."""

import numpy as np
from skimage.metrics import structural_similarity

__all__ = ["nmse", "psnr", "ssim3d", "evaluate", "SSIM_WINDOW", "PSNR_CAP_DB"]

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_CAP_DB = 120.0


def _pair(recon, gt):
    recon = np.asarray(recon, dtype=np.complex128)
    gt = np.asarray(gt, dtype=np.complex128)
    if recon.shape != gt.shape:
        raise ValueError(f"shape mismatch: {recon.shape} vs {gt.shape}")
    return recon, gt


def nmse(recon, gt):
    """``||recon - gt||^2 / ||gt||^2`` on the complex values."""
    recon, gt = _pair(recon, gt)
    denom = np.vdot(gt, gt).real
    if denom == 0:
        raise ValueError("ground truth is all zero")
    diff = recon - gt
    return float(np.vdot(diff, diff).real / denom)


def psnr(recon, gt):
    """Peak SNR in dB with ``peak = max|gt|``, capped at ``PSNR_CAP_DB``."""
    recon, gt = _pair(recon, gt)
    mse = float(np.mean(np.abs(recon - gt) ** 2))
    peak = float(np.abs(gt).max())
    if mse <= 0 or peak == 0:
        return PSNR_CAP_DB
    value = 10.0 * np.log10(peak * peak / mse)
    return float(min(value, PSNR_CAP_DB))


def ssim3d(recon, gt):
    """Mean local SSIM of the magnitude volumes.

    Uses a uniform 7x7x7 window, K1 = 0.01, K2 = 0.03 and a dynamic range of
    ``max|gt|``.  Because the range comes from ``gt`` the metric is not
    symmetric in its arguments.
    """
    recon, gt = _pair(recon, gt)
    if min(gt.shape) < SSIM_WINDOW:
        raise ValueError(f"volume {gt.shape} smaller than the {SSIM_WINDOW}^3 SSIM window")
    ref = np.abs(gt)
    data_range = float(ref.max()) or 1.0
    return float(structural_similarity(
        ref, np.abs(recon), win_size=SSIM_WINDOW, data_range=data_range,
        gaussian_weights=False, K1=SSIM_K1, K2=SSIM_K2,
    ))


def evaluate(recon, gt):
    """Metrics document as written by the ``eval`` subcommand."""
    return {
        "psnr_db": psnr(recon, gt),
        "ssim": ssim3d(recon, gt),
        "nmse": nmse(recon, gt),
        "ssim_window": SSIM_WINDOW,
        "psnr_cap_db": PSNR_CAP_DB,
    }
