"""Learned-residual ADMM reconstruction for undersampled multi-coil 3D MRI."""

__version__ = "0.1.0"

from .forward import ForwardModel, apply_adjoint, apply_forward, apply_normal
from .metrics import evaluate, nmse, psnr, ssim3d
from .network import Network, load_weights, net_forward, net_vjp, write_weights
from .sampling import MaskConfig, generate_poisson_mask
from .solvers import (
    ReconSchedule,
    Stage,
    admm_darcs,
    cg_solve,
    default_schedule,
    recon_aics,
    recon_cs,
    recon_dagan_direct,
    recon_pnp,
    recon_sense,
    recon_zero_filled,
)
from .synth import body_support, make_coil_maps, make_phantom, simulate_kspace
from .transforms import FiniteDifference, HaarWavelet, LearnedResidual, sparsity_fraction
from .volume import read_cvol, write_cvol
