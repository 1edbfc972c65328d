"""Command line driver: ``darcs <subcommand> --flag value ...``.

Every subcommand that writes files also writes ``<output>.prov.json`` with
the arguments, seeds, a config hash, input file digests and library
versions.  Failures print one JSON line to stderr and exit with 2 (missing
file), 3 (invalid config or input) or 4 (solver failure).
"""

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._threads import n_workers
from .config import ConfigError, config_hash, load_config
from .forward import ForwardModel
from .metrics import evaluate
from .network import load_weights
from .sampling import MaskConfig, MaskGenerationError, generate_poisson_mask
from .solvers import (
    admm_darcs,
    recon_aics,
    recon_cs,
    recon_dagan_direct,
    recon_pnp,
    recon_sense,
    recon_zero_filled,
    write_trace_csv,
)
from .synth import body_support, make_coil_maps, make_phantom, simulate_kspace
from .transforms import FiniteDifference, HaarWavelet, LearnedResidual, max_haar_levels, sparsity_fraction
from .volume import read_cvol, write_cvol

log = logging.getLogger("darcs")

EXIT_MISSING = 2
EXIT_INVALID = 3
EXIT_SOLVER = 4


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _provenance(out, command, args, inputs=(), seeds=None, config=None):
    record = {
        "command": command,
        "args": args,
        "config_hash": config_hash(config if config is not None else args),
        "seeds": seeds or {},
        "inputs": {str(p): _digest(p) for p in inputs},
        "versions": {
            "darcs": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "threads": n_workers(),
    }
    Path(f"{out}.prov.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _read_volume(path):
    vol = read_cvol(path)
    if vol.dtype == bool or vol.ndim != 3:
        raise ValueError(f"{path}: expected a single-coil complex volume")
    return vol


def _read_mask(path):
    mask = read_cvol(path)
    if mask.dtype != bool:
        raise ValueError(f"{path}: expected a boolean mask")
    return mask


def _read_multicoil(path):
    arr = read_cvol(path)
    if arr.dtype == bool:
        raise ValueError(f"{path}: expected complex data, found a mask")
    return arr[None] if arr.ndim == 3 else arr


def cmd_mask(a):
    cfg = MaskConfig(a.ny, a.nz, a.accel, tuple(a.center), a.seed, a.tolerance)
    m = generate_poisson_mask(cfg)
    write_cvol(a.out, m.mask)
    _provenance(a.out, "mask", vars(a), seeds={"mask": a.seed})
    print(f"effective_R={m.acceleration:.4f} samples={int(m.mask.sum())} r_min={m.r_min:.4f}")


def cmd_phantom(a):
    write_cvol(a.out, make_phantom(tuple(a.dims), a.seed))
    _provenance(a.out, "phantom", vars(a), seeds={"phantom": a.seed})


def cmd_coils(a):
    dims = tuple(a.dims)
    support = body_support(dims) if a.support == "body" else None
    write_cvol(a.out, make_coil_maps(dims, a.ncoils, a.seed, support=support))
    _provenance(a.out, "coils", vars(a), seeds={"coils": a.seed})


def _model(maps_path, mask_path):
    return ForwardModel(_read_multicoil(maps_path), _read_mask(mask_path))


def cmd_simulate(a):
    gt = _read_volume(a.gt)
    model = _model(a.maps, a.mask)
    write_cvol(a.out, simulate_kspace(gt, model, a.noise, a.seed))
    _provenance(a.out, "simulate", vars(a), inputs=(a.gt, a.maps, a.mask), seeds={"noise": a.seed})


def _reconstruct(cfg, y, model, gt):
    s = cfg.first_stage
    sch = cfg.schedule
    nets = [load_weights(p) for p in cfg.net_paths]
    opts = dict(gt=gt, cg_tol=sch.cg_tol, cg_maxiter=sch.cg_maxiter)
    if cfg.method == "zf":
        return recon_zero_filled(y, model), None
    if cfg.method == "sense":
        return recon_sense(y, model, tol=sch.cg_tol, maxiter=sch.cg_maxiter), None
    if cfg.method == "cs-haar":
        t = HaarWavelet(max_haar_levels(model.shape))
        return recon_cs(y, model, t, s.alpha, s.mu, sch.T, return_trace=True, **opts)
    if cfg.method == "cs-fd":
        return recon_cs(y, model, FiniteDifference(), s.alpha, s.mu, sch.T, K=s.K, beta=s.beta,
                        return_trace=True, **opts)
    if cfg.method == "pnp":
        return recon_pnp(y, model, nets[s.transform_index], s.mu, sch.T, return_trace=True, **opts)
    if cfg.method == "dagan":
        return recon_dagan_direct(y, model, nets[s.transform_index]), None
    if cfg.method == "aics":
        return recon_aics(y, model, nets[s.transform_index], s.alpha, s.mu, sch.T,
                          return_trace=True, **opts)
    return admm_darcs(y, model, sch, nets, gt=gt)


def cmd_recon(a):
    cfg, doc = load_config(a.config, method=a.method)
    y = _read_multicoil(a.y)
    model = _model(a.maps, a.mask)
    gt = _read_volume(a.gt) if a.gt else None
    z, trace = _reconstruct(cfg, y, model, gt)
    write_cvol(a.out, z)
    if a.trace:
        if trace is None:
            raise ConfigError(f"method {cfg.method} is not iterative and has no trace")
        write_trace_csv(a.trace, trace)
    inputs = [a.y, a.maps, a.mask, a.config, *cfg.net_paths] + ([a.gt] if a.gt else [])
    _provenance(a.out, "recon", vars(a), inputs=inputs, config=dict(doc, method=cfg.method))


def cmd_eval(a):
    doc = evaluate(_read_volume(a.recon), _read_volume(a.gt))
    text = json.dumps(doc, sort_keys=True)
    if a.out:
        Path(a.out).write_text(text + "\n")
        _provenance(a.out, "eval", vars(a), inputs=(a.recon, a.gt))
    print(text)


def emit_slice(vol, axis, index, out):
    """Write the magnitude of one slice as an 8-bit binary PGM.

    ``axis`` is "x", "y" or "z"; gray levels span ``[0, max|vol|]`` over the
    whole volume, so slices of one volume share a window.
    """
    mag = np.abs(np.asarray(vol))
    ax = {"z": 0, "y": 1, "x": 2}[axis]
    n = mag.shape[ax]
    if not 0 <= index < n:
        raise IndexError(f"slice index {index} out of range for {axis} with {n} planes")
    plane = np.take(mag, index, axis=ax)
    peak = mag.max()
    img = np.zeros(plane.shape, dtype=np.uint8) if peak == 0 else \
        np.rint(255.0 * plane / peak).astype(np.uint8)
    h, w = img.shape
    with open(out, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def cmd_slice(a):
    emit_slice(_read_volume(a.vol), a.axis, a.index, a.out)
    _provenance(a.out, "slice", vars(a), inputs=(a.vol,))


def cmd_sparsity(a):
    vol = _read_volume(a.vol)
    t = LearnedResidual(load_weights(a.net))(vol)
    frac = sparsity_fraction(t, a.threshold)
    if a.out:
        write_cvol(a.out, t)
        _provenance(a.out, "sparsity", vars(a), inputs=(a.vol, a.net))
    print(f"sparsity_fraction={frac:.6f}")


def build_parser():
    p = _Parser(prog="darcs", description="Learned-residual ADMM MRI reconstruction toolkit.",
                allow_abbrev=False)
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mask", help="Poisson-disc sampling mask")
    s.add_argument("--ny", type=int, required=True)
    s.add_argument("--nz", type=int, required=True)
    s.add_argument("--accel", type=float, required=True)
    s.add_argument("--center", type=int, nargs=2, default=[24, 24], metavar=("CY", "CZ"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=0.05)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("phantom", help="synthetic ground-truth volume")
    s.add_argument("--dims", type=int, nargs=3, required=True, metavar=("NX", "NY", "NZ"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("coils", help="synthetic coil sensitivity maps")
    s.add_argument("--dims", type=int, nargs=3, required=True, metavar=("NX", "NY", "NZ"))
    s.add_argument("--ncoils", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--support", choices=("none", "body"), default="none",
                   help="'body' zeroes sensitivity outside the phantom body")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_coils)

    s = sub.add_parser("simulate", help="undersampled, optionally noisy k-space")
    s.add_argument("--gt", required=True)
    s.add_argument("--maps", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("recon", help="reconstruct k-space")
    s.add_argument("--method", default=None, help="overrides the config's method")
    s.add_argument("--y", required=True)
    s.add_argument("--maps", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--gt", help="ground truth, only used for the trace's nmse column")
    s.add_argument("--out", required=True)
    s.add_argument("--trace")
    s.set_defaults(func=cmd_recon)

    s = sub.add_parser("eval", help="PSNR, SSIM and NMSE against ground truth")
    s.add_argument("--recon", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("slice", help="magnitude slice as PGM")
    s.add_argument("--vol", required=True)
    s.add_argument("--axis", choices=("x", "y", "z"), default="z")
    s.add_argument("--index", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_slice)

    s = sub.add_parser("sparsity", help="learned residual map of a volume and its sparsity")
    s.add_argument("--vol", required=True)
    s.add_argument("--net", required=True)
    s.add_argument("--threshold", type=float, default=0.1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sparsity)
    return p


def _fail(kind, code, message):
    line = json.dumps({"error": kind, "exit": code, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", EXIT_INVALID, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    func = args.func
    del args.func
    try:
        func(args)
    except FileNotFoundError as exc:
        return _fail("missing_file", EXIT_MISSING, exc.filename or exc)
    except (FloatingPointError, MaskGenerationError, np.linalg.LinAlgError) as exc:
        return _fail("solver_failure", EXIT_SOLVER, exc)
    except ConfigError as exc:
        return _fail("invalid_config", EXIT_INVALID, exc)
    except (ValueError, IndexError, OSError) as exc:
        return _fail("invalid_input", EXIT_INVALID, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
