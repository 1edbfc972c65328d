"""Conjugate gradient, the ADMM reconstruction with a learned residual
regularizer, and the baseline reconstructors built on the same driver.

All reconstructors return the split variable ``z_T`` of the last iteration;
the trace keeps the data residual of that iterate and the primal gap
``||x_t - z_t|| / ||z_t||`` alongside.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .metrics import nmse as _nmse
from .network import net_forward
from .transforms import LearnedResidual, soft_threshold
from .volume import channel_sign, norm1, norm2, vdot

__all__ = [
    "CGInfo",
    "cg_solve",
    "prox_gd",
    "Stage",
    "ReconSchedule",
    "default_schedule",
    "TraceRecord",
    "AdmmTrace",
    "admm_darcs",
    "recon_zero_filled",
    "recon_sense",
    "recon_cs",
    "recon_pnp",
    "recon_dagan_direct",
    "recon_aics",
    "emit_sparsity_maps",
    "write_trace_csv",
]

log = logging.getLogger(__name__)

SENSE_TIKHONOV = 1e-9


class CGInfo(NamedTuple):
    n_iter: int
    residual: float
    converged: bool


def cg_solve(op, rhs, x0=None, tol=1e-6, maxiter=50, callback=None):
    """Solve ``op(x) = rhs`` for a Hermitian positive definite ``op``.

    Stops when ``||op(x) - rhs|| / ||rhs|| <= tol`` (recursive residual) or
    after ``maxiter`` iterations.  ``callback(x)`` is called after every
    update.  Returns ``(x, CGInfo)``.
    """
    rhs = np.asarray(rhs, dtype=np.complex128)
    b_norm = norm2(rhs)
    if b_norm == 0:
        return np.zeros_like(rhs), CGInfo(0, 0.0, True)
    if x0 is None:
        x = np.zeros_like(rhs)
        r = rhs.copy()
    else:
        x = np.array(x0, dtype=np.complex128)
        r = rhs - op(x)
    p = r.copy()
    rs = vdot(r, r).real
    n_iter = 0
    while True:
        rel = np.sqrt(rs) / b_norm
        if not np.isfinite(rel):
            raise FloatingPointError("non-finite residual in conjugate gradient")
        if rel <= tol or n_iter >= maxiter:
            break
        ap = op(p)
        pap = vdot(p, ap).real
        if not np.isfinite(pap):
            raise FloatingPointError("non-finite curvature in conjugate gradient")
        if pap <= 0:
            log.warning("cg: nonpositive curvature %.3e, operator not positive definite", pap)
            break
        step = rs / pap
        x += step * p
        r -= step * ap
        rs_new = vdot(r, r).real
        p = r + (rs_new / rs) * p
        rs = rs_new
        n_iter += 1
        if callback is not None:
            callback(x)
    return x, CGInfo(n_iter, float(rel), bool(rel <= tol))


def prox_gd(z0, anchor, transform, alpha, mu, K, beta):
    """``K`` fixed-step gradient steps on ``mu ||z - anchor||^2 + alpha ||t(z)||_1``.

    The l1 term is differentiated channelwise, ``sign(Re) + i sign(Im)`` with
    ``sign(0) = 0``, and pulled back through the transform.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    z = np.array(z0, dtype=np.complex128)
    anchor = np.asarray(anchor, dtype=np.complex128)
    if z.shape != anchor.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {anchor.shape}")
    for _ in range(K):
        g = 2.0 * mu * (z - anchor)
        if alpha != 0:
            g = g + alpha * transform.pullback(z, channel_sign(transform.forward(z)))
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient in proximal step")
        z = z - beta * g
    return z


@dataclass(frozen=True)
class Stage:
    start_iter: int
    alpha: float = 0.1
    mu: float = 0.005
    K: int = 2
    beta: float = 0.01
    transform_index: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.transform_index < 0:
            raise ValueError("transform_index must be >= 0")


@dataclass(frozen=True)
class ReconSchedule:
    """Per-stage ADMM parameters; a stage is active from its ``start_iter`` on."""

    stages: tuple
    T: int = 20
    cg_tol: float = 1e-6
    cg_maxiter: int = 50

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("schedule needs at least one stage")
        if stages[0].start_iter != 1:
            raise ValueError("first stage must start at iteration 1")
        starts = [s.start_iter for s in stages]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"stage start iterations must increase strictly: {starts}")
        if self.T < 0:
            raise ValueError("T must be >= 0")

    def stage_at(self, t):
        active = self.stages[0]
        for s in self.stages:
            if s.start_iter <= t:
                active = s
        return active

    def check_transforms(self, n_transforms):
        for s in self.stages:
            if s.transform_index >= n_transforms:
                raise ValueError(
                    f"stage starting at {s.start_iter} uses transform {s.transform_index} "
                    f"but only {n_transforms} are available"
                )

    def with_alpha(self, alpha):
        stages = [Stage(s.start_iter, alpha, s.mu, s.K, s.beta, s.transform_index) for s in self.stages]
        return ReconSchedule(tuple(stages), self.T, self.cg_tol, self.cg_maxiter)


def default_schedule(n_transforms=1):
    """Two-stage schedule: alpha 0.1, K 2, beta 0.01; mu 0.005 then 0.01 from iteration 11."""
    second = 1 if n_transforms > 1 else 0
    return ReconSchedule((
        Stage(1, alpha=0.1, mu=0.005, K=2, beta=0.01, transform_index=0),
        Stage(11, alpha=0.1, mu=0.01, K=2, beta=0.01, transform_index=second),
    ), T=20)


@dataclass
class TraceRecord:
    iter: int
    data_resid: float
    reg_value: float
    nmse: float = None
    primal_resid: float = 0.0
    cg_iters: int = 0


@dataclass
class AdmmTrace:
    records: list = field(default_factory=list)
    iterates: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return [getattr(r, name) for r in self.records]


def _admm(y, model, T, params_at, prox, reg_at, gt=None, cg_tol=1e-6, cg_maxiter=50, keep=()):
    """Scaled-form ADMM shared by every iterative reconstructor.

    ``params_at(t)`` gives ``mu`` for iteration ``t``; ``prox(t, anchor)``
    returns ``z_t``; ``reg_at(t, z)`` is the regularizer value for the trace.
    """
    trace = AdmmTrace()
    aty = model.adjoint(y)
    if T == 0 or not np.any(y):
        return np.zeros(model.shape, dtype=np.complex128), trace
    keep = set(keep)
    x = aty
    z = np.zeros_like(aty)
    u = np.zeros_like(aty)
    for t in range(1, T + 1):
        mu = params_at(t)
        rhs = aty + mu * (z - u)
        x, info = cg_solve(lambda v: model.normal(v, mu), rhs, x0=x, tol=cg_tol, maxiter=cg_maxiter)
        anchor = x + u
        z = prox(t, anchor)
        u = u + x - z
        z_norm = norm2(z)
        trace.records.append(TraceRecord(
            iter=t,
            data_resid=norm2(y - model.forward(z)),
            reg_value=reg_at(t, z),
            nmse=None if gt is None else _nmse(z, gt),
            primal_resid=norm2(x - z) / z_norm if z_norm > 0 else 0.0,
            cg_iters=info.n_iter,
        ))
        if t in keep:
            trace.iterates[t] = z.copy()
    return z, trace


def _as_transform(t):
    # bare networks are accepted in place of their residual transform
    return t if hasattr(t, "pullback") else LearnedResidual(t)


def admm_darcs(y, model, schedule, transforms, gt=None, keep_iterates=()):
    """ADMM on ``||y - Ax||^2 + alpha ||t(x)||_1`` with a (learned) transform ``t``.

    Step 1 is a warm-started CG solve of ``(A^H A + mu I) x = A^H y + mu (z - u)``,
    step 2 runs ``prox_gd`` from ``z = x + u`` with the active stage's
    transform, step 3 updates the scaled dual.  ``u`` carries over unchanged
    when ``mu`` switches between stages.  Returns ``(z_T, trace)``.
    """
    transforms = [_as_transform(t) for t in transforms]
    schedule.check_transforms(len(transforms))

    def prox(t, anchor):
        s = schedule.stage_at(t)
        return prox_gd(anchor, anchor, transforms[s.transform_index], s.alpha, s.mu, s.K, s.beta)

    def reg(t, z):
        return norm1(transforms[schedule.stage_at(t).transform_index].forward(z))

    return _admm(y, model, schedule.T, lambda t: schedule.stage_at(t).mu, prox, reg, gt=gt,
                 cg_tol=schedule.cg_tol, cg_maxiter=schedule.cg_maxiter, keep=keep_iterates)


def recon_zero_filled(y, model):
    return model.adjoint(y)


def recon_sense(y, model, tol=1e-6, maxiter=50):
    """Iterative SENSE: CG on ``A^H A x = A^H y`` with a 1e-9 Tikhonov floor."""
    aty = model.adjoint(y)
    x, _ = cg_solve(lambda v: model.normal(v, SENSE_TIKHONOV), aty, tol=tol, maxiter=maxiter)
    return x


def recon_cs(y, model, transform, alpha, mu, T, K=10, beta=None, gt=None, cg_tol=1e-6,
             cg_maxiter=50, return_trace=False):
    """Classical l1 compressed sensing with a fixed linear transform.

    Orthonormal transforms get the exact proximal map
    ``Phi^H soft(Phi(x + u), alpha / (2 mu))``; others fall back to ``K``
    subgradient steps of size ``beta``.  The default unit step suits volumes
    scaled to a peak magnitude near 1.
    """
    tau = alpha / (2.0 * mu)
    if getattr(transform, "orthonormal", False):
        def prox(t, anchor):
            return transform.adjoint(soft_threshold(transform.forward(anchor), tau))
    else:
        step = 1.0 if beta is None else beta

        def prox(t, anchor):
            return prox_gd(anchor, anchor, transform, alpha, mu, K, step)

    z, trace = _admm(y, model, T, lambda t: mu, prox, lambda t, z: norm1(transform.forward(z)),
                     gt=gt, cg_tol=cg_tol, cg_maxiter=cg_maxiter)
    return (z, trace) if return_trace else z


def recon_pnp(y, model, net, mu, T, gt=None, cg_tol=1e-6, cg_maxiter=50, return_trace=False):
    """Plug-and-play ADMM: the proximal step is replaced by ``z = G(x + u)``."""
    def prox(t, anchor):
        return net_forward(net, anchor)

    z, trace = _admm(y, model, T, lambda t: mu, prox, lambda t, z: 0.0, gt=gt, cg_tol=cg_tol,
                     cg_maxiter=cg_maxiter)
    return (z, trace) if return_trace else z


def recon_dagan_direct(y, model, net):
    """Single network pass on the zero-filled image."""
    return net_forward(net, recon_zero_filled(y, model))


def recon_aics(y, model, net, alpha, mu, T, gt=None, cg_tol=1e-6, cg_maxiter=50,
               return_trace=False):
    """ADMM on ``||y - Ax||^2 + alpha ||x - x_prior||_1`` with a fixed network prior."""
    prior = recon_dagan_direct(y, model, net)
    tau = alpha / (2.0 * mu)

    def prox(t, anchor):
        return prior + soft_threshold(anchor - prior, tau)

    z, trace = _admm(y, model, T, lambda t: mu, prox, lambda t, z: norm1(z - prior), gt=gt,
                     cg_tol=cg_tol, cg_maxiter=cg_maxiter)
    return (z, trace) if return_trace else z


def emit_sparsity_maps(iterates, transform, iterations=None):
    """Transform outputs ``t(z_t)`` for recorded iterates.

    ``iterates`` is an ``AdmmTrace`` or a mapping from iteration to volume.
    Returns a list ordered like ``iterations`` (default: all recorded).
    """
    if isinstance(iterates, AdmmTrace):
        iterates = iterates.iterates
    transform = _as_transform(transform)
    if iterations is None:
        iterations = sorted(iterates)
    return [transform.forward(iterates[t]) for t in iterations]


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "data_resid", "reg_value", "nmse"])
        for r in trace.records:
            w.writerow([r.iter, repr(r.data_resid), repr(r.reg_value),
                        "" if r.nmse is None else repr(r.nmse)])
