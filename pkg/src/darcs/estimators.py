"""scikit-learn style wrappers around the reconstructors.

A reconstructor is fitted to a ``ForwardModel`` (coil maps plus mask) and
then transforms k-space into an image::

    rec = DarcsRecon(transforms=[net], alpha=0.1).fit(model)
    image = rec.transform(kspace)
    rec.trace_            # AdmmTrace of the last call

Parameters are plain constructor arguments, so ``get_params``, ``set_params``
and ``sklearn.base.clone`` work for parameter sweeps.
"""

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .forward import ForwardModel
from .metrics import nmse
from .solvers import (
    ReconSchedule,
    Stage,
    admm_darcs,
    default_schedule,
    recon_aics,
    recon_cs,
    recon_dagan_direct,
    recon_pnp,
    recon_sense,
    recon_zero_filled,
)
from .transforms import FiniteDifference, HaarWavelet, max_haar_levels

__all__ = [
    "ZeroFilledRecon",
    "SenseRecon",
    "CSRecon",
    "PnPRecon",
    "DaganRecon",
    "AicsRecon",
    "DarcsRecon",
]


class _Reconstructor(BaseEstimator):
    # no TransformerMixin: fit takes a forward model, transform takes k-space,
    # so the mixin's fit_transform(X) would be meaningless

    def fit(self, X, y=None):
        """Store the forward model ``X``; ``y`` is ignored."""
        if not isinstance(X, ForwardModel):
            raise TypeError(f"expected a ForwardModel, got {type(X).__name__}")
        self._validate()
        self.model_ = X
        return self

    def transform(self, X, gt=None):
        """Reconstruct k-space ``X``; ``gt`` only feeds the NMSE column of the trace."""
        check_is_fitted(self, "model_")
        z, self.trace_ = self._reconstruct(X, gt)
        return z

    def score(self, X, y):
        """Negative NMSE of the reconstruction of ``X`` against ground truth ``y``."""
        return -nmse(self.transform(X), y)

    def _validate(self):
        pass


class ZeroFilledRecon(_Reconstructor):
    def _reconstruct(self, y, gt):
        return recon_zero_filled(y, self.model_), None


class SenseRecon(_Reconstructor):
    def __init__(self, tol=1e-6, maxiter=50):
        self.tol = tol
        self.maxiter = maxiter

    def _reconstruct(self, y, gt):
        return recon_sense(y, self.model_, tol=self.tol, maxiter=self.maxiter), None


class CSRecon(_Reconstructor):
    """l1 compressed sensing with ``sparsifier`` in {"haar", "fd"}."""

    def __init__(self, sparsifier="haar", alpha=1e-2, mu=0.01, T=20, K=10, beta=None, levels=None,
                 cg_tol=1e-6, cg_maxiter=50):
        self.sparsifier = sparsifier
        self.alpha = alpha
        self.mu = mu
        self.T = T
        self.K = K
        self.beta = beta
        self.levels = levels
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter

    def _validate(self):
        if self.sparsifier not in ("haar", "fd"):
            raise ValueError(f"unknown sparsifier {self.sparsifier!r}")

    def _reconstruct(self, y, gt):
        if self.sparsifier == "haar":
            levels = self.levels or max_haar_levels(self.model_.shape)
            t = HaarWavelet(levels)
        else:
            t = FiniteDifference()
        return recon_cs(y, self.model_, t, self.alpha, self.mu, self.T, K=self.K, beta=self.beta,
                        gt=gt, cg_tol=self.cg_tol, cg_maxiter=self.cg_maxiter, return_trace=True)


class PnPRecon(_Reconstructor):
    def __init__(self, net=None, mu=0.01, T=20, cg_tol=1e-6, cg_maxiter=50):
        self.net = net
        self.mu = mu
        self.T = T
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter

    def _validate(self):
        if self.net is None:
            raise ValueError("PnPRecon needs a network")

    def _reconstruct(self, y, gt):
        return recon_pnp(y, self.model_, self.net, self.mu, self.T, gt=gt, cg_tol=self.cg_tol,
                         cg_maxiter=self.cg_maxiter, return_trace=True)


class DaganRecon(_Reconstructor):
    def __init__(self, net=None):
        self.net = net

    def _validate(self):
        if self.net is None:
            raise ValueError("DaganRecon needs a network")

    def _reconstruct(self, y, gt):
        return recon_dagan_direct(y, self.model_, self.net), None


class AicsRecon(_Reconstructor):
    def __init__(self, net=None, alpha=1e-2, mu=0.01, T=20, cg_tol=1e-6, cg_maxiter=50):
        self.net = net
        self.alpha = alpha
        self.mu = mu
        self.T = T
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter

    def _validate(self):
        if self.net is None:
            raise ValueError("AicsRecon needs a network")

    def _reconstruct(self, y, gt):
        return recon_aics(y, self.model_, self.net, self.alpha, self.mu, self.T, gt=gt,
                          cg_tol=self.cg_tol, cg_maxiter=self.cg_maxiter, return_trace=True)


class DarcsRecon(_Reconstructor):
    """ADMM with learned residual transforms.

    ``schedule`` defaults to the two-stage default schedule; a non-None
    ``alpha`` overrides the weight of every stage, which is what a
    regularization sweep varies.
    """

    def __init__(self, transforms=(), schedule=None, alpha=None, keep_iterates=()):
        self.transforms = transforms
        self.schedule = schedule
        self.alpha = alpha
        self.keep_iterates = keep_iterates

    def _validate(self):
        if not self.transforms:
            raise ValueError("DarcsRecon needs at least one transform or network")
        self._schedule().check_transforms(len(self.transforms))

    def _schedule(self):
        sched = self.schedule if self.schedule is not None else default_schedule(len(self.transforms))
        if not isinstance(sched, ReconSchedule):
            sched = ReconSchedule(tuple(s if isinstance(s, Stage) else Stage(**s) for s in sched))
        return sched if self.alpha is None else sched.with_alpha(self.alpha)

    def _reconstruct(self, y, gt):
        return admm_darcs(y, self.model_, self._schedule(), list(self.transforms), gt=gt,
                          keep_iterates=self.keep_iterates)
