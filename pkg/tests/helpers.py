"""Shared test helpers: the oracle transform, random nets, dense operators."""

import numpy as np

from darcs.network import ConvLayer, Network
from darcs.transforms import SparsifyingTransform


class OracleTransform(SparsifyingTransform):
    """Test-only transform ``t(z) = z - gt``; its pullback is the identity."""

    def __init__(self, gt):
        self.gt = gt

    def forward(self, x):
        return x - self.gt

    def pullback(self, x, v):
        return np.array(v, dtype=np.complex128)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_network(rng, n_layers, hidden=4, kernel=3, activation="leaky_relu", slope=0.2,
                   residual=False, scale=0.3):
    chans = [2] + [hidden] * (n_layers - 1) + [2]
    layers = []
    for i in range(n_layers):
        w = scale * rng.standard_normal((chans[i + 1], chans[i]) + (kernel,) * 3)
        b = 0.1 * rng.standard_normal(chans[i + 1])
        act = activation if i < n_layers - 1 else "none"
        layers.append(ConvLayer(w, b, act, slope))
    return Network(layers, residual)


def dense_matrix(op, shape, dtype=np.complex128):
    """Materialize a linear operator acting on arrays of ``shape``."""
    n = int(np.prod(shape))
    cols = []
    for i in range(n):
        e = np.zeros(n, dtype=dtype)
        e[i] = 1
        cols.append(np.asarray(op(e.reshape(shape))).ravel())
    return np.stack(cols, axis=1)


# criterion number -> (passed, detail); filled by the acceptance suite and
# printed in the terminal summary
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
