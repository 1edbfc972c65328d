"""Inference and reverse-mode products for small 3D convolutional de-aliasing nets.

A network is a chain of "same"-padded 3D convolutions on the two-channel
(real, imaginary) representation of a complex volume, optionally wrapped in a
global residual connection.  Weights are stored in the DWN1 binary format.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ConvLayer",
    "Network",
    "NetworkFormatError",
    "NetworkValidationError",
    "load_weights",
    "write_weights",
    "net_forward",
    "net_vjp",
    "branch_forward",
    "branch_vjp",
    "preactivations",
    "identity_network",
    "zero_residual_network",
    "gaussian_blur_network",
    "to_channels",
    "from_channels",
]

ACTIVATIONS = {"none": 0, "relu": 1, "leaky_relu": 2}
_ACT_NAMES = {v: k for k, v in ACTIVATIONS.items()}
DWN_MAGIC = b"DWN1"
DWN_VERSION = 1


class NetworkFormatError(ValueError):
    """Bad magic, version or activation code in a weight file."""


class NetworkValidationError(ValueError):
    """Structurally inconsistent network (channels, kernel sizes, values)."""


@dataclass
class ConvLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "none"
    slope: float = 0.0

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 5:
            raise NetworkValidationError(
                f"weights must be (out, in, kd, kh, kw), got shape {self.weights.shape}"
            )
        if any(k % 2 == 0 for k in self.weights.shape[2:]):
            raise NetworkValidationError(f"kernel dims must be odd, got {self.weights.shape[2:]}")
        if self.bias.shape != (self.weights.shape[0],):
            raise NetworkValidationError(
                f"bias length {self.bias.size} does not match {self.weights.shape[0]} output channels"
            )
        if self.activation not in ACTIVATIONS:
            raise NetworkValidationError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise NetworkValidationError("non-finite weights or bias")
        self.slope = float(self.slope)

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]


@dataclass
class Network:
    layers: list = field(default_factory=list)
    global_residual: bool = False

    def __post_init__(self):
        if not self.layers:
            raise NetworkValidationError("a network needs at least one layer")
        if self.layers[0].in_channels != 2:
            raise NetworkValidationError(
                f"first layer takes {self.layers[0].in_channels} channels, expected 2"
            )
        if self.layers[-1].out_channels != 2:
            raise NetworkValidationError(
                f"last layer produces {self.layers[-1].out_channels} channels, expected 2"
            )
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_channels != b.in_channels:
                raise NetworkValidationError(
                    f"layer {i} outputs {a.out_channels} channels but layer {i + 1} "
                    f"expects {b.in_channels}"
                )
        self.global_residual = bool(self.global_residual)


def to_channels(x):
    x = np.asarray(x)
    return np.stack([x.real, x.imag]).astype(np.float64)


def from_channels(c):
    return c[0] + 1j * c[1]


def _conv(x, w, b):
    """Zero-padded "same" cross-correlation; x is (C_in, D, H, W)."""
    _, d, h, wd = x.shape
    kd, kh, kw = w.shape[2:]
    pd, ph, pw = kd // 2, kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (pd, pd), (ph, ph), (pw, pw)))
    out = np.empty((w.shape[0], d, h, wd))
    out[:] = b[:, None, None, None]
    for a in range(kd):
        for c in range(kh):
            for e in range(kw):
                out += np.tensordot(w[:, :, a, c, e], xp[:, a:a + d, c:c + h, e:e + wd], axes=1)
    return out


def _conv_adjoint(g, w):
    """Transpose of ``_conv`` (without bias) applied to ``g`` of shape (C_out, D, H, W)."""
    _, d, h, wd = g.shape
    kd, kh, kw = w.shape[2:]
    pd, ph, pw = kd // 2, kh // 2, kw // 2
    gp = np.zeros((w.shape[1], d + 2 * pd, h + 2 * ph, wd + 2 * pw))
    for a in range(kd):
        for c in range(kh):
            for e in range(kw):
                gp[:, a:a + d, c:c + h, e:e + wd] += np.tensordot(w[:, :, a, c, e].T, g, axes=1)
    return gp[:, pd:pd + d, ph:ph + h, pw:pw + wd]


def _activate(layer, pre):
    if layer.activation == "relu":
        return np.maximum(pre, 0.0)
    if layer.activation == "leaky_relu":
        return np.where(pre > 0, pre, layer.slope * pre)
    return pre


def _activation_grad(layer, pre):
    # derivative at exactly 0 is taken as 0 for relu and as the slope for leaky
    if layer.activation == "relu":
        return (pre > 0).astype(np.float64)
    if layer.activation == "leaky_relu":
        return np.where(pre > 0, 1.0, layer.slope)
    return None


def _run(net, x, keep=False):
    h = to_channels(x)
    pres = []
    for layer in net.layers:
        pre = _conv(h, layer.weights, layer.bias)
        if keep:
            pres.append(pre)
        h = _activate(layer, pre)
    return h, pres


def preactivations(net, x):
    """Per-layer inputs to the activation functions, as real (C, D, H, W) arrays."""
    return _run(net, np.asarray(x, dtype=np.complex128), keep=True)[1]


def branch_forward(net, x):
    """Output of the layer chain before the global residual is added."""
    out, _ = _run(net, x)
    return from_channels(out)


def net_forward(net, x):
    """Evaluate ``G(x)`` on a complex volume of shape (nz, ny, nx)."""
    x = np.asarray(x, dtype=np.complex128)
    out = branch_forward(net, x)
    return out + x if net.global_residual else out


def branch_vjp(net, x, v):
    """Vector-Jacobian product of the layer chain alone at ``x``.

    Complex volumes are treated as pairs of real channels, so the result ``w``
    satisfies ``Re vdot(J e, v) == Re vdot(e, w)`` for every direction ``e``.
    """
    x = np.asarray(x, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if x.shape != v.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {v.shape}")
    _, pres = _run(net, x, keep=True)
    g = to_channels(v)
    for layer, pre in zip(reversed(net.layers), reversed(pres)):
        dact = _activation_grad(layer, pre)
        if dact is not None:
            g = g * dact
        g = _conv_adjoint(g, layer.weights)
    return from_channels(g)


def net_vjp(net, x, v):
    """``J^T v`` for the full network, including the identity path of the residual."""
    w = branch_vjp(net, x, v)
    return w + np.asarray(v, dtype=np.complex128) if net.global_residual else w


_NET_HEAD = struct.Struct("<4sIBI")
_LAYER_HEAD = struct.Struct("<Bf5I")


def write_weights(path, net):
    with open(path, "wb") as fh:
        fh.write(_NET_HEAD.pack(DWN_MAGIC, DWN_VERSION, int(net.global_residual), len(net.layers)))
        for layer in net.layers:
            fh.write(_LAYER_HEAD.pack(ACTIVATIONS[layer.activation], layer.slope, *layer.weights.shape))
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def load_weights(path):
    """Parse and validate a DWN1 weight file."""
    raw = Path(path).read_bytes()
    if len(raw) < _NET_HEAD.size:
        raise OSError(f"{path}: truncated weight file")
    magic, version, residual, n_layers = _NET_HEAD.unpack_from(raw)
    if magic != DWN_MAGIC:
        raise NetworkFormatError(f"{path}: bad magic {magic!r}")
    if version != DWN_VERSION:
        raise NetworkFormatError(f"{path}: unsupported version {version}")
    pos = _NET_HEAD.size
    layers = []
    for i in range(n_layers):
        if len(raw) < pos + _LAYER_HEAD.size:
            raise OSError(f"{path}: truncated header of layer {i}")
        act, slope, *shape = _LAYER_HEAD.unpack_from(raw, pos)
        pos += _LAYER_HEAD.size
        if act not in _ACT_NAMES:
            raise NetworkFormatError(f"{path}: layer {i} has unknown activation code {act}")
        n_w = int(np.prod(shape))
        n_bytes = 4 * (n_w + shape[0])
        if len(raw) < pos + n_bytes:
            raise OSError(f"{path}: truncated data of layer {i}")
        w = np.frombuffer(raw, dtype="<f4", count=n_w, offset=pos).reshape(shape)
        b = np.frombuffer(raw, dtype="<f4", count=shape[0], offset=pos + 4 * n_w)
        pos += n_bytes
        layers.append(ConvLayer(w, b, _ACT_NAMES[act], slope))
    if pos != len(raw):
        raise NetworkFormatError(f"{path}: {len(raw) - pos} trailing bytes")
    return Network(layers, bool(residual))


def _channel_diagonal(kernel):
    kernel = np.asarray(kernel, dtype=np.float64)
    w = np.zeros((2, 2) + kernel.shape)
    w[0, 0] = kernel
    w[1, 1] = kernel
    return w


def identity_network(size=1):
    """Single layer whose kernel is a centered delta on each channel."""
    k = np.zeros((size,) * 3)
    k[(size // 2,) * 3] = 1.0
    return Network([ConvLayer(_channel_diagonal(k), np.zeros(2))], global_residual=False)


def zero_residual_network(size=3):
    """All-zero weights with a global residual, so ``G(x) = x``."""
    return Network([ConvLayer(np.zeros((2, 2) + (size,) * 3), np.zeros(2))], global_residual=True)


def gaussian_blur_network(sigma=1.0, size=3):
    """Residual net whose output is a normalized Gaussian blur of the input.

    The chain holds ``blur - delta`` so the pre-residual output is the
    (high-pass) artifact estimate ``G(x) - x``.
    """
    r = np.arange(size) - size // 2
    g1 = np.exp(-0.5 * (r / sigma) ** 2)
    k = g1[:, None, None] * g1[None, :, None] * g1[None, None, :]
    k /= k.sum()
    k[(size // 2,) * 3] -= 1.0
    return Network([ConvLayer(_channel_diagonal(k), np.zeros(2))], global_residual=True)
