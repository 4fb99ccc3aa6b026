"""The sinogram-to-image network and its hand-derived gradients.

Architecture: one dense layer mapping the flattened sinogram (P*Q) to the
flattened image (C*T), reshaped to the grid, followed by five 3x3 "same"
convolutions with channel chain 1 -> 128 -> 128 -> 128 -> 128 -> 1. Every
layer applies tanh. Loss is the mean squared error over all pixels of all
batch items.

Everything here is plain numpy; the backward pass is written out layer by
layer and is validated against central finite differences in the tests.
Convolutions run as nine shifted GEMMs, which keeps both directions exact
transposes of each other.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import FanBeamGeometry

DEFAULT_CONV_CHANNELS = (128, 128, 128, 128, 1)
_KSIZE = 3


@dataclass
class NetworkParams:
    """All trainable tensors plus the shapes needed to reshape between domains."""

    sino_shape: tuple  # (n_views, n_detectors)
    image_shape: tuple  # (rows, cols)
    fc_weights: np.ndarray  # (sino_len, image_len)
    fc_bias: np.ndarray  # (image_len,)
    conv_kernels: list  # each (3, 3, c_in, c_out)
    conv_biases: list  # each (c_out,)

    @property
    def dtype(self):
        return self.fc_weights.dtype

    @property
    def n_conv_layers(self) -> int:
        return len(self.conv_kernels)


@dataclass
class Gradients:
    """Shape-congruent mirror of :class:`NetworkParams`."""

    fc_weights: np.ndarray
    fc_bias: np.ndarray
    conv_kernels: list
    conv_biases: list


def named_tensors(obj) -> dict:
    """Flat name -> array view of a params or gradients object.

    The arrays are the object's own buffers, so in-place updates through
    this dict mutate the object. Names are stable across save/load.
    """
    out = {"fc_weights": obj.fc_weights, "fc_bias": obj.fc_bias}
    for idx, (kern, bias) in enumerate(zip(obj.conv_kernels, obj.conv_biases)):
        out[f"conv{idx}_kernels"] = kern
        out[f"conv{idx}_bias"] = bias
    return out


def init_network_params(
    geom: FanBeamGeometry,
    conv_channels=DEFAULT_CONV_CHANNELS,
    seed: int = 0,
    dtype=np.float32,
    fc_input_scale: float = 1.0,
) -> NetworkParams:
    """Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.

    ``conv_channels`` lists the output channels of the five conv layers;
    the final layer must emit a single channel. ``fc_input_scale`` divides
    the dense-layer bound: Glorot assumes unit-variance inputs, but raw
    sinograms carry magnitudes of ~5-30, so passing their RMS keeps the
    first tanh out of saturation. The training pipeline passes the dataset
    sinogram RMS here; the default leaves the bound untouched.
    """
    conv_channels = tuple(int(c) for c in conv_channels)
    if len(conv_channels) != 5:
        raise ValueError(f"expected 5 conv layers, got {len(conv_channels)}")
    if conv_channels[-1] != 1:
        raise ValueError("final conv layer must have exactly 1 filter")
    if any(c < 1 for c in conv_channels):
        raise ValueError("conv channel counts must be >= 1")
    if not fc_input_scale > 0:
        raise ValueError("fc_input_scale must be > 0")

    rng = np.random.default_rng(seed)
    in_len = geom.sinogram_len
    out_len = geom.image_len

    def glorot(shape, fan_in, fan_out, scale=1.0):
        bound = np.sqrt(6.0 / (fan_in + fan_out)) / scale
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    fc_weights = glorot((in_len, out_len), in_len, out_len, scale=fc_input_scale)
    fc_bias = np.zeros(out_len, dtype=dtype)
    kernels = []
    biases = []
    c_in = 1
    for c_out in conv_channels:
        kernels.append(
            glorot(
                (_KSIZE, _KSIZE, c_in, c_out),
                _KSIZE * _KSIZE * c_in,
                _KSIZE * _KSIZE * c_out,
            )
        )
        biases.append(np.zeros(c_out, dtype=dtype))
        c_in = c_out
    return NetworkParams(
        sino_shape=geom.sinogram_shape,
        image_shape=geom.image_shape,
        fc_weights=fc_weights,
        fc_bias=fc_bias,
        conv_kernels=kernels,
        conv_biases=biases,
    )


def zero_gradients(params: NetworkParams) -> Gradients:
    return Gradients(
        fc_weights=np.zeros_like(params.fc_weights),
        fc_bias=np.zeros_like(params.fc_bias),
        conv_kernels=[np.zeros_like(k) for k in params.conv_kernels],
        conv_biases=[np.zeros_like(b) for b in params.conv_biases],
    )


def fc_forward(params: NetworkParams, sino_flat: np.ndarray) -> np.ndarray:
    """tanh(s @ W + bias) for a (batch, sino_len) input."""
    s = np.asarray(sino_flat, dtype=params.dtype)
    single = s.ndim == 1
    if single:
        s = s[None, :]
    if s.shape[1] != params.fc_weights.shape[0]:
        raise ValueError(
            f"sinogram length {s.shape[1]} != {params.fc_weights.shape[0]}"
        )
    v = np.tanh(s @ params.fc_weights + params.fc_bias)
    return v[0] if single else v


def conv2d_forward(kernels: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Zero-padded same 3x3 convolution, stride 1, then tanh.

    ``x`` has shape (batch, H, W, c_in); output (batch, H, W, c_out).
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"expected (batch, H, W, C) input, got ndim {x.ndim}")
    if x.shape[3] != kernels.shape[2]:
        raise ValueError(
            f"input channels {x.shape[3]} != kernel channels {kernels.shape[2]}"
        )
    return np.tanh(_conv_raw(kernels, bias, _pad(x), x.shape[1], x.shape[2]))


def _pad(x):
    n, h, w, c = x.shape
    out = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    out[:, 1:-1, 1:-1, :] = x
    return out


def _conv_raw(kernels, bias, padded, h, w):
    n = padded.shape[0]
    c_out = kernels.shape[3]
    z = np.empty((n, h, w, c_out), dtype=padded.dtype)
    z[:] = bias
    zf = z.reshape(-1, c_out)
    for di in range(_KSIZE):
        for dj in range(_KSIZE):
            patch = padded[:, di : di + h, dj : dj + w, :]
            zf += patch.reshape(-1, kernels.shape[2]) @ kernels[di, dj]
    return z


class _ForwardCache:
    __slots__ = ("sino_flat", "fc_out", "conv_inputs", "conv_outputs")

    def __init__(self, sino_flat, fc_out, conv_inputs, conv_outputs):
        self.sino_flat = sino_flat
        self.fc_out = fc_out
        self.conv_inputs = conv_inputs
        self.conv_outputs = conv_outputs


def _forward(params: NetworkParams, sino_batch: np.ndarray) -> _ForwardCache:
    rows, cols = params.image_shape
    s = sino_batch.reshape(sino_batch.shape[0], -1)
    v = fc_forward(params, s)
    x = v.reshape(-1, rows, cols, 1)
    inputs = []
    outputs = []
    for kern, bias in zip(params.conv_kernels, params.conv_biases):
        inputs.append(x)
        x = conv2d_forward(kern, bias, x)
        outputs.append(x)
    return _ForwardCache(s, v, inputs, outputs)


def _as_batch(params, sino):
    sino = np.asarray(sino, dtype=params.dtype)
    single = sino.ndim == 2
    if single:
        sino = sino[None]
    if sino.shape[1:] != tuple(params.sino_shape):
        raise ValueError(
            f"sinogram shape {sino.shape[1:]} != {tuple(params.sino_shape)}"
        )
    return sino, single


def network_forward(params: NetworkParams, sino_batch, return_fc_map: bool = False):
    """Map sinograms to images; batch (n, P, Q) or a single (P, Q).

    With ``return_fc_map`` the image-shaped dense-layer activation (the
    network's mid result) is returned alongside the output.
    """
    sino, single = _as_batch(params, sino_batch)
    cache = _forward(params, sino)
    rows, cols = params.image_shape
    out = cache.conv_outputs[-1][..., 0]
    fc_map = cache.fc_out.reshape(-1, rows, cols)
    if single:
        out, fc_map = out[0], fc_map[0]
    return (out, fc_map) if return_fc_map else out


def mse_loss(pred, target) -> float:
    """Mean over all batch items and pixels of the squared difference."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(diff * diff))


def network_backward(params: NetworkParams, sino_batch, target_batch):
    """Loss and exact analytic gradients of mse_loss(network_forward(...)).

    Returns ``(loss, Gradients)``. Gradients are computed layer by layer:
    through each tanh via (1 - y^2), through each convolution via the
    transposed nine-shift GEMMs, and through the dense layer via the
    outer product of input and output deltas.
    """
    sino, _ = _as_batch(params, sino_batch)
    target = np.asarray(target_batch, dtype=params.dtype)
    rows, cols = params.image_shape
    if target.ndim == 2:
        target = target[None]
    if target.shape != (sino.shape[0], rows, cols):
        raise ValueError(
            f"target shape {target.shape} != {(sino.shape[0], rows, cols)}"
        )

    cache = _forward(params, sino)
    pred = cache.conv_outputs[-1][..., 0]
    loss = mse_loss(pred, target)

    grads = zero_gradients(params)
    # d loss / d pred for the mean-over-everything squared error.
    g = (pred - target) * np.asarray(2.0 / pred.size, dtype=params.dtype)
    g = g[..., None]
    for idx in range(params.n_conv_layers - 1, -1, -1):
        y = cache.conv_outputs[idx]
        x_in = cache.conv_inputs[idx]
        dz = g * (1.0 - y * y)
        grads.conv_biases[idx][:] = dz.sum(axis=(0, 1, 2))
        padded = _pad(x_in)
        c_in = x_in.shape[3]
        c_out = dz.shape[3]
        dzf = dz.reshape(-1, c_out)
        dpad = np.zeros_like(padded)
        h, w = x_in.shape[1], x_in.shape[2]
        kern = params.conv_kernels[idx]
        for di in range(_KSIZE):
            for dj in range(_KSIZE):
                patch = padded[:, di : di + h, dj : dj + w, :]
                grads.conv_kernels[idx][di, dj] = patch.reshape(-1, c_in).T @ dzf
                dpad[:, di : di + h, dj : dj + w, :] += (dzf @ kern[di, dj].T).reshape(
                    x_in.shape
                )
        g = dpad[:, 1:-1, 1:-1, :]

    dv = g.reshape(g.shape[0], -1)
    v = cache.fc_out
    dz_fc = dv * (1.0 - v * v)
    grads.fc_weights[:] = cache.sino_flat.T @ dz_fc
    grads.fc_bias[:] = dz_fc.sum(axis=0)
    return loss, grads
