"""Adam optimizer, staircase learning-rate decay, training loop, checkpoints.

The learning rate starts at ``base_lr`` and is multiplied by
``decay_factor`` after every ``decay_every_steps`` optimizer updates
(a staircase, not a per-step exponent). A "step" is one mini-batch update.
Each epoch shuffles the dataset with an RNG derived from (seed, epoch), so
a run resumed from an epoch-boundary checkpoint reproduces the
uninterrupted run exactly.
"""

import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .geometry import GEOMETRY_FIELDS, GEOMETRY_INT_FIELDS, FanBeamGeometry
from .network import (
    Gradients,
    NetworkParams,
    named_tensors,
    network_backward,
)
from .phantoms import Dataset

_CK_MAGIC = b"FCBPCK"
_CK_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


@dataclass
class TrainConfig:
    base_lr: float = 1e-5
    decay_factor: float = 0.96
    decay_every_steps: int = 1000
    batch_size: int = 60
    epochs: int = 200
    shuffle: bool = True
    seed: int = 0
    dataset_path: str | None = None
    checkpoint_dir: str | None = None
    checkpoint_every_epochs: int = 0  # 0 = final checkpoint only


def validate_config(config: TrainConfig) -> None:
    if not config.base_lr > 0:
        raise ConfigError("base_lr must be > 0")
    if not 0 < config.decay_factor <= 1:
        raise ConfigError("decay_factor must be in (0, 1]")
    if config.decay_every_steps < 1:
        raise ConfigError("decay_every_steps must be >= 1")
    if config.batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if config.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if config.checkpoint_every_epochs < 0:
        raise ConfigError("checkpoint_every_epochs must be >= 0")
    if config.seed < 0:
        raise ConfigError("seed must be >= 0")


def lr_at(config: TrainConfig, step: int) -> float:
    """Learning rate for the 0-based optimizer step (staircase decay)."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return config.base_lr * config.decay_factor ** (step // config.decay_every_steps)


@dataclass
class AdamState:
    """First/second moment accumulators, keyed like ``named_tensors``."""

    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam_state(params: NetworkParams) -> AdamState:
    tensors = named_tensors(params)
    return AdamState(
        m={k: np.zeros_like(t) for k, t in tensors.items()},
        v={k: np.zeros_like(t) for k, t in tensors.items()},
    )


def adam_step_tensors(state: AdamState, params: dict, grads: dict, lr: float):
    """One Adam update over name-keyed tensor dicts (arrays updated in place)."""
    if lr <= 0:
        raise ValueError("lr must be > 0")
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ValueError("params, grads, and state tensors must share names")
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    state.step = t
    return state, params


def adam_step(state: AdamState, params: NetworkParams, grads: Gradients, lr: float):
    """One Adam update over a full parameter set; returns (state, params)."""
    adam_step_tensors(state, named_tensors(params), named_tensors(grads), lr)
    return state, params


@dataclass
class TrainResult:
    params: NetworkParams
    state: AdamState
    history: list = field(default_factory=list)  # one dict per epoch


def _epoch_order(config: TrainConfig, epoch: int, n: int) -> np.ndarray:
    if not config.shuffle:
        return np.arange(n)
    rng = np.random.default_rng([config.seed, epoch])
    return rng.permutation(n)


def train(
    config: TrainConfig,
    dataset: Dataset,
    params: NetworkParams,
    state: AdamState | None = None,
    start_epoch: int = 0,
    geom: FanBeamGeometry | None = None,
    checkpoint_dir=None,
    metrics_path=None,
) -> TrainResult:
    """Run the mini-batch loop; deterministic given (config, dataset, params).

    Per epoch: shuffle, split into full batches (the final partial batch is
    dropped), and for each batch apply one Adam update at the staircase
    learning rate of the current global step. Mean per-epoch loss is
    recorded; checkpoints are written every ``checkpoint_every_epochs``
    epochs (and always at the end) when a checkpoint directory is given.
    """
    validate_config(config)
    n = len(dataset)
    if n < 1:
        raise ConfigError("dataset is empty")
    if config.batch_size > n:
        raise ConfigError(f"batch_size {config.batch_size} exceeds dataset size {n}")
    geom = geom or dataset.geometry
    if tuple(params.sino_shape) != geom.sinogram_shape:
        raise ConfigError(
            f"params sinogram shape {params.sino_shape} != {geom.sinogram_shape}"
        )

    sinos = np.stack([np.asarray(s, dtype=params.dtype) for s in dataset.sinograms])
    targets = np.stack([np.asarray(i, dtype=params.dtype) for i in dataset.images])

    state = state or init_adam_state(params)
    checkpoint_dir = checkpoint_dir or config.checkpoint_dir
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    n_batches = n // config.batch_size
    history = []
    metrics_fh = open(metrics_path, "a") if metrics_path else None
    try:
        for epoch in range(start_epoch, config.epochs):
            tic = time.perf_counter()
            order = _epoch_order(config, epoch, n)
            losses = []
            lr = lr_at(config, state.step)
            for batch in range(n_batches):
                idx = order[batch * config.batch_size : (batch + 1) * config.batch_size]
                loss, grads = network_backward(params, sinos[idx], targets[idx])
                lr = lr_at(config, state.step)
                adam_step(state, params, grads, lr)
                losses.append(loss)
            record = {
                "epoch": epoch + 1,
                "mean_loss": float(np.mean(losses)),
                "lr": lr,
                "wall_seconds": time.perf_counter() - tic,
            }
            history.append(record)
            if metrics_fh:
                metrics_fh.write(json.dumps(record) + "\n")
                metrics_fh.flush()
            if (
                checkpoint_dir is not None
                and config.checkpoint_every_epochs
                and (epoch + 1) % config.checkpoint_every_epochs == 0
            ):
                save_checkpoint(
                    checkpoint_dir / f"epoch_{epoch + 1:05d}.ckpt",
                    params,
                    state,
                    state.step,
                    geom=geom,
                    epochs_completed=epoch + 1,
                )
    finally:
        if metrics_fh:
            metrics_fh.close()
    if checkpoint_dir is not None:
        save_checkpoint(
            checkpoint_dir / "final.ckpt",
            params,
            state,
            state.step,
            geom=geom,
            epochs_completed=config.epochs,
        )
    return TrainResult(params=params, state=state, history=history)


# ---------------------------------------------------------------------------
# Checkpoint file format: magic, u32 version, u64 global step, then named
# tensors until EOF. Each tensor: u16 name length + name bytes + u8 ndim +
# u32 dims + u8 dtype code (0 = f32, 1 = f64) + little-endian payload.
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    params: NetworkParams
    state: AdamState
    step: int
    geom: FanBeamGeometry | None = None
    epochs_completed: int | None = None


def _write_tensor(fh, name: str, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    code = _DTYPE_CODES.get(arr.dtype)
    if code is None:
        raise ValueError(f"unsupported checkpoint dtype {arr.dtype} for {name}")
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(struct.pack("<B", code))
    fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def save_checkpoint(
    path,
    params: NetworkParams,
    state: AdamState,
    step: int,
    geom: FanBeamGeometry | None = None,
    epochs_completed: int | None = None,
) -> None:
    """Serialize params plus Adam moments (and optional geometry metadata)."""
    with open(path, "wb") as fh:
        fh.write(_CK_MAGIC)
        fh.write(struct.pack("<IQ", _CK_VERSION, int(step)))
        shapes = np.array(
            list(params.sino_shape) + list(params.image_shape), dtype=np.float64
        )
        _write_tensor(fh, "meta/shapes", shapes)
        if geom is not None:
            gvals = np.array(
                [float(getattr(geom, f)) for f in GEOMETRY_FIELDS], dtype=np.float64
            )
            _write_tensor(fh, "meta/geometry", gvals)
        if epochs_completed is not None:
            _write_tensor(
                fh, "meta/epochs_completed", np.array([epochs_completed], np.float64)
            )
        for name, tensor in named_tensors(params).items():
            _write_tensor(fh, f"params/{name}", tensor)
        for name, tensor in state.m.items():
            _write_tensor(fh, f"adam_m/{name}", tensor)
        for name, tensor in state.v.items():
            _write_tensor(fh, f"adam_v/{name}", tensor)


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated checkpoint while reading {what}")
    return buf


def _read_tensors(fh) -> dict:
    tensors = {}
    while True:
        head = fh.read(2)
        if not head:
            return tensors
        if len(head) != 2:
            raise FormatError("truncated checkpoint while reading tensor header")
        (name_len,) = struct.unpack("<H", head)
        name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(fh, 1, f"ndim of '{name}'"))
        dims = [
            struct.unpack("<I", _read_exact(fh, 4, f"dims of '{name}'"))[0]
            for _ in range(ndim)
        ]
        (code,) = struct.unpack("<B", _read_exact(fh, 1, f"dtype of '{name}'"))
        dtype = _CODE_DTYPES.get(code)
        if dtype is None:
            raise FormatError(f"unknown dtype code {code} for tensor '{name}'")
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise FormatError(f"truncated payload for tensor '{name}'")
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def load_checkpoint(path) -> Checkpoint:
    """Exact inverse of :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CK_MAGIC))
        if magic != _CK_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}, expected {_CK_MAGIC!r}")
        version, step = struct.unpack("<IQ", _read_exact(fh, 12, "header"))
        if version != _CK_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        tensors = _read_tensors(fh)

    if "meta/shapes" not in tensors:
        raise FormatError("checkpoint is missing tensor 'meta/shapes'")
    shp = tensors.pop("meta/shapes")
    if shp.shape != (4,):
        raise FormatError("tensor 'meta/shapes' must hold 4 values")
    sino_shape = (int(shp[0]), int(shp[1]))
    image_shape = (int(shp[2]), int(shp[3]))

    geom = None
    if "meta/geometry" in tensors:
        gvals = tensors.pop("meta/geometry")
        if gvals.shape != (len(GEOMETRY_FIELDS),):
            raise FormatError("tensor 'meta/geometry' has the wrong length")
        kwargs = {}
        for fname, value in zip(GEOMETRY_FIELDS, gvals):
            kwargs[fname] = int(value) if fname in GEOMETRY_INT_FIELDS else float(value)
        geom = FanBeamGeometry(**kwargs)

    epochs_completed = None
    if "meta/epochs_completed" in tensors:
        epochs_completed = int(tensors.pop("meta/epochs_completed")[0])

    groups = {"params": {}, "adam_m": {}, "adam_v": {}}
    for name, tensor in tensors.items():
        prefix, _, remainder = name.partition("/")
        if prefix not in groups or not remainder:
            raise FormatError(f"unexpected tensor '{name}' in checkpoint")
        groups[prefix][remainder] = tensor

    p = groups["params"]
    for required in ("fc_weights", "fc_bias"):
        if required not in p:
            raise FormatError(f"checkpoint is missing tensor 'params/{required}'")
    conv_ids = sorted(
        int(k[len("conv") : -len("_kernels")])
        for k in p
        if k.startswith("conv") and k.endswith("_kernels")
    )
    if conv_ids != list(range(len(conv_ids))):
        raise FormatError("checkpoint conv layers are not contiguous")
    missing_bias = [i for i in conv_ids if f"conv{i}_bias" not in p]
    if missing_bias:
        raise FormatError(f"checkpoint is missing bias for conv layers {missing_bias}")
    params = NetworkParams(
        sino_shape=sino_shape,
        image_shape=image_shape,
        fc_weights=p["fc_weights"],
        fc_bias=p["fc_bias"],
        conv_kernels=[p[f"conv{i}_kernels"] for i in conv_ids],
        conv_biases=[p[f"conv{i}_bias"] for i in conv_ids],
    )
    expected = set(named_tensors(params))
    for group_name in ("adam_m", "adam_v"):
        have = set(groups[group_name])
        if have != expected:
            missing = sorted(expected - have) + sorted(have - expected)
            raise FormatError(
                f"checkpoint group '{group_name}' does not match params: {missing}"
            )
    state = AdamState(m=groups["adam_m"], v=groups["adam_v"], step=int(step))
    return Checkpoint(
        params=params,
        state=state,
        step=int(step),
        geom=geom,
        epochs_completed=epochs_completed,
    )
