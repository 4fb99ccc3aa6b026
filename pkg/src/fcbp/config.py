"""JSON run configuration: strict parsing with unknown-key rejection."""

import json
from dataclasses import dataclass

from .errors import ConfigError
from .geometry import GEOMETRY_FIELDS, GEOMETRY_INT_FIELDS, FanBeamGeometry, validate
from .training import TrainConfig, validate_config

_PHANTOM_KEYS = {"n_train", "n_val", "seed"}
_TRAIN_KEYS = {
    "base_lr",
    "decay_factor",
    "decay_every_steps",
    "batch_size",
    "epochs",
    "shuffle",
    "seed",
    "checkpoint_every_epochs",
}
_OUTPUT_KEYS = {"train_dataset", "val_dataset", "checkpoint_dir", "metrics"}
_TOP_KEYS = {"geometry", "phantoms", "train", "output"}


@dataclass
class PhantomConfig:
    n_train: int = 200
    n_val: int = 20
    seed: int = 0


@dataclass
class OutputPaths:
    train_dataset: str = "train_dataset.fcbp"
    val_dataset: str = "val_dataset.fcbp"
    checkpoint_dir: str = "checkpoints"
    metrics: str = "metrics.jsonl"


@dataclass
class RunConfig:
    geometry: FanBeamGeometry
    phantoms: PhantomConfig
    train: TrainConfig
    output: OutputPaths


def _require_keys(block: dict, allowed: set, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"'{where}' must be a JSON object")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in '{where}'")


def parse_run_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require_keys(doc, _TOP_KEYS, "config")

    geo_block = doc.get("geometry", {})
    _require_keys(geo_block, set(GEOMETRY_FIELDS), "geometry")
    kwargs = {}
    for name, value in geo_block.items():
        kwargs[name] = int(value) if name in GEOMETRY_INT_FIELDS else float(value)
    geom = FanBeamGeometry(**kwargs)
    violations = validate(geom)
    if violations:
        raise ConfigError("geometry invalid: " + ", ".join(violations))

    ph_block = doc.get("phantoms", {})
    _require_keys(ph_block, _PHANTOM_KEYS, "phantoms")
    phantoms = PhantomConfig(**{k: int(v) for k, v in ph_block.items()})
    if phantoms.n_train < 1 or phantoms.n_val < 0:
        raise ConfigError("phantoms require n_train >= 1 and n_val >= 0")

    tr_block = doc.get("train", {})
    _require_keys(tr_block, _TRAIN_KEYS, "train")
    coerce = {
        "base_lr": float,
        "decay_factor": float,
        "decay_every_steps": int,
        "batch_size": int,
        "epochs": int,
        "shuffle": bool,
        "seed": int,
        "checkpoint_every_epochs": int,
    }
    train = TrainConfig(**{k: coerce[k](v) for k, v in tr_block.items()})
    validate_config(train)

    out_block = doc.get("output", {})
    _require_keys(out_block, _OUTPUT_KEYS, "output")
    output = OutputPaths(**{k: str(v) for k, v in out_block.items()})
    paths = [output.train_dataset, output.val_dataset, output.checkpoint_dir, output.metrics]
    if len(set(paths)) != len(paths):
        raise ConfigError("output paths must be distinct")

    train.dataset_path = output.train_dataset
    train.checkpoint_dir = output.checkpoint_dir
    return RunConfig(geometry=geom, phantoms=phantoms, train=train, output=output)


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_run_config(text)
