"""Command-line entry point: dataset generation, training, inspection,
memory reporting, and single-sinogram reconstruction.

Exit codes: 0 success, 1 usage/config error, 2 I/O or file-format error,
3 numeric failure.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_run_config
from .errors import ConfigError, FormatError
from .network import init_network_params, network_forward
from .phantoms import build_dataset, read_dataset, sinogram_rms, write_dataset
from .pngio import write_gray_png
from .projector import build_system_matrix
from .training import Checkpoint, load_checkpoint, train
from .weight_maps import (
    DETECTOR_SERIES_COLS,
    VIEW_SERIES_COLS,
    WeightMap,
    analytic_detector_series,
    analytic_view_series,
    compare,
    comparison_summary,
    fixed_detector_series,
    fixed_view_series,
    memory_report,
    shuffled_baseline,
    write_comparison_report,
    write_montage_png,
)

# Beyond this the dense layer no longer fits typical accelerator memory.
_FEASIBLE_BYTES = 8 * 1024**3


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def cmd_gen_data(args) -> int:
    cfg = load_run_config(args.config)
    sm = build_system_matrix(cfg.geometry)
    train_ds = build_dataset(cfg.phantoms.n_train, cfg.phantoms.seed, cfg.geometry, sm)
    write_dataset(cfg.output.train_dataset, train_ds)
    print(
        f"wrote {len(train_ds)} items to {cfg.output.train_dataset} "
        f"sha256={_sha256(cfg.output.train_dataset)}"
    )
    if cfg.phantoms.n_val > 0:
        val_ds = build_dataset(
            cfg.phantoms.n_val, cfg.phantoms.seed + 1, cfg.geometry, sm
        )
        write_dataset(cfg.output.val_dataset, val_ds)
        print(
            f"wrote {len(val_ds)} items to {cfg.output.val_dataset} "
            f"sha256={_sha256(cfg.output.val_dataset)}"
        )
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    dataset = read_dataset(cfg.output.train_dataset)
    if dataset.geometry != cfg.geometry:
        raise ConfigError(
            f"dataset geometry {dataset.geometry} does not match config geometry"
        )
    start_epoch = 0
    state = None
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        params = ckpt.params
        state = ckpt.state
        if ckpt.epochs_completed is None:
            raise ConfigError("checkpoint lacks epoch progress; cannot resume")
        if ckpt.geom is not None and ckpt.geom != cfg.geometry:
            raise ConfigError("checkpoint geometry does not match config geometry")
        start_epoch = ckpt.epochs_completed
        print(f"resuming from {args.resume} at epoch {start_epoch}")
    else:
        # Near-zero dense init: scaling the bound far below the input RMS
        # means the trained weight maps carry learned structure rather than
        # leftover init noise.
        scale = 1000.0 * max(sinogram_rms(dataset), 1e-6)
        params = init_network_params(
            cfg.geometry, seed=cfg.train.seed, fc_input_scale=scale
        )
        # Metrics are appended during resumes; a fresh run starts a fresh log.
        metrics = Path(cfg.output.metrics)
        if metrics.exists():
            metrics.unlink()
    result = train(
        cfg.train,
        dataset,
        params,
        state=state,
        start_epoch=start_epoch,
        geom=cfg.geometry,
        checkpoint_dir=cfg.output.checkpoint_dir,
        metrics_path=cfg.output.metrics,
    )
    first = result.history[0]["mean_loss"] if result.history else float("nan")
    last = result.history[-1]["mean_loss"] if result.history else float("nan")
    print(
        f"trained {len(result.history)} epochs: first mean loss {first:.6g}, "
        f"final mean loss {last:.6g}"
    )
    print(f"final checkpoint: {Path(cfg.output.checkpoint_dir) / 'final.ckpt'}")
    return 0


def _load_checkpoint_with_geom(path) -> Checkpoint:
    ckpt = load_checkpoint(path)
    if ckpt.geom is None:
        raise FormatError(
            "checkpoint has no geometry block; re-train or pass a checkpoint "
            "written by 'fcbp train'"
        )
    return ckpt


def cmd_inspect(args) -> int:
    ckpt = _load_checkpoint_with_geom(args.checkpoint)
    geom = ckpt.geom
    sm = build_system_matrix(geom)
    weights = ckpt.params.fc_weights
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.detector is not None:
        tag = f"fixed_detector_{args.detector:03d}"
        learned = fixed_detector_series(weights, args.detector, geom)
        analytic = analytic_detector_series(sm, args.detector)
        cols = VIEW_SERIES_COLS
    else:
        tag = f"fixed_view_{args.view:03d}"
        learned = fixed_view_series(weights, args.view, geom)
        analytic = analytic_view_series(sm, args.view)
        cols = DETECTOR_SERIES_COLS
    write_montage_png(out_dir / f"learned_{tag}.png", learned, cols)
    write_montage_png(out_dir / f"analytic_{tag}.png", analytic, cols)
    comparisons = [compare(lw, aw) for lw, aw in zip(learned, analytic)]
    write_comparison_report(out_dir / f"comparison_{tag}.jsonl", comparisons)
    baseline = shuffled_baseline(weights, sm, seed=0)
    summary = comparison_summary(comparisons, baseline=baseline)
    with open(out_dir / f"summary_{tag}.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(
        f"{tag}: {len(learned)} maps, mean |NCC| {summary['mean_abs_ncc']:.4f} "
        f"(shuffled baseline {baseline:.4f}), outputs in {out_dir}"
    )
    return 0


def cmd_memory_report(args) -> int:
    try:
        report = memory_report(args.image_side, args.n_views, args.n_detectors, args.bytes_per_weight)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(
        f"{report.n_weights} weights ({report.human_weights}), "
        f"{report.n_bytes} bytes ({report.human_bytes})"
    )
    if report.n_bytes > _FEASIBLE_BYTES:
        print("infeasible: dense-layer storage exceeds single-accelerator memory")
    return 0


def _load_input_sinogram(spec: str, geom):
    """'path:idx' selects a dataset item (with label); a bare path is a raw
    little-endian float32 sinogram dump."""
    path, sep, idx = spec.rpartition(":")
    if sep and idx.isdigit():
        ds = read_dataset(path)
        if ds.geometry != geom:
            raise ConfigError(
                f"dataset geometry does not match checkpoint geometry "
                f"(expected {geom.sinogram_shape} sinograms)"
            )
        i = int(idx)
        if i >= len(ds):
            raise ConfigError(f"dataset index {i} out of range 0..{len(ds) - 1}")
        return np.asarray(ds.sinograms[i]), np.asarray(ds.images[i])
    raw = np.fromfile(spec, dtype="<f4")
    if raw.size != geom.sinogram_len:
        raise ConfigError(
            f"raw sinogram has {raw.size} floats, expected "
            f"{geom.sinogram_len} ({geom.n_views}x{geom.n_detectors})"
        )
    return raw.reshape(geom.sinogram_shape), None


def _to_gray(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(values.shape, 128, dtype=np.uint8)
    return np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)


def cmd_reconstruct(args) -> int:
    ckpt = _load_checkpoint_with_geom(args.checkpoint)
    geom = ckpt.geom
    sino, label = _load_input_sinogram(args.input, geom)
    output, fc_map = network_forward(ckpt.params, sino, return_fc_map=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_gray_png(out_dir / "output.png", _to_gray(output))
    write_gray_png(out_dir / "fc1_out.png", _to_gray(fc_map))
    output.astype("<f4").tofile(out_dir / "output.f32")
    fc_map.astype("<f4").tofile(out_dir / "fc1_out.f32")
    print(f"reconstruction written to {out_dir} (output + fc1_out, png + f32)")
    if label is not None:
        a = output.astype(np.float64).ravel()
        b = label.astype(np.float64).ravel()
        if a.std() > 0 and b.std() > 0:
            ncc = float(np.mean((a - a.mean()) * (b - b.mean())) / (a.std() * b.std()))
            print(f"NCC vs dataset label: {ncc:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcbp",
        description=(
            "Fan-beam CT lab: simulate projections, train the dense "
            "sinogram-to-image network, and inspect its weight maps. "
            "Set FCBP_THREADS to cap worker threads."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate phantom datasets from a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the network per a config")
    p.add_argument("config")
    p.add_argument("--resume", help="checkpoint to continue from", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inspect", help="render learned vs analytic weight maps")
    p.add_argument("--checkpoint", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--detector", type=int, help="fixed detector index (1-based)")
    group.add_argument("--view", type=int, help="fixed view index (1-based)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("memory-report", help="dense-layer weight storage budget")
    p.add_argument("image_side", type=int)
    p.add_argument("n_views", type=int)
    p.add_argument("n_detectors", type=int)
    p.add_argument("bytes_per_weight", type=int)
    p.set_defaults(func=cmd_memory_report)

    p = sub.add_parser("reconstruct", help="run one sinogram through a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="dataset.fcbp:IDX or raw .f32 file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reconstruct)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
