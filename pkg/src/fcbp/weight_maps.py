"""Dense-layer weight maps: extraction, comparison, montages, memory budget.

A weight map is the image-shaped slice of the dense weight matrix for one
fixed (view, detector) pair. Learned maps (from a trained network) are
compared against the rows of the analytic system matrix with normalized
cross-correlation; the sign-agnostic |NCC| is the headline number because
trained maps often come out with a global sign flip relative to the
analytic operator.
"""

import json
from dataclasses import dataclass

import numpy as np

from .geometry import FanBeamGeometry
from .index_map import sino_flat
from .pngio import write_gray_png
from .projector import SystemMatrix, analytic_weight_map

# Montage layout defaults: near-square grids for the two standard series.
VIEW_SERIES_COLS = 10
DETECTOR_SERIES_COLS = 16
_SEPARATOR = 255


@dataclass(frozen=True)
class WeightMap:
    source: str  # "learned" or "analytic"
    view: int  # l, 1-based
    detector: int  # b, 1-based
    values: np.ndarray  # image-shaped


@dataclass(frozen=True)
class MapComparison:
    view: int
    detector: int
    ncc: float  # nan when degenerate
    abs_ncc: float
    learned_l2: float
    analytic_l2: float
    degenerate: bool


def extract_fc_map(
    fc_weights: np.ndarray, l: int, b: int, geom: FanBeamGeometry
) -> WeightMap:
    """Image-shaped slice of W for 1-based (view l, detector b)."""
    fc_weights = np.asarray(fc_weights)
    expected = (geom.sinogram_len, geom.image_len)
    if fc_weights.shape != expected:
        raise ValueError(f"weight matrix shape {fc_weights.shape} != {expected}")
    i = sino_flat(l, b, geom)
    row = fc_weights[i - 1]
    # image_flat(a, k) is row-major over (a, k), so one reshape gives map[a, k].
    return WeightMap(
        source="learned", view=l, detector=b, values=row.reshape(geom.image_shape)
    )


def analytic_map(sm: SystemMatrix, l: int, b: int) -> WeightMap:
    """Analytic counterpart of :func:`extract_fc_map` from the system matrix."""
    return WeightMap(
        source="analytic", view=l, detector=b, values=analytic_weight_map(sm, l, b)
    )


def fixed_detector_series(
    fc_weights: np.ndarray, b: int, geom: FanBeamGeometry
) -> list[WeightMap]:
    """Maps for every view at a fixed detector (one montage tile per view)."""
    return [extract_fc_map(fc_weights, l, b, geom) for l in range(1, geom.n_views + 1)]


def fixed_view_series(
    fc_weights: np.ndarray, l: int, geom: FanBeamGeometry
) -> list[WeightMap]:
    """Maps for every detector at a fixed view."""
    return [
        extract_fc_map(fc_weights, l, b, geom) for b in range(1, geom.n_detectors + 1)
    ]


def analytic_detector_series(sm: SystemMatrix, b: int) -> list[WeightMap]:
    return [analytic_map(sm, l, b) for l in range(1, sm.geom.n_views + 1)]


def analytic_view_series(sm: SystemMatrix, l: int) -> list[WeightMap]:
    return [analytic_map(sm, l, b) for b in range(1, sm.geom.n_detectors + 1)]


def _ncc(u: np.ndarray, v: np.ndarray) -> float:
    u = u.astype(np.float64).ravel()
    v = v.astype(np.float64).ravel()
    su, sv = u.std(), v.std()
    if su == 0.0 or sv == 0.0:
        return float("nan")
    return float(np.mean((u - u.mean()) * (v - v.mean())) / (su * sv))


def compare(learned: WeightMap, analytic: WeightMap) -> MapComparison:
    """Pearson correlation of two maps for the same (view, detector) pair."""
    if (learned.view, learned.detector) != (analytic.view, analytic.detector):
        raise ValueError("maps must address the same (view, detector) pair")
    if learned.values.shape != analytic.values.shape:
        raise ValueError(
            f"map shape mismatch {learned.values.shape} vs {analytic.values.shape}"
        )
    ncc = _ncc(learned.values, analytic.values)
    degenerate = bool(np.isnan(ncc))
    return MapComparison(
        view=learned.view,
        detector=learned.detector,
        ncc=ncc,
        abs_ncc=abs(ncc) if not degenerate else float("nan"),
        learned_l2=float(np.linalg.norm(learned.values)),
        analytic_l2=float(np.linalg.norm(analytic.values)),
        degenerate=degenerate,
    )


def compare_all(fc_weights: np.ndarray, sm: SystemMatrix) -> list[MapComparison]:
    """Compare learned vs analytic maps at every (view, detector) pair."""
    geom = sm.geom
    out = []
    for l in range(1, geom.n_views + 1):
        for b in range(1, geom.n_detectors + 1):
            out.append(
                compare(extract_fc_map(fc_weights, l, b, geom), analytic_map(sm, l, b))
            )
    return out


def mean_abs_ncc(comparisons: list[MapComparison]) -> float:
    """Mean |NCC| over non-degenerate comparisons (nan when none qualify)."""
    vals = [c.abs_ncc for c in comparisons if not c.degenerate]
    return float(np.mean(vals)) if vals else float("nan")


def shuffled_baseline(
    fc_weights: np.ndarray, sm: SystemMatrix, seed: int = 0
) -> float:
    """Mean |NCC| of learned maps against randomly mismatched analytic maps.

    Pairs each (view, detector) with a permuted partner (never itself) and
    skips pairs whose analytic map is degenerate. This is the chance floor
    the real alignment must beat.
    """
    geom = sm.geom
    n = geom.sinogram_len
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fixed = np.flatnonzero(perm == np.arange(n))
    for f in fixed:  # displace fixed points so no map meets itself
        swap = (f + 1) % n
        perm[f], perm[swap] = perm[swap], perm[f]
    vals = []
    for row, partner in enumerate(perm):
        lp, bp = divmod(int(partner), geom.n_detectors)
        analytic = analytic_weight_map(sm, lp + 1, bp + 1)
        ncc = _ncc(np.asarray(fc_weights)[row], analytic)
        if not np.isnan(ncc):
            vals.append(abs(ncc))
    return float(np.mean(vals)) if vals else float("nan")


def _normalize_tile(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.full(values.shape, 128, dtype=np.uint8)
    scaled = (values.astype(np.float64) - lo) / (hi - lo)
    return np.rint(scaled * 255.0).astype(np.uint8)


def render_montage(series: list[WeightMap], grid_cols: int) -> np.ndarray:
    """Tile per-map min-max normalized grayscale images into one raster.

    Each map is windowed independently (degenerate maps render mid-gray);
    tiles are laid out row-major with 1-pixel separators.
    """
    if not series:
        raise ValueError("montage series is empty")
    if grid_cols < 1:
        raise ValueError("grid_cols must be >= 1")
    shapes = {wm.values.shape for wm in series}
    if len(shapes) != 1:
        raise ValueError(f"montage maps must share one shape, got {shapes}")
    tile_h, tile_w = shapes.pop()
    n = len(series)
    grid_rows = -(-n // grid_cols)
    height = grid_rows * tile_h + (grid_rows - 1)
    width = grid_cols * tile_w + (grid_cols - 1)
    canvas = np.full((height, width), _SEPARATOR, dtype=np.uint8)
    for idx, wm in enumerate(series):
        r, c = divmod(idx, grid_cols)
        y = r * (tile_h + 1)
        x = c * (tile_w + 1)
        canvas[y : y + tile_h, x : x + tile_w] = _normalize_tile(wm.values)
    return canvas


def write_montage_png(path, series: list[WeightMap], grid_cols: int) -> None:
    write_gray_png(path, render_montage(series, grid_cols))


def write_comparison_report(path, comparisons: list[MapComparison]) -> None:
    """One JSON object per line: {l, b, ncc, abs_ncc, degenerate}."""
    with open(path, "w") as fh:
        for c in comparisons:
            fh.write(
                json.dumps(
                    {
                        "l": c.view,
                        "b": c.detector,
                        "ncc": None if c.degenerate else c.ncc,
                        "abs_ncc": None if c.degenerate else c.abs_ncc,
                        "degenerate": c.degenerate,
                    }
                )
                + "\n"
            )


@dataclass(frozen=True)
class MemoryReport:
    n_weights: int
    n_bytes: int
    human_weights: str
    human_bytes: str


def _binary_quantity(value: int, unit: str = "") -> str:
    prefixes = ["", "Ki", "Mi", "Gi", "Ti", "Pi", "Ei"]
    scaled = float(value)
    idx = 0
    while scaled >= 1024.0 and idx < len(prefixes) - 1:
        scaled /= 1024.0
        idx += 1
    text = f"{scaled:.1f}".rstrip("0").rstrip(".")
    suffix = (prefixes[idx] + unit).strip()
    return f"{text} {suffix}".strip()


def memory_report(
    image_side: int, n_views: int, n_detectors: int, bytes_per_weight: int
) -> MemoryReport:
    """Dense-layer weight count and storage for a square image of ``image_side``.

    Exact integer arithmetic (Python ints, no overflow); human-readable
    figures use binary prefixes.
    """
    for name, value in (
        ("image_side", image_side),
        ("n_views", n_views),
        ("n_detectors", n_detectors),
        ("bytes_per_weight", bytes_per_weight),
    ):
        if int(value) != value or int(value) < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")
    n_weights = int(n_views) * int(n_detectors) * int(image_side) ** 2
    n_bytes = n_weights * int(bytes_per_weight)
    return MemoryReport(
        n_weights=n_weights,
        n_bytes=n_bytes,
        human_weights=_binary_quantity(n_weights),
        human_bytes=_binary_quantity(n_bytes, "B"),
    )


def comparison_summary(
    comparisons: list[MapComparison], baseline: float | None = None
) -> dict:
    summary = {
        "mean_abs_ncc": mean_abs_ncc(comparisons),
        "n_degenerate": sum(c.degenerate for c in comparisons),
        "n_maps": len(comparisons),
    }
    if baseline is not None:
        summary["baseline_mean_abs_ncc"] = baseline
    return summary
