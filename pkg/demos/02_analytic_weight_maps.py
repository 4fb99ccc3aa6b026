"""Render the analytic weight-map montages.

Each tile is one row of the system matrix reshaped to image dims: the
strip of pixels feeding one (view, detector) pair. The fixed-detector
series rotates with the view; the fixed-view series sweeps laterally with
the detector.
"""

from pathlib import Path

import fcbp
from fcbp.weight_maps import (
    DETECTOR_SERIES_COLS,
    VIEW_SERIES_COLS,
    analytic_detector_series,
    analytic_view_series,
    write_montage_png,
)

OUT = Path(__file__).resolve().parent / "demo_output"
OUT.mkdir(exist_ok=True)

geom = fcbp.FanBeamGeometry()  # full scale: 90 views, 128 detectors, 64x64
sm = fcbp.build_system_matrix(geom)

detector = geom.n_detectors // 2
series = analytic_detector_series(sm, detector)
write_montage_png(OUT / f"analytic_detector_{detector:03d}.png", series, VIEW_SERIES_COLS)
print(f"fixed detector {detector}: {len(series)} maps, one per view "
      f"(strip orientation rotates with the view angle)")

view = 12
series = analytic_view_series(sm, view)
write_montage_png(OUT / f"analytic_view_{view:03d}.png", series, DETECTOR_SERIES_COLS)
empty = sum(1 for wm in series if not wm.values.any())
print(f"fixed view {view}: {len(series)} maps, one per detector "
      f"({empty} detectors miss the grid entirely)")

print(f"outputs in {OUT}")
