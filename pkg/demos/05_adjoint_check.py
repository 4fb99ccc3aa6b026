"""Dot-product test: forward projection and back projection are exact
transposes of each other.

For random image/sinogram pairs (x, y), <Ax, y> must equal <x, A'y> to
rounding. Pixel-driven splatting guarantees this by construction; the test
quantifies it.
"""

import numpy as np

import fcbp

geom = fcbp.FanBeamGeometry()
sm = fcbp.build_system_matrix(geom)
rng = np.random.default_rng(0)

worst = 0.0
for trial in range(100):
    x = rng.standard_normal(geom.image_shape)
    y = rng.standard_normal(geom.sinogram_shape)
    ax = fcbp.forward_project(sm, x)
    aty = fcbp.back_project(sm, y)
    lhs = np.vdot(ax, y)
    rhs = np.vdot(x, aty)
    defect = abs(lhs - rhs) / (np.linalg.norm(ax) * np.linalg.norm(y))
    worst = max(worst, defect)

print(f"100 random pairs, worst relative adjoint defect: {worst:.3e}")
print("(anything below 1e-10 means the operator pair is a true transpose)")
