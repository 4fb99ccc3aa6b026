"""Fan-beam acquisition geometry and reconstruction-grid constants.

Conventions, fixed once here and relied on by every other module:

* The X-ray source starts on the +x axis at view 1 and rotates
  counterclockwise in steps of ``angular_step_deg``.
* The image grid is centered on the rotation center. Pixel (row 1, col 1)
  sits at the top-left corner; columns increase along +x, rows increase
  downward (-y).
* The detector is flat (linear), perpendicular to the central ray, and
  centered on it: for an even detector count the central ray strikes the
  midpoint between cells n/2 and n/2 + 1.
"""

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class FanBeamGeometry:
    """Acquisition and grid constants for a simulated 2-D fan-beam scan.

    Defaults describe the full-scale setup: 90 views at 4 degree spacing,
    128 detector cells of 1.6 mm, and a 64x64 grid of 1.0 mm pixels with a
    1500 mm source-to-detector / 1000 mm source-to-center distance.
    """

    source_to_detector_mm: float = 1500.0
    source_to_center_mm: float = 1000.0
    n_detectors: int = 128
    detector_pitch_mm: float = 1.6
    n_views: int = 90
    angular_step_deg: float = 4.0
    image_rows: int = 64
    image_cols: int = 64
    pixel_size_mm: float = 1.0

    @property
    def sinogram_len(self) -> int:
        """Flattened sinogram length: n_views * n_detectors."""
        return self.n_views * self.n_detectors

    @property
    def image_len(self) -> int:
        """Flattened image length: image_rows * image_cols."""
        return self.image_rows * self.image_cols

    @property
    def sinogram_shape(self) -> tuple[int, int]:
        return (self.n_views, self.n_detectors)

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_rows, self.image_cols)


GEOMETRY_FIELDS = tuple(f.name for f in fields(FanBeamGeometry))

# Fields serialized as 64-bit integers; all others are 64-bit floats.
GEOMETRY_INT_FIELDS = frozenset(
    {"n_detectors", "n_views", "image_rows", "image_cols"}
)


def desk_geometry() -> FanBeamGeometry:
    """Small geometry (32x32 grid, 45 views, 64 detectors) for CPU-scale runs."""
    return FanBeamGeometry(
        n_detectors=64,
        n_views=45,
        angular_step_deg=8.0,
        image_rows=32,
        image_cols=32,
    )


def view_angle_deg(geom: FanBeamGeometry, l: int) -> float:
    """Source angle in degrees for 1-based view index ``l``.

    View 1 is at 0 degrees; angles increase counterclockwise by
    ``angular_step_deg`` per view.
    """
    if not 1 <= l <= geom.n_views:
        raise IndexError(f"view index {l} out of range 1..{geom.n_views}")
    return (l - 1) * geom.angular_step_deg


def detector_center_offset_mm(geom: FanBeamGeometry, b: int) -> float:
    """Signed lateral offset of detector cell ``b`` (1-based) on the detector line.

    The array is centered on the central ray, so offsets over all cells are
    symmetric around zero and spaced by ``detector_pitch_mm``.
    """
    if not 1 <= b <= geom.n_detectors:
        raise IndexError(f"detector index {b} out of range 1..{geom.n_detectors}")
    return ((b - 0.5) - geom.n_detectors / 2.0) * geom.detector_pitch_mm


def validate(geom: FanBeamGeometry) -> list[str]:
    """Return names of all violated geometry invariants (empty list when valid)."""
    violations = []
    if not geom.source_to_detector_mm > geom.source_to_center_mm:
        violations.append("sdd > sod")
    if not geom.source_to_center_mm > 0:
        violations.append("sod > 0")
    if geom.n_detectors < 1:
        violations.append("n_detectors >= 1")
    if geom.n_views < 1:
        violations.append("n_views >= 1")
    if geom.image_rows < 1:
        violations.append("image_rows >= 1")
    if geom.image_cols < 1:
        violations.append("image_cols >= 1")
    if geom.n_views * geom.angular_step_deg > 360.0:
        violations.append("n_views * angular_step_deg <= 360")
    if not geom.detector_pitch_mm > 0:
        violations.append("detector_pitch_mm > 0")
    if not geom.pixel_size_mm > 0:
        violations.append("pixel_size_mm > 0")
    return violations
