"""fcbp: fan-beam CT simulation plus a dense sinogram-to-image network whose
dense-layer weights can be compared, map by map, against the analytic
back-projection operator."""

import os

# Cap BLAS worker threads before numpy loads. Best effort: has no effect if
# numpy was already imported by the embedding process.
_threads = os.environ.get("FCBP_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(_var, _threads)

from .errors import ConfigError, FormatError
from .geometry import (
    FanBeamGeometry,
    desk_geometry,
    detector_center_offset_mm,
    validate,
    view_angle_deg,
)
from .index_map import (
    CellIndex,
    ImageIndex,
    SinoIndex,
    cell_to_weight,
    image_flat,
    image_index,
    sino_flat,
    sino_index,
    weight_to_cell,
)
from .network import (
    Gradients,
    NetworkParams,
    conv2d_forward,
    fc_forward,
    init_network_params,
    mse_loss,
    named_tensors,
    network_backward,
    network_forward,
)
from .phantoms import (
    Dataset,
    build_dataset,
    random_ellipse_phantom,
    read_dataset,
    shepp_logan,
    sinogram_rms,
    write_dataset,
)
from .projector import (
    SystemMatrix,
    analytic_weight_map,
    back_project,
    build_system_matrix,
    forward_project,
    read_system_matrix,
    write_system_matrix,
)
from .training import (
    AdamState,
    Checkpoint,
    TrainConfig,
    TrainResult,
    adam_step,
    adam_step_tensors,
    init_adam_state,
    load_checkpoint,
    lr_at,
    save_checkpoint,
    train,
)
from .weight_maps import (
    MapComparison,
    MemoryReport,
    WeightMap,
    analytic_map,
    compare,
    compare_all,
    extract_fc_map,
    fixed_detector_series,
    fixed_view_series,
    mean_abs_ncc,
    memory_report,
    render_montage,
    shuffled_baseline,
    write_montage_png,
)

__version__ = "0.1.0"
