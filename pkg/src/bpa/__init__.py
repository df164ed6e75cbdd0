"""Bingham Procrustean Alignment: Bingham pose posteriors for point-cloud registration."""
from .align import (
    AlignConfig,
    OrientedCloud,
    PoseSample,
    TraceStep,
    bpa_iterative_align,
    bpa_sample,
    find_correspondences,
    icp_align,
)
from .bench import ErrorCurves, TrialConfig, generate_cloud, perturb_pose, run_benchmark
from .bingham import (
    BinghamDist,
    bingham_mode,
    bingham_multiply,
    bingham_normalizer,
    bingham_pdf,
    bingham_product,
    bingham_sample,
)
from .errors import (
    BPAError,
    DegenerateError,
    EmptyClassError,
    InvalidFrameError,
    OutOfRangeError,
    ZeroVectorError,
)
from .features import (
    SurfaceFrame,
    curvature_concentration,
    feature_orientation_bingham,
    flip_principal_curvature,
    orientation_from_frame,
)
from .procrustes import (
    Correspondence,
    OrientationPair,
    PosePosterior,
    correspondence_bingham,
    fuse_orientation_measurements,
    horn_align,
    map_pose,
    posterior_orientation,
)
from .quat import (
    angular_distance,
    conjugate,
    quat_between_axes,
    quat_multiply,
    quat_to_rotation,
    rotate_vector,
    rotation_to_quat,
)

__version__ = "0.1.0"
