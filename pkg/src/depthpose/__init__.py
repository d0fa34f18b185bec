"""Category-level 3DOF pose posteriors from segmented depth images.

The pipeline: learn linear shape subspaces over voxelized objects, train
a mixture-density network that maps a depth image to a pose mixture plus
shape coefficients and category probabilities, then pick pose estimates
by sampling the mixture and (for MAP) re-weighting candidates by a
silhouette signed-distance-field agreement prior.
"""

from .errors import NumericError, ValidationError
from .estimator import (
    EstimateResult,
    baseline_random_oracle,
    baseline_random_sdf,
    estimate_map,
    estimate_mle,
)
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    angular_error,
    canonicalize_rotvec,
    compose_rotvec,
    matrix_to_rotvec,
    render_depth,
    render_depth_batch,
    rotvec_to_matrix,
    sample_pose,
)
from .mdn import (
    GmmParams,
    NetworkConfig,
    NetworkWeights,
    PredictionOutput,
    TrainingSet,
    forward,
    gmm_pdf,
    gmm_sample,
    head_transform,
    loss_gradient,
    pose_loss,
    total_loss,
    train,
)
from .sdfprior import SignedDistanceField, depth_error, prior_density, silhouette_sdf
from .shapespace import (
    ClassSubspace,
    SubspaceModel,
    VoxelGrid,
    binarize,
    learn_class_subspace,
    merge_subspaces,
    project,
    reconstruct,
)

__version__ = "0.1.0"
