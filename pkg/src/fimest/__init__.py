"""Channel synthesis and two-phase PARAFAC-ALS estimation for MIMO links
whose transmit and receive arrays morph along their surface normals."""

from .channel import (
    PathSet,
    channel_matrix,
    morph_response,
    morphed_steering,
    sample_paths,
    steering_factors_xz,
    steering_matrix,
    steering_unmorphed,
)
from .estimator import (
    AlsOptions,
    EstimationResult,
    align_factors,
    estimate_gains,
    kruskal_check,
    nmse,
    phase1_update,
    phase2_update,
    reconstruct_channel,
    run_two_phase_als,
)
from .geometry import (
    Basis,
    FimConfig,
    MorphPattern,
    Orientation,
    basis_from_orientation,
    direction_vector,
    element_positions,
    morphed_positions,
    sample_morph_pattern,
)
from .harness import ExperimentConfig, load_config, run_experiment
from .tensor_ops import (
    FactorTriple,
    RankDeficiencyWarning,
    fold,
    khatri_rao,
    ls_solve,
    parafac_reconstruct,
    unfold,
)
from .training import (
    PilotMatrix,
    TrainingConfig,
    TrainingFrame,
    build_training_frame,
    generate_pilots,
    phase1_slot,
    phase2_slot,
)

__version__ = "0.1.0"
