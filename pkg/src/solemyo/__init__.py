"""Full-body muscle activation estimation from 36-channel insole pressure.

The package turns paired pressure/sEMG recordings into supervised windows,
trains a masked, bio-conditioned transformer regressor with hand-written
gradients, evaluates it under leave-one-user-out or leave-one-motion-out
protocols, and ships a biomechanical synthetic-data generator so the whole
pipeline is verifiable end to end without human data.
"""

__version__ = "0.1.0"

from .errors import (
    AlignmentError,
    CheckpointError,
    ConfigError,
    DataFormatError,
    NumericError,
    OutOfRangeError,
    SequencingError,
    SolemyoError,
    TrainingError,
    UndefinedCorrelationError,
)
from .data import (
    BIO_BOUNDS,
    EMG_HEADER,
    EMG_MAX_UV,
    FRAME_MS,
    MUSCLE_NAMES,
    MUSCLE_PAIRS,
    N_CHANNELS,
    N_MUSCLES,
    PRESSURE_HEADER,
    PRESSURE_MAX_KG,
    BioProfile,
    EmgSample,
    PressureFrame,
    SyncedRecording,
    TrainingWindow,
    denormalize,
    load_bio_json,
    load_dataset,
    load_emg_csv,
    load_manifest,
    load_pressure_csv,
    load_recording,
    normalize,
    normalize_bio,
    synchronize,
    window,
    write_bio_json,
    write_emg_csv,
    write_manifest,
    write_pressure_csv,
)
from .augment import (
    AugmentConfig,
    augment_dataset,
    augment_window,
    scale_augment,
    shift_augment,
)
from .model import (
    ModelConfig,
    ModelParams,
    flops_per_window,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    loss_mse,
    loss_smooth,
    loss_total,
    param_count,
    region_importance_mask,
    save_checkpoint,
    tensor_shapes,
)
from .train import (
    SplitSpec,
    TrainConfig,
    fit,
    load_trace_csv,
    save_trace_csv,
    split,
)
from .evaluate import (
    EvalReport,
    evaluate,
    imbalance_per_pair,
    imbalance_score,
    mean_predictor_rmse,
    pearson,
    plot_recording_svg,
    predict_recording,
    rmse,
    write_prediction_csv,
)
from .synth import (
    BodyModel,
    MotionSpec,
    SensorLayout,
    com_from_activation,
    cop_from_com,
    cop_in_hull,
    default_motions,
    gen_activation,
    gen_dataset,
    gen_recording,
    pressure_from_cop,
    sample_bio,
)
from .stream import StreamState, stream_recording, streaming_infer
from .config import (
    DataConfig,
    ExperimentConfig,
    load_experiment_config,
    save_experiment_config,
)
