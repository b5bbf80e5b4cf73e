"""Online multi-object tracking by detection with learned association gating.

A constant-velocity Kalman filter per track, noise covariances estimated by
maximum likelihood, a linear SVM fusing several association cues, Hungarian
assignment, and CLEAR MOT evaluation on deterministic synthetic scenes.
"""
from ._ext import BACKEND
from .assoc import (
    Assignment,
    CostFeatures,
    SvmModel,
    associate,
    cost_features,
    hungarian,
    parse_feature_set,
    svm_score,
    svm_train,
)
from .core import (
    EMBEDDING_DIM,
    STABLE,
    TENTATIVE,
    BoundingBox,
    Detection,
    FrameDetections,
    TrackOutput,
    iou,
    l2_distance,
)
from .errors import (
    ConfigurationError,
    CuetrackError,
    DataError,
    DimensionError,
    InvalidStepError,
    NumericalError,
    ParseError,
    SchemaError,
    SequencingError,
    StateCorruptionError,
    TrainingError,
)
from .kalman import (
    EstimatorOptions,
    KalmanState,
    NoiseModel,
    ObservationMode,
    estimate_noise,
    mahalanobis,
    predict,
    update,
)
from .metrics import MotReport, evaluate
from .simulator import GroundTruth, ScenarioConfig, generate, make_training_data
from .tracker import KalmanTrack, Tracker, TrackerConfig, run_sequence

__version__ = "0.1.0"
