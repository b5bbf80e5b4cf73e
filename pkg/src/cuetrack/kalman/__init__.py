from .filter import (
    KalmanState,
    NoiseModel,
    ObservationMode,
    SINGLE_FRAME,
    MULTI_FRAME,
    transition_matrix,
    observation_matrix,
    predict,
    update,
    mahalanobis,
    initial_state,
    process_noise,
)
from .estimation import EstimatorOptions, estimate_noise, log_likelihood, log_likelihood_and_grad

__all__ = [
    "KalmanState",
    "NoiseModel",
    "ObservationMode",
    "SINGLE_FRAME",
    "MULTI_FRAME",
    "transition_matrix",
    "observation_matrix",
    "predict",
    "update",
    "mahalanobis",
    "initial_state",
    "process_noise",
    "EstimatorOptions",
    "estimate_noise",
    "log_likelihood",
    "log_likelihood_and_grad",
]
