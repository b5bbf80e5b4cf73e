"""Constant-velocity Kalman filter over the box state (px, py, pw, ph, vx, vy, vw, vh)."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Detection
from ..errors import DimensionError, InvalidStepError, NumericalError, StateCorruptionError

STATE_DIM = 8
SYM_TOL = 1e-9


class ObservationMode(str, enum.Enum):
    SINGLE_FRAME = "single_frame"
    MULTI_FRAME = "multi_frame"

    @property
    def obs_dim(self) -> int:
        return 4 if self is ObservationMode.SINGLE_FRAME else 6


SINGLE_FRAME = ObservationMode.SINGLE_FRAME
MULTI_FRAME = ObservationMode.MULTI_FRAME


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.shape != (STATE_DIM,) or cov.shape != (STATE_DIM, STATE_DIM):
            raise DimensionError("state must be an 8-vector with an 8x8 covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def box(self) -> np.ndarray:
        return self.mean[:4]


@dataclass(frozen=True)
class NoiseModel:
    """Process and observation noise.

    ``process_q`` is the process noise accumulated over one nominal frame
    interval ``dt_ref``; a step of length ``dt`` uses ``dt / dt_ref * process_q``.
    """

    process_q: np.ndarray
    obs_r_single: np.ndarray
    obs_r_multi: np.ndarray
    dt_ref: float = 1.0 / 30.0

    def __post_init__(self):
        if not self.dt_ref > 0:
            raise InvalidStepError("dt_ref must be positive")
        shapes = {"process_q": 8, "obs_r_single": 4, "obs_r_multi": 6}
        for name, dim in shapes.items():
            mat = np.asarray(getattr(self, name), dtype=np.float64)
            if mat.shape != (dim, dim):
                raise DimensionError(f"{name} must be {dim}x{dim}, got {mat.shape}")
            if not np.all(np.isfinite(mat)):
                raise StateCorruptionError(f"{name} has non-finite entries")
            if np.max(np.abs(mat - mat.T), initial=0.0) > SYM_TOL:
                raise StateCorruptionError(f"{name} is not symmetric")
            eig = np.linalg.eigvalsh(mat)
            if name == "process_q" and eig.min() < -SYM_TOL:
                raise StateCorruptionError("process_q must be positive semidefinite")
            if name != "process_q" and eig.min() <= 0.0:
                raise StateCorruptionError(f"{name} must be positive definite")
            object.__setattr__(self, name, mat)

    @classmethod
    def from_diagonals(cls, q, r_single, r_multi=None, dt_ref: float = 1.0 / 30.0) -> "NoiseModel":
        r_single = np.asarray(r_single, dtype=np.float64)
        if not dt_ref > 0:
            raise InvalidStepError("dt_ref must be positive")
        if r_multi is None:
            # velocity observations default to the position noise scaled to px/s
            r_multi = np.concatenate([r_single, r_single[:2] / dt_ref**2])
        return cls(np.diag(q), np.diag(r_single), np.diag(r_multi), dt_ref)

    def obs_noise(self, mode: ObservationMode) -> np.ndarray:
        return self.obs_r_single if ObservationMode(mode) is SINGLE_FRAME else self.obs_r_multi


def transition_matrix(dt: float) -> np.ndarray:
    if not dt > 0:
        raise InvalidStepError(f"time step must be positive, got {dt}")
    f = np.eye(STATE_DIM)
    f[0:4, 4:8] = dt * np.eye(4)
    return f


def observation_matrix(mode: ObservationMode) -> np.ndarray:
    return np.eye(STATE_DIM)[: ObservationMode(mode).obs_dim]


def process_noise(noise: NoiseModel, dt: float) -> np.ndarray:
    return (dt / noise.dt_ref) * noise.process_q


def _check_pd(cov: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(cov)):
        raise StateCorruptionError(f"{what} has non-finite entries")
    if np.max(np.abs(cov - cov.T)) > SYM_TOL * max(1.0, np.max(np.abs(cov))):
        raise StateCorruptionError(f"{what} is not symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise StateCorruptionError(f"{what} is not positive definite") from None


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def predict(state: KalmanState, dt: float, noise: NoiseModel) -> KalmanState:
    f = transition_matrix(dt)
    _check_pd(state.covariance, "prior covariance")
    mean = f @ state.mean
    cov = _sym(f @ state.covariance @ f.T + process_noise(noise, dt))
    return KalmanState(mean, cov)


def _innovation(state: KalmanState, z: np.ndarray, mode: ObservationMode, noise: NoiseModel):
    mode = ObservationMode(mode)
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape != (mode.obs_dim,):
        raise DimensionError(f"{mode.value} measurement must have {mode.obs_dim} components, got {z.size}")
    h = observation_matrix(mode)
    y = z - h @ state.mean
    s = _sym(h @ state.covariance @ h.T + noise.obs_noise(mode))
    return h, y, s


def _cholesky(s: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise NumericalError("innovation covariance is singular or indefinite") from None


def update(state: KalmanState, measurement, mode: ObservationMode, noise: NoiseModel) -> KalmanState:
    """Kalman measurement update with Joseph-form covariance."""
    h, y, s = _innovation(state, measurement, mode, noise)
    chol = _cholesky(s)
    pht = state.covariance @ h.T
    # K = P H^T S^-1 via two triangular solves on S = L L^T
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, pht.T)).T
    mean = state.mean + gain @ y
    ikh = np.eye(STATE_DIM) - gain @ h
    r = noise.obs_noise(mode)
    cov = _sym(ikh @ state.covariance @ ikh.T + gain @ r @ gain.T)
    return KalmanState(mean, cov)


def mahalanobis_measurement(state: KalmanState, measurement, mode: ObservationMode, noise: NoiseModel) -> float:
    _, y, s = _innovation(state, measurement, mode, noise)
    chol = _cholesky(s)
    w = np.linalg.solve(chol, y)
    return float(np.sqrt(w @ w))


def measurement_from_detection(det: Detection, mode: ObservationMode, dt: Optional[float] = None) -> np.ndarray:
    """Measurement vector for a detection.

    In multi-frame mode the velocity is ``-displacement / dt``; detections
    without a displacement (or with no ``dt``) fall back to a position-only
    measurement.
    """
    b = det.box
    pos = np.array([b.cx, b.cy, b.w, b.h], dtype=np.float64)
    if ObservationMode(mode) is MULTI_FRAME and det.displacement is not None and dt:
        vel = -np.asarray(det.displacement, dtype=np.float64) / dt
        return np.concatenate([pos, vel])
    return pos


def effective_mode(det: Detection, mode: ObservationMode, dt: Optional[float] = None) -> ObservationMode:
    if ObservationMode(mode) is MULTI_FRAME and det.displacement is not None and dt:
        return MULTI_FRAME
    return SINGLE_FRAME


def mahalanobis(state: KalmanState, detection: Detection, mode: ObservationMode, noise: NoiseModel,
                dt: Optional[float] = None) -> float:
    """Mahalanobis distance between a detection and a predicted state."""
    z = measurement_from_detection(detection, mode, dt)
    return mahalanobis_measurement(state, z, effective_mode(detection, mode, dt), noise)


def initial_state(measurement, mode: ObservationMode, noise: NoiseModel,
                  velocity_var_factor: float = 100.0) -> KalmanState:
    """State for a new track seeded by one measurement.

    Position variances are the observation noise of the measured components;
    unobserved velocities start at zero with ``velocity_var_factor`` times the
    matching position variance.
    """
    mode = ObservationMode(mode)
    z = np.asarray(measurement, dtype=np.float64).reshape(-1)
    if z.shape != (mode.obs_dim,):
        raise DimensionError(f"{mode.value} measurement must have {mode.obs_dim} components")
    r = np.diag(noise.obs_noise(mode))
    mean = np.zeros(STATE_DIM)
    var = np.empty(STATE_DIM)
    mean[:4] = z[:4]
    var[:4] = r[:4]
    var[4:] = velocity_var_factor * r[:4]
    if mode is MULTI_FRAME:
        mean[4:6] = z[4:6]
        var[4:6] = r[4:6]
    return KalmanState(mean, np.diag(var))
