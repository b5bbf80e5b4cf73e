"""Maximum-likelihood estimation of diagonal process and observation noise.

The Kalman filter is run over every training sequence and the innovation
log-likelihood is maximized by gradient ascent over log-variances. The
gradient is exact: the filter recursions are differentiated alongside the
filter itself (forward sensitivities), batched over sequences.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError, TrainingError
from .filter import STATE_DIM, MULTI_FRAME, SINGLE_FRAME, NoiseModel, ObservationMode

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EstimatorOptions:
    dt_ref: float = 1.0 / 30.0
    init_q: float = 1.0
    init_r: float = 1.0
    # prior variance of unobserved initial velocities, (px/s)^2
    init_velocity_var: float = 1e4
    # innovations of the first steps depend mostly on the velocity prior
    burn_in: int = 2
    variance_floor: float = 1e-8
    max_iter: int = 500
    rel_tol: float = 1e-8
    initial_step: float = 1.0
    max_halvings: int = 60
    # "bhhh": scale the gradient by the inverse of the summed outer products
    # of per-step scores; "none": plain gradient ascent
    preconditioner: str = "bhhh"
    # largest change of any log-variance in one preconditioned step
    max_log_step: float = 1.0
    # also try a start from difference moments of the data, keep the better one
    moment_start: bool = True
    # smallest variance a moment start may propose
    moment_min_var: float = 1e-4


@dataclass
class EstimationResult:
    noise: NoiseModel
    theta: np.ndarray
    objective: float
    initial_objective: float
    history: List[float]
    iterations: int
    converged: bool


class _Batch:
    """Padded, masked stack of measurement sequences."""

    def __init__(self, sequences, mode: ObservationMode):
        mode = ObservationMode(mode)
        m = mode.obs_dim
        if not sequences:
            raise DataError("training set is empty")
        zs, dts = [], []
        for idx, (meas, dt) in enumerate(sequences):
            meas = np.asarray(meas, dtype=np.float64)
            dt = np.asarray(dt, dtype=np.float64).reshape(-1)
            if meas.ndim != 2 or meas.shape[1] != m:
                raise DataError(f"sequence {idx}: expected (T, {m}) measurements, got {meas.shape}")
            t = meas.shape[0]
            if t < 3:
                raise DataError(f"sequence {idx}: at least 3 measurements required, got {t}")
            if dt.size == t - 1:
                dt = np.concatenate([[0.0], dt])
            if dt.size != t:
                raise DataError(f"sequence {idx}: dt length {dt.size} does not match {t} measurements")
            if np.any(dt[1:] <= 0) or not np.all(np.isfinite(meas)):
                raise DataError(f"sequence {idx}: time steps must be positive and measurements finite")
            zs.append(meas)
            dts.append(dt)
        self.mode = mode
        self.m = m
        self.n = len(zs)
        self.T = max(z.shape[0] for z in zs)
        self.z = np.zeros((self.n, self.T, m))
        self.dt = np.ones((self.n, self.T))
        self.mask = np.zeros((self.n, self.T), dtype=bool)
        for b, (z, dt) in enumerate(zip(zs, dts)):
            t = z.shape[0]
            self.z[b, :t] = z
            self.dt[b, 1:t] = dt[1:]
            self.mask[b, :t] = True


def n_params(mode: ObservationMode) -> int:
    return STATE_DIM + ObservationMode(mode).obs_dim


def theta_to_variances(theta: np.ndarray, opts: EstimatorOptions) -> Tuple[np.ndarray, np.ndarray]:
    var = opts.variance_floor + np.exp(theta)
    return var[:STATE_DIM], var[STATE_DIM:]


def _channel_groups(mode: ObservationMode):
    """Split the state into independent (position, velocity) channels.

    With diagonal ``Q``, ``R`` and initial covariance the filter factorizes
    exactly into one 2-state filter per box coordinate. Each group lists the
    measurement columns its channels observe and the indices of their
    parameters in ``theta`` (q_pos, q_vel, r...).
    """
    if ObservationMode(mode) is SINGLE_FRAME:
        return [([[c] for c in range(4)], [[c, 4 + c, 8 + c] for c in range(4)])]
    return [
        ([[c, 4 + c] for c in range(2)], [[c, 4 + c, 8 + c, 12 + c] for c in range(2)]),
        ([[c] for c in range(2, 4)], [[c, 4 + c, 8 + c] for c in range(2, 4)]),
    ]


def _run(theta: np.ndarray, batch: _Batch, opts: EstimatorOptions, with_grad: bool, scores: bool = False):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != n_params(batch.mode):
        raise DataError(f"expected {n_params(batch.mode)} parameters, got {theta.size}")
    var = opts.variance_floor + np.exp(theta)
    ex = np.exp(theta)  # d variance / d theta
    total = 0.0
    grad = np.zeros(theta.size)
    seq_scores = np.zeros((batch.n, theta.size))
    info = np.zeros((theta.size, theta.size))
    counted_mask = batch.mask.copy()
    counted_mask[:, : opts.burn_in + 1] = False
    count = int(counted_mask.sum())
    if count == 0:
        raise DataError("no innovations left after burn-in; sequences too short")
    with np.errstate(all="ignore"):
        for cols, pidx in _channel_groups(batch.mode):
            ll, g = _run_channels(var, ex, batch, cols, pidx, counted_mask, opts, with_grad)
            total += ll
            if with_grad:
                gseq, ginfo = g
                for c, idx in enumerate(pidx):
                    seq_scores[:, idx] += gseq[:, c]
                    info[np.ix_(idx, idx)] += ginfo[c]
    obj = total / count
    if not math.isfinite(obj):
        raise TrainingError("objective is not finite")
    if with_grad:
        grad = seq_scores.sum(axis=0) / count
        if not np.all(np.isfinite(grad)):
            raise TrainingError("gradient is not finite")
        if scores:
            return obj, grad, seq_scores, info / count
        return obj, grad
    return obj


def _run_channels(var, ex, batch, cols, pidx, counted_mask, opts, with_grad):
    """Run a group of 2-state filters sharing one measurement layout.

    Returns the summed log-likelihood and, per channel, the gradient with
    respect to that channel's local parameters.
    """
    nc = len(cols)
    mc = len(cols[0])
    L = 2 + mc
    B, T = batch.n, batch.T
    pidx = np.asarray(pidx)
    # rows are (sequence, channel) pairs, sequence-major
    z = np.stack([batch.z[:, :, c] for c in cols], axis=1).reshape(B * nc, T, mc)
    mask = np.repeat(batch.mask, nc, axis=0)
    counted = np.repeat(counted_mask, nc, axis=0)
    dts = np.repeat(batch.dt, nc, axis=0)
    N = B * nc
    pv = np.tile(var[pidx], (B, 1))  # (N, L)
    pe = np.tile(ex[pidx], (B, 1))
    qp, qv, r = pv[:, 0], pv[:, 1], pv[:, 2:]

    x = np.zeros((N, 2))
    x[:, 0] = z[:, 0, 0]
    P = np.zeros((N, 2, 2))
    P[:, 0, 0] = r[:, 0]
    P[:, 1, 1] = opts.init_velocity_var
    if mc == 2:
        x[:, 1] = z[:, 0, 1]
        P[:, 1, 1] = r[:, 1]
    R = np.zeros((N, mc, mc))
    R[:, np.arange(mc), np.arange(mc)] = r

    if with_grad:
        dx = np.zeros((N, L, 2))
        dP = np.zeros((N, L, 2, 2))
        dP[:, 2, 0, 0] = pe[:, 2]
        if mc == 2:
            dP[:, 3, 1, 1] = pe[:, 3]
        dQunit = np.zeros((N, L, 2, 2))
        dQunit[:, 0, 0, 0] = pe[:, 0]
        dQunit[:, 1, 1, 1] = pe[:, 1]
        dR = np.zeros((N, L, mc, mc))
        for i in range(mc):
            dR[:, 2 + i, i, i] = pe[:, 2 + i]
        g = np.zeros((N, L))
        info = np.zeros((N, L, L))

    total = 0.0
    for k in range(1, T):
        active = mask[:, k]
        if not active.any():
            break
        dt = dts[:, k]
        scale = dt / opts.dt_ref
        # predict with F = [[1, dt], [0, 1]]
        xp = np.stack([x[:, 0] + dt * x[:, 1], x[:, 1]], axis=1)
        Pp = _propagate(P, dt)
        Pp[:, 0, 0] += scale * qp
        Pp[:, 1, 1] += scale * qv
        y = z[:, k, :] - xp[:, :mc]
        S = Pp[:, :mc, :mc] + R
        Sinv, logdet = _inv_logdet(S)
        alpha = np.einsum("nij,nj->ni", Sinv, y)
        ck = counted[:, k]
        if ck.any():
            ll = -0.5 * (logdet + np.einsum("ni,ni->n", y, alpha) + mc * LOG_2PI)
            total += float(ll[ck].sum())
        K = Pp[:, :, :mc] @ Sinv  # (N, 2, mc)
        xn = xp + np.einsum("nij,nj->ni", K, y)
        Pn = Pp - K @ S @ np.swapaxes(K, 1, 2)
        Pn = 0.5 * (Pn + np.swapaxes(Pn, 1, 2))

        if with_grad:
            dxp = np.stack([dx[:, :, 0] + dt[:, None] * dx[:, :, 1], dx[:, :, 1]], axis=2)
            dPp = _propagate(dP, dt[:, None]) + scale[:, None, None, None] * dQunit
            dS = dPp[:, :, :mc, :mc] + dR
            dy = -dxp[:, :, :mc]
            if ck.any():
                tr = np.einsum("nij,nlji->nl", Sinv, dS)
                lin = np.einsum("ni,nli->nl", alpha, dy)
                quad = np.einsum("ni,nlij,nj->nl", alpha, dS, alpha)
                gk = np.where(ck[:, None], -0.5 * (tr + 2.0 * lin - quad), 0.0)
                g += gk
                info += gk[:, :, None] * gk[:, None, :]
            Kl = K[:, None]
            # dK = (dPp H^T - K dS) S^-1
            dK = (dPp[:, :, :, :mc] - Kl @ dS) @ Sinv[:, None]
            dxn = dxp + np.einsum("nlij,nj->nli", dK, y) + np.einsum("nij,nlj->nli", K, dy)
            # dP = dPp - dPp H^T K^T - K H dPp + K dS K^T
            t1 = dPp[:, :, :, :mc] @ np.swapaxes(Kl, 2, 3)
            dPn = dPp - t1 - np.swapaxes(t1, 2, 3) + Kl @ dS @ np.swapaxes(Kl, 2, 3)
            dx = np.where(active[:, None, None], dxn, dx)
            dP = np.where(active[:, None, None, None], dPn, dP)

        x = np.where(active[:, None], xn, x)
        P = np.where(active[:, None, None], Pn, P)

    if with_grad:
        # per-sequence gradient and summed score outer products, channel-major
        return total, (g.reshape(B, nc, L), info.reshape(B, nc, L, L).sum(axis=0))
    return total, None


def _propagate(P: np.ndarray, dt: np.ndarray) -> np.ndarray:
    """F P F^T for F = [[1, dt], [0, 1]] over the trailing two axes."""
    d = np.asarray(dt)[..., None]
    out = P.copy()
    out[..., 0, :] += d * P[..., 1, :]
    out[..., :, 0] += d * out[..., :, 1]
    return out


def _inv_logdet(S: np.ndarray):
    if S.shape[-1] == 1:
        return 1.0 / S, np.log(S[:, 0, 0])
    det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    inv = np.empty_like(S)
    inv[:, 0, 0] = S[:, 1, 1] / det
    inv[:, 1, 1] = S[:, 0, 0] / det
    inv[:, 0, 1] = -S[:, 0, 1] / det
    inv[:, 1, 0] = -S[:, 1, 0] / det
    return inv, np.log(det)


def log_likelihood(theta, sequences, mode: ObservationMode, opts: Optional[EstimatorOptions] = None) -> float:
    """Mean innovation log-likelihood per counted measurement."""
    opts = opts or EstimatorOptions()
    batch = sequences if isinstance(sequences, _Batch) else _Batch(sequences, mode)
    return _run(theta, batch, opts, with_grad=False)


def log_likelihood_and_grad(theta, sequences, mode: ObservationMode, opts: Optional[EstimatorOptions] = None):
    opts = opts or EstimatorOptions()
    batch = sequences if isinstance(sequences, _Batch) else _Batch(sequences, mode)
    return _run(theta, batch, opts, with_grad=True)


def initial_theta(mode: ObservationMode, opts: EstimatorOptions) -> np.ndarray:
    m = ObservationMode(mode).obs_dim
    return np.log(np.concatenate([np.full(STATE_DIM, opts.init_q), np.full(m, opts.init_r)]))


def _lag_covariances(x: np.ndarray, valid: np.ndarray, lags: int) -> np.ndarray:
    """Zero-mean autocovariances of ``x`` over samples where the window is valid."""
    out = np.full(lags + 1, np.nan)
    for lag in range(lags + 1):
        ok = valid[:, lag:] & valid[:, :valid.shape[1] - lag]
        if ok.any():
            out[lag] = float(np.mean((x[:, lag:] * x[:, :x.shape[1] - lag])[ok]))
    return out


def moment_theta(batch: _Batch, opts: EstimatorOptions) -> Optional[np.ndarray]:
    """Starting point from autocovariances of measurement differences.

    For a position channel observed with noise ``r`` at a constant step ``h``,
    second differences ``d2`` have lag-0/1/2 autocovariances
    ``h^2 s q_v + 2 s q_p + 6 r``, ``-s q_p - 4 r`` and ``r`` with
    ``s = h / dt_ref``. A measured velocity has first differences with
    variance ``s q_v + 2 r_v`` and lag-1 covariance ``-r_v``. Only windows of
    equal steps are used; returns None when there are too few.
    """
    z, dt, mask = batch.z, batch.dt, batch.mask
    # windows of equal steps: dt[k] is the step into sample k
    same = np.zeros_like(mask)
    same[:, 2:] = mask[:, 2:] & mask[:, 1:-1] & mask[:, :-2] & np.isclose(dt[:, 2:], dt[:, 1:-1], rtol=1e-6)
    if same.sum() < 8:
        return None
    h = float(np.median(dt[:, 2:][same[:, 2:]]))
    sc = h / opts.dt_ref
    floor = opts.moment_min_var
    q = np.full(STATE_DIM, floor)
    r = np.full(batch.m, floor)
    for c in range(4):
        d2 = np.zeros(z.shape[:2])
        d2[:, 2:] = z[:, 2:, c] - 2 * z[:, 1:-1, c] + z[:, :-2, c]
        g = _lag_covariances(d2, same, 2)
        if np.isnan(g).any():
            return None
        rc = min(max(g[2], floor), g[0] / 6.0)
        qp = max(-(g[1] + 4 * rc) / sc, floor)
        qv = max((g[0] - 6 * rc - 2 * sc * qp) / (h * h * sc), floor)
        q[c], q[4 + c], r[c] = qp, qv, max(rc, floor)
    if batch.mode is MULTI_FRAME:
        for c in range(2):
            du = np.zeros(z.shape[:2])
            du[:, 1:] = z[:, 1:, 4 + c] - z[:, :-1, 4 + c]
            ok = np.zeros_like(mask)
            ok[:, 1:] = mask[:, 1:] & mask[:, :-1]
            g = _lag_covariances(du, ok, 1)
            if np.isnan(g).any():
                return None
            rv = min(max(-g[1], floor), g[0] / 2.0)
            q[4 + c] = max((g[0] - 2 * rv) / sc, floor)
            r[4 + c] = max(rv, floor)
    var = np.concatenate([q, r])
    return np.log(np.maximum(var - opts.variance_floor, floor))


def theta_to_noise(theta: np.ndarray, mode: ObservationMode, opts: EstimatorOptions) -> NoiseModel:
    q, r = theta_to_variances(theta, opts)
    if ObservationMode(mode) is SINGLE_FRAME:
        return NoiseModel.from_diagonals(q, r, dt_ref=opts.dt_ref)
    return NoiseModel.from_diagonals(q, r[:4], r, dt_ref=opts.dt_ref)


def fit_noise(sequences: Sequence, mode: ObservationMode, opts: Optional[EstimatorOptions] = None,
              theta0: Optional[np.ndarray] = None) -> EstimationResult:
    """Backtracking gradient ascent; returns the full optimization record.

    Without ``theta0`` the ascent runs from the default start and, when
    ``opts.moment_start`` is set, from :func:`moment_theta` as well; the run
    with the higher final objective is returned.
    """
    opts = opts or EstimatorOptions()
    mode = ObservationMode(mode)
    batch = sequences if isinstance(sequences, _Batch) else _Batch(sequences, mode)
    if theta0 is not None:
        return _ascend(np.asarray(theta0, dtype=np.float64).copy(), batch, mode, opts)
    best = _ascend(initial_theta(mode, opts), batch, mode, opts)
    alt = moment_theta(batch, opts) if opts.moment_start else None
    if alt is not None:
        try:
            res = _ascend(alt, batch, mode, opts)
        except TrainingError:
            res = None
        if res is not None and res.objective > best.objective:
            best = res
    return best


def _ascend(theta: np.ndarray, batch: _Batch, mode: ObservationMode, opts: EstimatorOptions) -> EstimationResult:
    obj, direction, grad = _ascent_direction(theta, batch, opts)
    history = [obj]
    step = opts.initial_step
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        accepted = False
        for _ in range(opts.max_halvings):
            cand = theta + step * direction
            try:
                cand_obj = _run(cand, batch, opts, with_grad=False)
            except TrainingError:
                cand_obj = -math.inf
            if cand_obj >= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        change = abs(cand_obj - obj) / max(abs(obj), 1.0)
        theta = cand
        obj, direction, grad = _ascent_direction(theta, batch, opts)
        history.append(obj)
        step = min(2.0 * step, opts.initial_step)
        # a tiny change after heavy backtracking is not convergence unless the
        # predicted gain of a full step is tiny as well
        decrement = 0.5 * float(grad @ direction) / max(abs(obj), 1.0)
        if change < opts.rel_tol and decrement < opts.rel_tol:
            converged = True
            break
    logger.debug("noise estimation: %d iterations, objective %.6g", it, obj)
    return EstimationResult(
        noise=theta_to_noise(theta, mode, opts),
        theta=theta,
        objective=obj,
        initial_objective=history[0],
        history=history,
        iterations=it,
        converged=converged,
    )


def _ascent_direction(theta, batch, opts):
    obj, grad, _, info = _run(theta, batch, opts, with_grad=True, scores=True)
    if opts.preconditioner == "none":
        return obj, grad, grad
    if opts.preconditioner != "bhhh":
        raise ValueError(f"unknown preconditioner {opts.preconditioner!r}")
    # Per-step score increments are martingale differences, so their summed
    # outer products estimate the Fisher information.
    reg = 1e-9 * (np.trace(info) / info.shape[0] + 1e-12)
    direction = np.linalg.solve(info + reg * np.eye(info.shape[0]), grad)
    # log-variances near the floor have vanishing gradients; never jump there in one step
    biggest = np.max(np.abs(direction))
    if biggest > opts.max_log_step:
        direction *= opts.max_log_step / biggest
    return obj, direction, grad


def estimate_noise(sequences: Sequence, mode: ObservationMode, opts: Optional[EstimatorOptions] = None) -> NoiseModel:
    """Estimate diagonal ``Q`` and ``R`` from measurement sequences.

    Each sequence is a pair ``(measurements, dts)`` with measurements of shape
    ``(T, 4)`` (single-frame) or ``(T, 6)`` (multi-frame) and ``dts`` the
    ``T - 1`` time steps between consecutive measurements, in seconds.
    """
    return fit_noise(sequences, mode, opts).noise
