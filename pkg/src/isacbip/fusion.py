"""Multi-BS fusion: hybrid TDoA/AoA positioning, Doppler velocity, CA filter.

Positioning linearizes the range-difference and bearing constraints into

    [-2 x_{i,1}  -2 y_{i,1}  -2 r_{i,1}] [x y r_1]^T = r_{i,1}^2 - k_i + k_1
    [ sin(th_i)  -cos(th_i)   0        ] [x y r_1]^T = sin(th_i) x_i - cos(th_i) y_i

for i = 2..I (TDoA rows) and i = 1..I (AoA rows), where x_{i,1}, y_{i,1}
are BS offsets from BS 1, k_i = x_i^2 + y_i^2 and r_{i,1} is the measured
range difference. With exact inputs the system is consistent (zero
residual) and its weighted least-squares solution equals the true
position; a guarded Gauss-Newton step then reconciles the auxiliary r_1
with ||p - p_1||, which the linearization leaves unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .config import C0, BsConfig, KalmanTuning, WaveformConfig
from .echo import wrap_angle
from .errors import GeometryError, UnobservableVelocityError
from .estimation import ParamEstimate
from .kinematics import PhysInfoMatrix

MIN_ANGLE_DIVERSITY = 0.05  # |sin(theta_i - theta_j)| conditioning bound


@dataclass(frozen=True)
class PositionFix:
    x: float
    y: float
    r1: float
    residual: float  # relative weighted residual of the linear system


@dataclass(frozen=True)
class VelocityFix:
    speed: float
    heading_rad: float

    @property
    def vx(self) -> float:
        return self.speed * math.cos(self.heading_rad)

    @property
    def vy(self) -> float:
        return self.speed * math.sin(self.heading_rad)


def _weights(sigma2: np.ndarray) -> np.ndarray:
    pos = sigma2[sigma2 > 0]
    if pos.size == 0:
        return np.ones_like(sigma2)
    floor = 1e-12 * float(np.median(pos))
    return 1.0 / np.maximum(sigma2, floor)


def _bearings(estimates: Sequence[ParamEstimate], bss: Sequence[BsConfig]) -> np.ndarray:
    return np.array([wrap_angle(e.aoa_rad + b.boresight_rad) for e, b in zip(estimates, bss)])


def solve_position_wls(
    estimates: Sequence[ParamEstimate],
    bss: Sequence[BsConfig],
    refine: bool = True,
) -> PositionFix:
    """Weighted least-squares position from per-BS delay/angle estimates.

    Weights are inverse noise variances, with each BS's variance applied to
    both its range and angle rows. Raises GeometryError when the linear
    system is rank-deficient.
    """
    n = len(estimates)
    if n < 2 or len(bss) != n:
        raise GeometryError("need estimates from at least two base stations")
    bx = np.array([b.x_m for b in bss])
    by = np.array([b.y_m for b in bss])
    theta = _bearings(estimates, bss)
    ranges = np.array([e.delay_s for e in estimates]) * C0 / 2.0
    sigma2 = np.array([e.noise_var for e in estimates])

    k = bx**2 + by**2
    r_i1 = ranges[1:] - ranges[0]
    a_tdoa = np.column_stack([-2.0 * (bx[1:] - bx[0]), -2.0 * (by[1:] - by[0]), -2.0 * r_i1])
    b_tdoa = r_i1**2 - k[1:] + k[0]
    a_aoa = np.column_stack([np.sin(theta), -np.cos(theta), np.zeros(n)])
    b_aoa = np.sin(theta) * bx - np.cos(theta) * by
    A = np.vstack([a_tdoa, a_aoa])
    rhs = np.concatenate([b_tdoa, b_aoa])
    w = _weights(np.concatenate([sigma2[1:], sigma2]))

    sw = np.sqrt(w)
    sol, _, rank, _ = np.linalg.lstsq(sw[:, None] * A, sw * rhs, rcond=None)
    if rank < 3:
        raise GeometryError("rank-deficient TDoA/AoA geometry")
    resid = np.linalg.norm(sw * (A @ sol - rhs)) / max(np.linalg.norm(sw * rhs), 1e-30)

    p = sol[:2]
    if refine:
        p = _gauss_newton_step(p, bx, by, theta, r_i1, w)
    r1 = float(np.hypot(p[0] - bx[0], p[1] - by[0]))
    return PositionFix(float(p[0]), float(p[1]), r1, float(resid))


def _nonlinear_residuals(p, bx, by, theta, r_i1):
    dx = p[0] - bx
    dy = p[1] - by
    rng = np.hypot(dx, dy)
    g_tdoa = (rng[1:] - rng[0]) - r_i1
    g_aoa = np.array([wrap_angle(b - t) for b, t in zip(np.arctan2(dy, dx), theta)])
    return np.concatenate([g_tdoa, g_aoa]), dx, dy, rng


def _gauss_newton_step(p, bx, by, theta, r_i1, w):
    """One cost-guarded Gauss-Newton step on the range/bearing equations."""
    g, dx, dy, rng = _nonlinear_residuals(p, bx, by, theta, r_i1)
    if np.any(rng < 1e-9):
        return p
    u = np.column_stack([dx / rng, dy / rng])
    j_tdoa = u[1:] - u[0]
    j_aoa = np.column_stack([-dy / rng**2, dx / rng**2])
    J = np.vstack([j_tdoa, j_aoa])
    jtw = J.T * w
    try:
        step = np.linalg.solve(jtw @ J, -(jtw @ g))
    except np.linalg.LinAlgError:
        return p
    p_new = p + step
    g_new, _, _, _ = _nonlinear_residuals(p_new, bx, by, theta, r_i1)
    if g_new @ (w * g_new) < g @ (w * g):
        return p_new
    return p


def solve_velocity(
    dopplers: Sequence[float],
    angles: Sequence[float],
    wf: WaveformConfig,
    weights: Sequence[float] | None = None,
) -> VelocityFix:
    """2D velocity from per-BS Doppler shifts and global bearing angles.

    Solves the weighted least squares of v_r,i = vx cos(th_i) + vy sin(th_i)
    with v_r,i = -f_d,i c0 / (2 f_c). Raises UnobservableVelocityError when
    all bearings are within the angle-diversity conditioning bound.
    """
    f = np.asarray(dopplers, dtype=float)
    th = np.asarray(angles, dtype=float)
    if f.size < 2 or th.size != f.size:
        raise UnobservableVelocityError("need Doppler estimates from at least two base stations")
    div = np.abs(np.sin(th[:, None] - th[None, :]))
    if div.max() < MIN_ANGLE_DIVERSITY:
        raise UnobservableVelocityError(
            f"angle diversity {div.max():.3f} below {MIN_ANGLE_DIVERSITY}"
        )
    v_r = -f * C0 / (2.0 * wf.carrier_hz)
    H = np.column_stack([np.cos(th), np.sin(th)])
    w = np.ones_like(f) if weights is None else np.asarray(weights, dtype=float)
    htw = H.T * w
    try:
        v = np.linalg.solve(htw @ H, htw @ v_r)
    except np.linalg.LinAlgError as exc:
        raise UnobservableVelocityError("singular velocity geometry") from exc
    return VelocityFix(float(np.hypot(*v)), float(math.atan2(v[1], v[0])))


# ---------------------------------------------------------------------------
# constant-acceleration Kalman filter
# ---------------------------------------------------------------------------


def ca_transition(dt: float) -> np.ndarray:
    F = np.eye(6)
    F[0, 2] = F[1, 3] = dt
    F[2, 4] = F[3, 5] = dt
    F[0, 4] = F[1, 5] = 0.5 * dt * dt
    return F


def ca_process_noise(dt: float, q: float) -> np.ndarray:
    """Continuous white-jerk process noise for the [p, v, a] chain."""
    block = q * np.array(
        [
            [dt**5 / 20.0, dt**4 / 8.0, dt**3 / 6.0],
            [dt**4 / 8.0, dt**3 / 3.0, dt**2 / 2.0],
            [dt**3 / 6.0, dt**2 / 2.0, dt],
        ]
    )
    Q = np.zeros((6, 6))
    for axis in (0, 1):
        idx = np.array([axis, axis + 2, axis + 4])
        Q[np.ix_(idx, idx)] = block
    return Q


def run_ca_kalman(
    fixes: Sequence,
    rate_hz: float,
    tuning: KalmanTuning = KalmanTuning(),
    noise_vars: Sequence[float] | None = None,
    return_covariances: bool = False,
):
    """Filter raw (PositionFix, VelocityFix) pairs into a 6 x S state track.

    ``fixes[k]`` may be None for a predict-only step. ``noise_vars`` are
    per-step propagated noise variance proxies; measurement variances are
    ``scale * nv`` clamped below by the tuning floors. Raises ValueError on
    non-finite measurements, naming the offending index.
    """
    n = len(fixes)
    if n == 0:
        raise ValueError("need at least one snapshot")
    z = np.zeros((n, 4))
    has = np.zeros(n, dtype=bool)
    r_diag = np.empty((n, 4))
    nv = np.zeros(n) if noise_vars is None else np.asarray(noise_vars, dtype=float)
    for k, fx in enumerate(fixes):
        pv = max(tuning.meas_pos_var_floor, tuning.pos_var_scale * nv[k])
        vv = max(tuning.meas_vel_var_floor, tuning.vel_var_scale * nv[k])
        r_diag[k] = (pv, pv, vv, vv)
        if fx is None:
            continue
        pos, vel = fx
        z[k] = (pos.x, pos.y, vel.vx, vel.vy)
        if not np.all(np.isfinite(z[k])):
            raise ValueError(f"non-finite fix at snapshot {k}")
        has[k] = True
    if not has.any():
        raise ValueError("all snapshots are predict-only")

    first = int(np.argmax(has))
    x0 = np.zeros(6)
    x0[:4] = z[first]
    P0 = np.diag(
        [
            tuning.init_pos_var,
            tuning.init_pos_var,
            tuning.init_vel_var,
            tuning.init_vel_var,
            tuning.init_acc_var,
            tuning.init_acc_var,
        ]
    )
    dt = 1.0 / rate_hz
    F = ca_transition(dt)
    Q = ca_process_noise(dt, tuning.jerk_psd)

    if return_covariances:
        states, covs = _kalman_with_covs(z, has, r_diag, F, Q, x0, P0)
        return PhysInfoMatrix(states.T.copy(), rate_hz), covs
    states, _ = _kernels.kalman_core(z, has, r_diag, F, Q, x0, P0)
    return PhysInfoMatrix(states.T.copy(), rate_hz)


def _kalman_with_covs(z, has, r_diag, F, Q, x0, P0):
    """Numpy reference pass that also records per-step covariances."""
    n = z.shape[0]
    covs = np.empty((n, 6, 6))
    states = np.empty((n, 6))
    x = x0.copy()
    P = P0.copy()
    I6 = np.eye(6)
    H = np.zeros((4, 6))
    H[:4, :4] = np.eye(4)
    for k in range(n):
        x = F @ x
        P = F @ P @ F.T + Q
        if has[k]:
            S = P[:4, :4] + np.diag(r_diag[k])
            K = np.linalg.solve(S, P[:4, :]).T
            x = x + K @ (z[k] - x[:4])
            IKH = I6 - K @ H
            P = IKH @ P @ IKH.T + (K * r_diag[k]) @ K.T
            P = 0.5 * (P + P.T)
        states[k] = x
        covs[k] = P
    return states, covs
