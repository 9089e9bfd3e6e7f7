"""Navigation state, IMU kinematics, propagation, and scan undistortion.

The state lives on SO(3) x R^15 (18 tangent dimensions) with error-state
block layout

    [0:3]   attitude (rotation vector, radians)
    [3:6]   position (m)
    [6:9]   velocity (m/s)
    [9:12]  gyro bias (rad/s)
    [12:15] accel bias (m/s^2)
    [15:18] gravity (m/s^2)

The discrete transition over one IMU period dt is ``x+ = x boxplus (dt *
f(x, u, w))`` where ``f`` integrates angular rate, velocity (with the
midpoint term in the position row), specific force plus gravity, and bias
random walks.  Process noise is ordered ``[n_gyro, n_accel, n_bias_gyro,
n_bias_accel]`` (12-dim).

Discrete process noise is built from continuous-time densities as
``sigma^2 / dt`` per axis: the noise enters the transition scaled by dt, so
this convention makes the covariance grow at ``sigma^2`` per second.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from . import manifold
from .errors import InvalidArgumentError, UndistortionError

STATE_DIM = 18
NOISE_DIM = 12

ROT = slice(0, 3)
POS = slice(3, 6)
VEL = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
GRAV = slice(15, 18)


@dataclass
class State:
    """Full navigation state: IMU pose/velocity, biases, and gravity."""

    rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bias_gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bias_accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    def copy(self) -> "State":
        return State(
            self.rot.copy(), self.pos.copy(), self.vel.copy(),
            self.bias_gyro.copy(), self.bias_accel.copy(), self.gravity.copy(),
        )

    def euclidean(self) -> np.ndarray:
        """The 15 non-rotation components stacked in block order."""
        return np.concatenate(
            [self.pos, self.vel, self.bias_gyro, self.bias_accel, self.gravity]
        )

    def boxplus(self, delta: np.ndarray) -> "State":
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (STATE_DIM,):
            raise InvalidArgumentError(f"expected tangent of shape (18,), got {delta.shape}")
        rot, eucl = manifold.boxplus(
            (self.rot, self.euclidean()), (delta[ROT], delta[3:])
        )
        return State(rot, eucl[0:3], eucl[3:6], eucl[6:9], eucl[9:12], eucl[12:15])

    def boxminus(self, other: "State") -> np.ndarray:
        rot_part, eucl_part = manifold.boxminus(
            (self.rot, self.euclidean()), (other.rot, other.euclidean())
        )
        return np.concatenate([rot_part, eucl_part])


@dataclass
class ImuSample:
    timestamp: float
    gyro: np.ndarray
    accel: np.ndarray


@dataclass
class LidarScan:
    """One sweep of ranged points in the sensor body frame.

    ``dt_offsets`` are per-point sampling times relative to ``t_end`` (the
    scan-end timestamp), so they are non-positive for a raw sweep and all
    zero after undistortion.  ``line_ids`` group points into scan lines in
    storage order (needed by curvature estimation).
    """

    t_end: float
    points: np.ndarray  # (N, 3)
    dt_offsets: np.ndarray  # (N,)
    line_ids: np.ndarray | None = None  # (N,) int

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class NoiseConfig:
    """Continuous-time IMU noise densities (per sqrt(Hz))."""

    sigma_gyro: float = 0.002
    sigma_accel: float = 0.02
    sigma_bias_gyro_walk: float = 1e-5
    sigma_bias_accel_walk: float = 1e-4

    def __post_init__(self):
        for name in (
            "sigma_gyro", "sigma_accel", "sigma_bias_gyro_walk", "sigma_bias_accel_walk"
        ):
            if getattr(self, name) <= 0.0:
                raise InvalidArgumentError(f"{name} must be strictly positive")

    def discrete_q(self, dt: float) -> np.ndarray:
        """12x12 diagonal process-noise covariance for a step of length dt."""
        if dt <= 0.0:
            raise InvalidArgumentError("dt must be positive")
        diag = np.concatenate([
            np.full(3, self.sigma_gyro**2),
            np.full(3, self.sigma_accel**2),
            np.full(3, self.sigma_bias_gyro_walk**2),
            np.full(3, self.sigma_bias_accel_walk**2),
        ]) / dt
        return np.diag(diag)


@dataclass
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def scaled(self, level: int) -> "Intrinsics":
        """Intrinsics for pyramid level ``level`` (all parameters / 2^level)."""
        s = 2.0 ** (-level)
        return Intrinsics(
            self.fx * s, self.fy * s, self.cx * s, self.cy * s,
            self.width >> level, self.height >> level,
        )


@dataclass
class SensorConfig:
    """Pre-calibrated rig: LiDAR and camera extrinsics plus intrinsics.

    ``T_IL`` / ``T_IC`` are 4x4 rigid transforms expressing the LiDAR /
    camera frame in the IMU (body) frame.
    """

    T_IL: np.ndarray
    T_IC: np.ndarray
    intrinsics: Intrinsics

    def __post_init__(self):
        for name in ("T_IL", "T_IC"):
            t = np.asarray(getattr(self, name), dtype=float)
            if t.shape != (4, 4):
                raise InvalidArgumentError(f"{name} must be 4x4")
            manifold.require_rotation(t[:3, :3])
            setattr(self, name, t)

    @property
    def R_IL(self) -> np.ndarray:
        return self.T_IL[:3, :3]

    @property
    def t_IL(self) -> np.ndarray:
        return self.T_IL[:3, 3]

    @property
    def R_IC(self) -> np.ndarray:
        return self.T_IC[:3, :3]

    @property
    def t_IC(self) -> np.ndarray:
        return self.T_IC[:3, 3]


def symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def require_covariance(p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate an 18x18 symmetric PSD matrix (within numerical slack)."""
    p = np.asarray(p, dtype=float)
    if p.shape != (STATE_DIM, STATE_DIM):
        raise InvalidArgumentError("covariance must be 18x18")
    if np.max(np.abs(p - p.T)) > tol:
        raise InvalidArgumentError("covariance must be symmetric")
    if np.min(np.linalg.eigvalsh(symmetrize(p))) < -tol:
        raise InvalidArgumentError("covariance must be positive semidefinite")
    return p


def kinematics_f(
    x: State, u: ImuSample, w: np.ndarray | None = None, dt: float = 0.0
) -> np.ndarray:
    """Continuous-style transition rate; multiplied by dt and boxplus-ed.

    The position row carries the velocity midpoint term ``v + 0.5 * (R (a_m
    - b_a - n_a) + g) * dt`` so that one discrete step integrates position
    with the trapezoid-in-acceleration rule.
    """
    if w is None:
        w = np.zeros(NOISE_DIM)
    w = np.asarray(w, dtype=float)
    if w.shape != (NOISE_DIM,):
        raise InvalidArgumentError("process noise must have 12 components")

    omega = np.asarray(u.gyro, dtype=float) - x.bias_gyro - w[0:3]
    accel_world = x.rot @ (np.asarray(u.accel, dtype=float) - x.bias_accel - w[3:6]) + x.gravity

    out = np.zeros(STATE_DIM)
    out[ROT] = omega
    out[POS] = x.vel + 0.5 * accel_world * dt
    out[VEL] = accel_world
    out[BG] = w[6:9]
    out[BA] = w[9:12]
    return out


def propagate_state(x: State, u: ImuSample, dt: float) -> State:
    if dt <= 0.0:
        raise InvalidArgumentError("dt must be positive")
    return x.boxplus(dt * kinematics_f(x, u, None, dt))


def propagation_jacobians(x: State, u: ImuSample, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Error-state transition Jacobians (F_dx 18x18, F_w 18x12) at dx=0, w=0."""
    if dt <= 0.0:
        raise InvalidArgumentError("dt must be positive")
    omega = np.asarray(u.gyro, dtype=float) - x.bias_gyro
    accel = np.asarray(u.accel, dtype=float) - x.bias_accel
    rot = x.rot

    u_rot = dt * omega
    jr = manifold.so3_right_jacobian(u_rot)
    r_acc_skew = rot @ manifold.skew(accel)

    f = np.eye(STATE_DIM)
    f[ROT, ROT] = manifold.so3_exp(u_rot).T
    f[ROT, BG] = -jr * dt
    f[POS, ROT] = -0.5 * dt**2 * r_acc_skew
    f[POS, VEL] = dt * np.eye(3)
    f[POS, BA] = -0.5 * dt**2 * rot
    f[POS, GRAV] = 0.5 * dt**2 * np.eye(3)
    f[VEL, ROT] = -dt * r_acc_skew
    f[VEL, BA] = -dt * rot
    f[VEL, GRAV] = dt * np.eye(3)

    fw = np.zeros((STATE_DIM, NOISE_DIM))
    fw[ROT, 0:3] = -jr * dt
    fw[POS, 3:6] = -0.5 * dt**2 * rot
    fw[VEL, 3:6] = -dt * rot
    fw[BG, 6:9] = dt * np.eye(3)
    fw[BA, 9:12] = dt * np.eye(3)
    return f, fw


def propagate_covariance(
    p: np.ndarray, f_dx: np.ndarray, f_w: np.ndarray, q: np.ndarray
) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    f_dx = np.asarray(f_dx, dtype=float)
    f_w = np.asarray(f_w, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (STATE_DIM, STATE_DIM) or f_dx.shape != (STATE_DIM, STATE_DIM):
        raise InvalidArgumentError("P and F_dx must be 18x18")
    if f_w.shape[0] != STATE_DIM or q.shape != (f_w.shape[1], f_w.shape[1]):
        raise InvalidArgumentError("F_w and Q dimensions are inconsistent")
    return symmetrize(f_dx @ p @ f_dx.T + f_w @ q @ f_w.T)


def _imu_step_backward(
    rot: np.ndarray, pos: np.ndarray, vel: np.ndarray,
    omega: np.ndarray, accel: np.ndarray, gravity: np.ndarray, dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact inverse of one forward zero-order-hold IMU step of length dt."""
    rot_prev = rot @ manifold.so3_exp(-dt * omega)
    acc_world = rot_prev @ accel + gravity
    vel_prev = vel - dt * acc_world
    pos_prev = pos - dt * vel_prev - 0.5 * dt**2 * acc_world
    return rot_prev, pos_prev, vel_prev


def _imu_step_forward(
    rot: np.ndarray, pos: np.ndarray, vel: np.ndarray,
    omega: np.ndarray, accel: np.ndarray, gravity: np.ndarray, dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    acc_world = rot @ accel + gravity
    pos_next = pos + dt * vel + 0.5 * dt**2 * acc_world
    vel_next = vel + dt * acc_world
    rot_next = rot @ manifold.so3_exp(dt * omega)
    return rot_next, pos_next, vel_next


def undistort_scan(
    scan: LidarScan,
    imu_buffer: list[ImuSample],
    state_end: State,
    sensor: "SensorConfig",
    max_imu_gap: float = 0.02,
) -> LidarScan:
    """Re-express every scan point in the sensor frame at scan-end time.

    The pose at each point's sampling time is recovered by integrating the
    IMU buffer backward from ``state_end`` (pose, velocity, biases, gravity
    at ``scan.t_end``) with zero-order-hold rates, then each point is
    remapped through the end pose.  Raises :class:`UndistortionError` when
    the buffer does not cover the sweep or has a gap above ``max_imu_gap``.
    """
    n = len(scan)
    if n == 0:
        return LidarScan(scan.t_end, scan.points.copy(), np.zeros(0), scan.line_ids)
    offsets = np.asarray(scan.dt_offsets, dtype=float)
    if np.any(offsets > 1e-12):
        raise InvalidArgumentError("dt_offsets must not exceed the scan end time")

    t_start = scan.t_end + float(offsets.min())
    times = [s.timestamp for s in imu_buffer]
    if not times or times[0] > t_start:
        raise UndistortionError(
            f"IMU buffer starts at {times[0] if times else None}, "
            f"scan sweep starts at {t_start}"
        )

    # Samples whose hold interval intersects [t_start, t_end]: the last one
    # at or before t_start through the last one before t_end.
    lo = bisect.bisect_right(times, t_start) - 1
    hi = bisect.bisect_left(times, scan.t_end)
    samples = imu_buffer[lo:hi]
    node_times = [s.timestamp for s in samples] + [scan.t_end]
    gaps = np.diff(node_times)
    if len(gaps) and gaps.max() > max_imu_gap:
        raise UndistortionError(f"IMU gap of {gaps.max():.4f}s exceeds {max_imu_gap}s")

    # Backward pass: body pose at every IMU node time, anchored at t_end.
    rot = [None] * len(samples)
    pos = [None] * len(samples)
    vel = [None] * len(samples)
    r, p, v = state_end.rot, state_end.pos, state_end.vel
    for i in range(len(samples) - 1, -1, -1):
        dt = node_times[i + 1] - node_times[i]
        omega = samples[i].gyro - state_end.bias_gyro
        accel = samples[i].accel - state_end.bias_accel
        if dt > 0.0:
            r, p, v = _imu_step_backward(r, p, v, omega, accel, state_end.gravity, dt)
        rot[i], pos[i], vel[i] = r, p, v

    r_il, t_il = sensor.R_IL, sensor.t_IL
    r_end_t = state_end.rot.T
    p_end = state_end.pos

    # Raster sweeps reuse the same handful of sampling times across lines, so
    # resolve the body pose once per unique time and remap points in bulk.
    point_times = scan.t_end + offsets
    node_arr = np.asarray(node_times[:-1])
    uniq_times, inv = np.unique(point_times, return_inverse=True)
    rot_u = np.empty((len(uniq_times), 3, 3))
    pos_u = np.empty((len(uniq_times), 3))
    for k, tp in enumerate(uniq_times):
        j = max(int(np.searchsorted(node_arr, tp, side="right")) - 1, 0)
        dt = tp - node_times[j]
        if dt > 0.0:
            omega = samples[j].gyro - state_end.bias_gyro
            accel = samples[j].accel - state_end.bias_accel
            r_p, p_p, _ = _imu_step_forward(
                rot[j], pos[j], vel[j], omega, accel, state_end.gravity, dt
            )
        else:
            r_p, p_p = rot[j], pos[j]
        rot_u[k], pos_u[k] = r_p, p_p

    body = scan.points @ r_il.T + t_il
    world = np.einsum("nij,nj->ni", rot_u[inv], body) + pos_u[inv]
    out = (world - p_end) @ r_end_t.T
    out = (out - t_il) @ r_il

    return LidarScan(scan.t_end, out, np.zeros(n), scan.line_ids)
