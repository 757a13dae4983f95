"""External wrench estimation from torque-sensor residuals.

Pipeline: predict the force-free torques with the REDUCED model from
reconstructed motion, subtract the sensed torques, map the residual into a
Cartesian wrench through the wheel Jacobian, build the zero-external-moment
line, intersect it with the body outline to localize the contact, and
threshold the filtered magnitude to detect collisions.

The residual identity (with the physical external-wrench sign) is::

    J_ext,b^T F_ext = J_cw^T (T|F=0 - tau_s)

whose third row is the zero-moment line
``(x_e - x) F_y - (y_e - y) F_x = I_b thetaddot - (R/r_w) sum(tau_s)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter

from . import geometry
from .dynamics import GeneralizedState, ModelVariant, nominal_torque
from .kinematics import (
    RobotParams,
    body_accel_from_wheels,
    roller_jacobian,
    wheel_jacobian,
    wheel_jacobian_inverse,
)

FORCE_EPS = 0.05  # N; below this no line/contact localization is attempted


class DegenerateForce(ValueError):
    """Residual force component too small to define a zero-moment line."""


class NoIntersection(ValueError):
    """Zero-moment line misses the body outline entirely."""


@dataclass
class Wrench:
    Fx: float = 0.0
    Fy: float = 0.0
    tau: float = 0.0

    @property
    def magnitude(self) -> float:
        return math.hypot(self.Fx, self.Fy)

    def as_array(self) -> np.ndarray:
        return np.array([self.Fx, self.Fy, self.tau])


@dataclass
class ContactEstimate:
    """Estimated boundary contact: point, inward direction, magnitude."""

    point: np.ndarray
    direction: np.ndarray
    magnitude: float
    residual_norm: float = 0.0
    on_wheel: bool = False
    wheel_index: int = -1


@dataclass
class DetectorState:
    """Moving-average collision detector with a latched trigger."""

    threshold: float = 0.8          # N
    window: float = 0.05            # s
    dt: float = 1e-3                # sample period
    buffer: deque = field(default_factory=deque)
    total: float = 0.0
    triggered: bool = False
    trigger_time: float = math.nan
    time: float = 0.0
    average: float = 0.0

    def __post_init__(self):
        if self.threshold <= 0.0:
            raise ValueError("threshold must be > 0")
        self.size = max(1, int(round(self.window / self.dt)))


def residual_torques(tau_s: np.ndarray, state: GeneralizedState,
                     p: RobotParams) -> np.ndarray:
    """REDUCED-model force-free prediction minus the sensed torques."""
    pred = nominal_torque(state, p, ModelVariant.REDUCED)
    return pred - np.asarray(tau_s, dtype=float)


def residual_wrench(residual: np.ndarray, theta: float, p: RobotParams) -> np.ndarray:
    """Map a torque residual to ``(Fx, Fy, m_z)`` through ``J_cw^T``."""
    return wheel_jacobian(theta, p).T @ np.asarray(residual, dtype=float)


def zero_moment_line(residual: np.ndarray, state: GeneralizedState,
                     p: RobotParams):
    """Line of candidate contact points: a point on it and its direction.

    The direction is the (unit) residual force direction; every point
    ``q`` on the line satisfies ``(q - c) x F = m_z`` about the body
    center ``c``.

    Raises
    ------
    DegenerateForce
        If the planar force component is below ``FORCE_EPS``.
    """
    w = residual_wrench(residual, state.base.theta, p)
    Fx, Fy, mz = w
    fmag = math.hypot(Fx, Fy)
    if fmag < FORCE_EPS:
        raise DegenerateForce(f"|F| = {fmag:.4g} N below {FORCE_EPS} N")
    direction = np.array([Fx, Fy]) / fmag
    center = np.array([state.base.x, state.base.y])
    # offset the center perpendicular to F so the moment matches
    point = center + (mz / fmag ** 2) * np.array([Fy, -Fx])
    return point, direction


def locate_contact(line_point, direction, base_pose, p: RobotParams):
    """Pushing-side intersection of the zero-moment line with the outline.

    Of the (at most two) triangle-boundary crossings, a pushing force
    enters the body at the smaller line parameter, so that one is the
    contact.  When the line first passes through a wheel disc upstream of
    the wall entry, the contact happened on that wheel: the reported point
    is the nearest wall point and the estimate is flagged with the wheel
    index.

    Raises
    ------
    NoIntersection
        If the line misses the triangle.
    """
    x, y, theta = base_pose
    outline = geometry.body_outline(x, y, theta, p)
    hits = geometry.line_triangle_intersections(line_point, direction, outline)
    if not hits:
        raise NoIntersection("zero-moment line misses the body")
    t_entry, q_entry = hits[0]

    wheel_idx = -1
    wheel_t = math.inf
    for i in range(3):
        ts = geometry.line_circle_intersections(
            line_point, direction, outline.wheel_centers[i], outline.wheel_radius)
        if not ts:
            continue
        t_in = ts[0]
        if t_in < t_entry - 1e-12 and t_in < wheel_t:
            # disc entered before the wall: the exposed wheel was hit first
            entry_pt = np.asarray(line_point) + t_in * np.asarray(direction)
            if not geometry.point_in_triangle(entry_pt, outline, tol=1e-12):
                wheel_t = t_in
                wheel_idx = i

    if wheel_idx >= 0:
        disc_pt = np.asarray(line_point) + wheel_t * np.asarray(direction)
        q_near, _ = geometry.closest_point_on_triangle_boundary(disc_pt, outline)
        return np.asarray(q_near), True, wheel_idx
    return np.asarray(q_entry), False, -1


def solve_force(residual: np.ndarray, contact_point, state: GeneralizedState,
                p: RobotParams) -> Wrench:
    """Planar force from the first two residual-wrench rows.

    The external torque component is fixed to zero by the no-net-torque
    assumption; the field exists on :class:`Wrench` for completeness.
    """
    w = residual_wrench(residual, state.base.theta, p)
    return Wrench(Fx=float(w[0]), Fy=float(w[1]), tau=0.0)


def estimate_contact(residual: np.ndarray, state: GeneralizedState,
                     p: RobotParams) -> ContactEstimate:
    """Full single-shot estimation: line, localization and force solve."""
    line_point, direction = zero_moment_line(residual, state, p)
    pose = (state.base.x, state.base.y, state.base.theta)
    point, on_wheel, wheel_idx = locate_contact(line_point, direction, pose, p)
    wrench = solve_force(residual, point, state, p)
    w3 = residual_wrench(residual, state.base.theta, p)
    mismatch = abs((point[0] - state.base.x) * wrench.Fy
                   - (point[1] - state.base.y) * wrench.Fx - w3[2])
    return ContactEstimate(point=point,
                           direction=np.array([wrench.Fx, wrench.Fy]) / max(wrench.magnitude, 1e-300),
                           magnitude=wrench.magnitude,
                           residual_norm=float(mismatch),
                           on_wheel=on_wheel, wheel_index=wheel_idx)


def detect(magnitude: float, det: DetectorState, dt: float | None = None) -> DetectorState:
    """Feed one |F| sample; trigger latches when the window average (over a
    full window, zero-padded at start) crosses the threshold."""
    if dt is not None and abs(dt - det.dt) > 1e-12:
        raise ValueError("detector sample period mismatch")
    det.buffer.append(magnitude)
    det.total += magnitude
    if len(det.buffer) > det.size:
        det.total -= det.buffer.popleft()
    det.time += det.dt
    det.average = det.total / det.size
    if not det.triggered and det.average > det.threshold:
        det.triggered = True
        det.trigger_time = det.time
    return det


class LowPass2:
    """Second-order Butterworth low-pass, streaming form (per channel)."""

    def __init__(self, cutoff_hz: float, sample_rate: float, channels: int = 3):
        b, a = butter(2, cutoff_hz, fs=sample_rate)
        self.b = b
        self.a = a
        self.xs = np.zeros((3, channels))
        self.ys = np.zeros((3, channels))

    def reset(self):
        self.xs[:] = 0.0
        self.ys[:] = 0.0

    def filter(self, x: np.ndarray) -> np.ndarray:
        self.xs[1:] = self.xs[:-1]
        self.xs[0] = x
        y = (self.b @ self.xs) - (self.a[1] * self.ys[0] + self.a[2] * self.ys[1])
        self.ys[1:] = self.ys[:-1]
        self.ys[0] = y
        return y.copy()


class MovingAverage:
    """Rectangular moving average over a fixed sample count, zero-padded."""

    def __init__(self, window_s: float, dt: float, channels: int = 3):
        self.size = max(1, int(round(window_s / dt)))
        self.buffer = deque()
        self.total = np.zeros(channels)

    def reset(self):
        self.buffer.clear()
        self.total[:] = 0.0

    def filter(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.buffer.append(x)
        self.total += x
        if len(self.buffer) > self.size:
            self.total -= self.buffer.popleft()
        return self.total / self.size


@dataclass
class EstimatorConfig:
    accel_cutoff_hz: float = 30.0     # low-pass on reconstructed accelerations
    torque_filter_window: float = 0.05  # moving average on the residual wrench [s]
    threshold: float = 0.8            # detector threshold [N]
    detector_window: float = 0.05     # detector moving-average window [s]
    sample_rate: float = 1000.0


class StreamingEstimator:
    """Online estimator fed from encoders and torque sensors only.

    The base pose is dead-reckoned from the wheel encoders (ideal rolling
    makes this exact up to integration error); accelerations come from
    double-differentiated encoder angles through a second-order low-pass.
    The residual wrench is smoothed with a rectangular moving average
    before detection, mirroring the filter applied to the hardware torque
    signals.
    """

    def __init__(self, p: RobotParams, cfg: EstimatorConfig,
                 initial_pose=(0.0, 0.0, 0.0)):
        self.p = p
        self.cfg = cfg
        self.dt = 1.0 / cfg.sample_rate
        self.pose = np.array(initial_pose, dtype=float)
        self.prev_q = None
        self.prev_qdot = np.zeros(3)
        self.accel_lp = LowPass2(cfg.accel_cutoff_hz, cfg.sample_rate)
        self.wrench_ma = MovingAverage(cfg.torque_filter_window, self.dt)
        self.detector = DetectorState(threshold=cfg.threshold,
                                      window=cfg.detector_window, dt=self.dt)
        self.filtered_wrench = np.zeros(3)
        self.last_estimate: ContactEstimate | None = None

    def update(self, q_w: np.ndarray, tau_s: np.ndarray):
        """Process one control-tick sample; returns the filtered wrench."""
        q_w = np.asarray(q_w, dtype=float)
        if self.prev_q is None:
            self.prev_q = q_w.copy()
        qdot = (q_w - self.prev_q) / self.dt
        qddot_raw = (qdot - self.prev_qdot) / self.dt
        qddot = self.accel_lp.filter(qddot_raw)
        self.prev_q = q_w.copy()
        self.prev_qdot = qdot

        theta = self.pose[2]
        Jinv = wheel_jacobian_inverse(theta, self.p)
        vel = Jinv @ qdot
        # dead-reckoned odometry pose
        self.pose = self.pose + self.dt * vel

        acc = body_accel_from_wheels(qdot, qddot, theta, vel[2], self.p)
        base = _base_from(self.pose, vel, acc)
        qdot_r = roller_jacobian(theta, self.p) @ vel
        state = GeneralizedState(base=base)
        state.wheels.qdot_w = qdot
        state.wheels.qdot_r = qdot_r

        r = residual_torques(tau_s, state, self.p)
        w_raw = residual_wrench(r, theta, self.p)
        self.filtered_wrench = self.wrench_ma.filter(w_raw)
        mag = math.hypot(self.filtered_wrench[0], self.filtered_wrench[1])
        detect(mag, self.detector)

        self.last_estimate = None
        if mag >= FORCE_EPS:
            try:
                self.last_estimate = self._estimate_from_wrench(self.filtered_wrench, base)
            except (DegenerateForce, NoIntersection):
                self.last_estimate = None
        return self.filtered_wrench

    def _estimate_from_wrench(self, w: np.ndarray, base) -> ContactEstimate:
        Fx, Fy, mz = w
        fmag = math.hypot(Fx, Fy)
        if fmag < FORCE_EPS:
            raise DegenerateForce("filtered force below localization floor")
        direction = np.array([Fx, Fy]) / fmag
        center = np.array([base.x, base.y])
        line_point = center + (mz / fmag ** 2) * np.array([Fy, -Fx])
        point, on_wheel, wheel_idx = locate_contact(
            line_point, direction, (base.x, base.y, base.theta), self.p)
        mismatch = abs((point[0] - base.x) * Fy - (point[1] - base.y) * Fx - mz)
        return ContactEstimate(point=point, direction=direction, magnitude=fmag,
                               residual_norm=float(mismatch),
                               on_wheel=on_wheel, wheel_index=wheel_idx)


def _base_from(pose, vel, acc):
    from .kinematics import BaseState
    return BaseState(x=pose[0], y=pose[1], theta=pose[2],
                     xdot=vel[0], ydot=vel[1], thetadot=vel[2],
                     xddot=acc[0], yddot=acc[1], thetaddot=acc[2])
