"""Trajectory tracking with collision-triggered admittance escape.

In TRACKING mode the controller follows a nominal generator (hold pose or
circular arc).  A detector trigger switches it to ESCAPING: the reference
becomes the closed-form impulse response of the virtual mass-damper,
seeded with the wrench frozen at the trigger instant, with yaw held
constant.  Escape completes after a configurable time once the filtered
force has stayed below threshold, after which tracking resumes re-anchored
at the current pose.  A renewed above-threshold push mid-escape restarts
the escape from the current pose with the new wrench.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kinematics import RobotParams, wheel_jacobian


@dataclass(frozen=True)
class AdmittanceParams:
    M_des: float = 2.0           # kg
    B_des: float = 1.6           # N s / m
    escape_standoff: float = 0.5  # m, design target displacement

    def __post_init__(self):
        if self.M_des <= 0.0 or self.B_des <= 0.0:
            raise ValueError("admittance mass and damping must be > 0")


def design_damping(threshold: float, standoff: float) -> float:
    """Damping that makes a threshold-level trigger travel ``standoff``."""
    if standoff <= 0.0:
        raise ValueError("standoff must be > 0")
    return threshold / standoff


def escape_trajectory(t: float, F, a: AdmittanceParams, x0) -> np.ndarray:
    """Desired pose ``t`` seconds after the escape switch.

    ``x(t) = x0 + (F/B)(1 - exp(-B/M t))`` independently in x and y;
    heading is held at its switch value.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    decay = 1.0 - math.exp(-a.B_des / a.M_des * t)
    out = x0.copy()
    out[0] += F[0] / a.B_des * decay
    out[1] += F[1] / a.B_des * decay
    return out


def escape_velocity(t: float, F, a: AdmittanceParams) -> np.ndarray:
    """Time derivative of :func:`escape_trajectory` (yaw rate zero)."""
    rate = a.B_des / a.M_des
    e = math.exp(-rate * t)
    return np.array([F[0] / a.M_des * e, F[1] / a.M_des * e, 0.0])


class Mode(Enum):
    TRACKING = "TRACKING"
    ESCAPING = "ESCAPING"


@dataclass
class ControllerMode:
    mode: Mode = Mode.TRACKING
    t_switch: float = 0.0
    x0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    F_trigger: np.ndarray = field(default_factory=lambda: np.zeros(2))


class HoldTrajectory:
    """Hold a fixed pose."""

    def __init__(self, pose):
        self.pose = np.asarray(pose, dtype=float)

    def rebase(self, pose, t):
        self.pose = np.asarray(pose, dtype=float)

    def sample(self, t: float):
        return self.pose.copy(), np.zeros(3)


class LineTrajectory:
    """Straight line at constant cruise velocity, heading held.

    The commanded velocity ramps linearly over ``ramp`` seconds so the
    start does not demand an instantaneous velocity step.
    """

    def __init__(self, pose, velocity, ramp: float = 1.0):
        self.velocity = np.asarray(velocity, dtype=float)
        self.ramp = max(ramp, 1e-9)
        self.rebase(pose, 0.0)

    def rebase(self, pose, t):
        self.start = np.asarray(pose, dtype=float)
        self.t0 = t

    def sample(self, t: float):
        dt = t - self.t0
        if dt < self.ramp:
            frac = dt / self.ramp
            dist = 0.5 * frac * dt
            vel = self.velocity * frac
        else:
            dist = dt - 0.5 * self.ramp
            vel = self.velocity
        pose = self.start.copy()
        pose[:2] += dist * self.velocity
        return pose, np.array([vel[0], vel[1], 0.0])


class ArcTrajectory:
    """Constant-speed circle of a given diameter, heading held."""

    def __init__(self, pose, diameter: float, speed: float):
        self.diameter = diameter
        self.speed = speed
        self.omega = speed / (diameter / 2.0)
        self.rebase(pose, 0.0)

    def rebase(self, pose, t):
        pose = np.asarray(pose, dtype=float)
        r = self.diameter / 2.0
        self.center = pose[:2] - np.array([r, 0.0])
        self.theta0 = pose[2]
        self.t0 = t

    def sample(self, t: float):
        r = self.diameter / 2.0
        a = self.omega * (t - self.t0)
        pos = self.center + r * np.array([math.cos(a), math.sin(a)])
        vel = r * self.omega * np.array([-math.sin(a), math.cos(a)])
        return (np.array([pos[0], pos[1], self.theta0]),
                np.array([vel[0], vel[1], 0.0]))


class JointSpaceConverter:
    """Convert a Cartesian reference to wheel angles and rates.

    Rates map through the wheel Jacobian at the current heading; angles
    accumulate by trapezoidal integration from the anchor instant.
    """

    def __init__(self, p: RobotParams, q_w0, dt: float):
        self.p = p
        self.dt = dt
        self.q_des = np.asarray(q_w0, dtype=float).copy()
        self.prev_rate = np.zeros(3)

    def anchor(self, q_w):
        self.q_des = np.asarray(q_w, dtype=float).copy()
        self.prev_rate = np.zeros(3)
        return self

    def step(self, xdot_des, theta: float):
        rate = wheel_jacobian(theta, self.p) @ np.asarray(xdot_des, dtype=float)
        self.q_des = self.q_des + 0.5 * self.dt * (rate + self.prev_rate)
        self.prev_rate = rate
        return self.q_des.copy(), rate


def to_joint_space(xdot_des_series, theta_series, p: RobotParams, dt: float,
                   q_w0=None):
    """Batch form of :class:`JointSpaceConverter` for a whole reference."""
    q0 = np.zeros(3) if q_w0 is None else np.asarray(q_w0, dtype=float)
    conv = JointSpaceConverter(p, q0, dt)
    angles = []
    rates = []
    for xd, th in zip(xdot_des_series, theta_series):
        q, qd = conv.step(xd, th)
        angles.append(q)
        rates.append(qd)
    return np.array(angles), np.array(rates)


@dataclass
class SupervisorConfig:
    threshold: float = 0.8
    escape_time: float | None = None  # default 5 M/B when None
    quiet_time: float = 0.2           # s below threshold before re-arm


class Supervisor:
    """TRACKING/ESCAPING switching logic driven by the detector."""

    def __init__(self, adm: AdmittanceParams, cfg: SupervisorConfig):
        self.adm = adm
        self.cfg = cfg
        self.state = ControllerMode()
        self.escape_time = (cfg.escape_time if cfg.escape_time is not None
                            else 5.0 * adm.M_des / adm.B_des)
        self._below_since = None
        self._prev_above = False

    def update(self, now: float, pose, filtered_wrench, triggered: bool) -> ControllerMode:
        mag = math.hypot(filtered_wrench[0], filtered_wrench[1])
        above = mag > self.cfg.threshold
        st = self.state
        if st.mode is Mode.TRACKING:
            if triggered and above:
                st.mode = Mode.ESCAPING
                st.t_switch = now
                st.x0 = np.asarray(pose, dtype=float).copy()
                st.F_trigger = np.array([filtered_wrench[0], filtered_wrench[1]])
                self._below_since = None
        else:
            if above and not self._prev_above:
                # renewed push: restart the escape from the current pose
                st.t_switch = now
                st.x0 = np.asarray(pose, dtype=float).copy()
                st.F_trigger = np.array([filtered_wrench[0], filtered_wrench[1]])
            if not above:
                if self._below_since is None:
                    self._below_since = now
            else:
                self._below_since = None
            done = (now - st.t_switch) >= self.escape_time
            quiet = (self._below_since is not None
                     and (now - self._below_since) >= self.cfg.quiet_time)
            if done and quiet:
                st.mode = Mode.TRACKING
        self._prev_above = above
        return st


def supervise(supervisor: Supervisor, now: float, pose, filtered_wrench,
              triggered: bool) -> ControllerMode:
    """Functional wrapper over :meth:`Supervisor.update`."""
    return supervisor.update(now, pose, filtered_wrench, triggered)
