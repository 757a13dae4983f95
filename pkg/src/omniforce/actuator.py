"""Per-wheel drivetrain: torque sensor, PD servo, stiction and noise.

The torque sensor is modeled two ways:

* ``RIGID`` -- algebraic; the sensor reads exactly the torque delivered to
  the wheel.  Used by estimator unit tests.
* ``SPRING`` -- a stiff torsional spring between the motor rotor and the
  wheel.  The transmitted spring torque is both the wheel drive torque and
  the sensor reading, so collision reaction loads show up in the signal
  the way they do on hardware.

Stiction has two distinct effects, both configurable:

* ``stiction_torque`` -- breakaway level; with motors unpowered the wheel
  (and with all wheels held, the base) does not move until the traction
  load exceeds it.
* ``sensor_stiction`` -- reading absorber; while a wheel is at rest, part
  of the load torque bypasses the sensor through structure friction and
  the reading shrinks by up to this amount.  This is the mechanism behind
  magnitude underestimation of static pushes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class SensorModel(Enum):
    RIGID = "rigid"
    SPRING = "spring"


@dataclass(frozen=True)
class ActuatorParams:
    """Drivetrain parameters shared by the three wheel actuators."""

    k_sensor: float = 2500.0        # torsional sensor stiffness [N m / rad]
    c_sensor: float = 2.0           # sensor-internal damping [N m s / rad]
    m_rotor: float = 0.05           # reflected rotor inertia [kg m^2]
    B1: float = 0.05                # motor-side viscous damping [N m s / rad]
    B2: float = 0.0                 # load-side viscous damping [N m s / rad]
    stiction_torque: float = 1.5    # breakaway torque at the wheel [N m]
    sensor_stiction: float = 0.0    # at-rest reading absorber [N m]
    torque_noise_sd: float = 0.0    # sensor noise std [N m]
    sample_rate: float = 1000.0     # sensor sampling rate [Hz]
    tau_max: float = 6.0            # motor torque clamp [N m]
    tau_slew: float = 100.0         # command slew limit [N m / s]

    def __post_init__(self):
        if self.k_sensor <= 0.0:
            raise ValueError("k_sensor must be > 0")
        if self.sample_rate < 100.0:
            raise ValueError("sample_rate must be >= 100 Hz")


@dataclass(frozen=True)
class PDGains:
    kp: float = 200.0   # N m / rad
    kd: float = 4.0     # N m s / rad

    def __post_init__(self):
        if self.kp < 0.0 or self.kd < 0.0:
            raise ValueError("PD gains must be >= 0")


def sensor_torque(spring_deflection: float, p: ActuatorParams,
                  rng: np.random.Generator | None = None) -> float:
    """Sensor reading for a given torsional deflection.

    Noiseless unless an ``rng`` is supplied and ``torque_noise_sd > 0``.
    """
    tau = p.k_sensor * spring_deflection
    if rng is not None and p.torque_noise_sd > 0.0:
        tau += p.torque_noise_sd * rng.standard_normal()
    return tau


def pd_servo(q_des: float, qdot_des: float, q: float, qdot: float,
             g: PDGains, tau_max: float = math.inf) -> float:
    """PD control law ``kp (q_des - q) + kd (qdot_des - qdot)``, clamped."""
    tau = g.kp * (q_des - q) + g.kd * (qdot_des - qdot)
    return min(tau_max, max(-tau_max, tau))


def external_torque_estimate_1dof(tau_s: float, x_ddot: float,
                                  trac_model: float, p: ActuatorParams,
                                  load_inertia: float, qdot: float = 0.0) -> float:
    """Single-actuator external torque residual.

    ``tau_ext = -tau_trac + B2 qdot + M xddot - tau_s`` with the load-side
    torque balance sign convention (environment torque positive on the
    load).
    """
    return -trac_model + p.B2 * qdot + load_inertia * x_ddot - tau_s


def static_sensor_reading(load_torque: np.ndarray, p: ActuatorParams,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Readings while the drivetrain is at rest: the structure absorbs up
    to ``sensor_stiction`` of each load torque before the sensor."""
    tau = np.asarray(load_torque, dtype=float)
    c = p.sensor_stiction
    out = np.sign(tau) * np.maximum(np.abs(tau) - c, 0.0)
    if rng is not None and p.torque_noise_sd > 0.0:
        out = out + p.torque_noise_sd * rng.standard_normal(out.shape)
    return out


class Drivetrain:
    """State of the three wheel actuators inside the simulator.

    In SPRING mode each actuator carries a motor-rotor angle/rate; the
    transmitted torque ``k (q_m - q_w) + c (qdot_m - qdot_w)`` drives the
    wheel and is what the sensor reads.  In RIGID mode the commanded
    (clamped) torque is delivered and read directly.
    """

    def __init__(self, params: ActuatorParams, model: SensorModel = SensorModel.SPRING):
        self.params = params
        self.model = model
        self.q_m = np.zeros(3)
        self.qdot_m = np.zeros(3)
        self.command = np.zeros(3)

    def reset_to(self, q_w: np.ndarray):
        self.q_m = np.array(q_w, dtype=float)
        self.qdot_m = np.zeros(3)
        self.command = np.zeros(3)

    def set_command(self, tau_cmd: np.ndarray, dt: float | None = None):
        """Clamp to ``tau_max``; when ``dt`` is given also slew-limit the
        change from the previous command (drive current-loop ramp)."""
        tm = self.params.tau_max
        target = np.clip(np.asarray(tau_cmd, dtype=float), -tm, tm)
        if dt is not None and math.isfinite(self.params.tau_slew):
            step = self.params.tau_slew * dt
            target = np.clip(target, self.command - step, self.command + step)
        self.command = target

    def delivered_torque(self, q_w: np.ndarray, qdot_w: np.ndarray) -> np.ndarray:
        """Torque currently delivered to the wheels (= sensed torque)."""
        if self.model is SensorModel.RIGID:
            return self.command.copy()
        p = self.params
        return (p.k_sensor * (self.q_m - q_w)
                + p.c_sensor * (self.qdot_m - qdot_w))

    def step_rotor(self, q_w: np.ndarray, qdot_w: np.ndarray, dt: float):
        """Semi-implicit update of the rotor states (SPRING mode only)."""
        if self.model is SensorModel.RIGID:
            return
        p = self.params
        tau_spring = self.delivered_torque(q_w, qdot_w)
        acc = (self.command - p.B1 * self.qdot_m - tau_spring) / p.m_rotor
        self.qdot_m = self.qdot_m + dt * acc
        self.q_m = self.q_m + dt * self.qdot_m
