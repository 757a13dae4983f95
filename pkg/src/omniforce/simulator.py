"""Deterministic fixed-step world: base, drivetrain, dummy, bumpers.

Physics runs at ``dt`` (default 1e-4 s, semi-implicit Euler) with control,
sensing and estimation at 1 kHz.  The gyroscopic coupling from the
reflected wheel/roller inertias is integrated with a midpoint (trapezoid)
velocity term, which keeps it exactly workless in discrete time; motor,
friction and contact work are accumulated with midpoint velocities so the
discrete energy balance closes to rounding error.

The random seed governs sensor noise only; identical configs and seeds
produce bit-identical traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import geometry
from .actuator import ActuatorParams, Drivetrain, PDGains, SensorModel, static_sensor_reading
from .controller import (
    AdmittanceParams,
    JointSpaceConverter,
    Mode,
    Supervisor,
    SupervisorConfig,
    escape_trajectory,
    escape_velocity,
)
from .dynamics import (
    ModelVariant,
    effective_mass_matrix,
    ext_point_jacobian,
    kinetic_energy,
)
from .estimator import EstimatorConfig, StreamingEstimator
from .kinematics import (
    RobotParams,
    roller_jacobian,
    wheel_jacobian,
    wheel_jacobian_inverse,
)

SPEED_LIMIT = 100.0  # m/s; above this the integration has blown up

TRACE_COLUMNS = [
    "t", "x", "y", "theta", "xdot", "ydot", "thetadot",
    "qw0", "qw1", "qw2", "tau_s0", "tau_s1", "tau_s2",
    "dummy_s", "dummy_sdot", "bumper_defl",
    "Fx_true", "Fy_true", "Fx_est", "Fy_est", "px_est", "py_est", "mode",
]


class SimulationUnstable(RuntimeError):
    """Raised when any speed exceeds the instability guard."""


class BumperKind(Enum):
    PU = "PU"
    SPRING = "SPRING"
    MAGNET = "MAGNET"


@dataclass
class BumperModel:
    """Dummy-face bumper: Kelvin-Voigt spring/damper with optional
    magnetic latch preload and a stiff bottom-out beyond full travel."""

    kind: BumperKind = BumperKind.PU
    k_b: float = 20000.0        # N/m
    c_b: float = 50.0           # N s/m
    travel_max: float = 0.05    # m
    bottom_k: float = 5000.0    # N/m once travel is exhausted
    latch_force: float = 30.0   # N (MAGNET only)
    latch_travel: float = 5e-4  # m of preloaded travel before breakaway
    latch_engaged: bool = True


def bumper_force(deflection: float, deflection_rate: float, b: BumperModel) -> float:
    """Contact force for a given bumper compression; pushing only (>= 0).

    MAGNET adds the latch preload while engaged; the latch breaks after
    ``latch_travel`` of compression and re-engages only once the bumper
    fully extends again.
    """
    if deflection <= 0.0:
        if b.kind is BumperKind.MAGNET:
            b.latch_engaged = True
        return 0.0
    f = b.k_b * deflection + b.c_b * deflection_rate
    if b.kind is BumperKind.MAGNET:
        if b.latch_engaged:
            f += b.latch_force
            if deflection > b.latch_travel:
                b.latch_engaged = False
    if deflection > b.travel_max:
        f += b.bottom_k * (deflection - b.travel_max)
    return max(0.0, f)


@dataclass
class DummyState:
    """One-DOF slider dummy pulled by a constant (finite-travel) force.

    The tip travels from ``tip_start`` along the unit ``axis``; ``s`` is
    the advance.  A rigid end stop blocks retreat behind ``s = 0`` and the
    pull force acts while ``s < pull_travel`` (the hanging weight lands
    after that much travel).
    """

    tip_start: np.ndarray = field(default_factory=lambda: np.zeros(2))
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    s: float = 0.0
    sdot: float = 0.0
    mass_total: float = 10.0
    pull_force: float = 0.0
    pull_travel: float = math.inf
    slider_friction: float = 0.0

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(self.axis)
        if n == 0.0:
            raise ValueError("dummy axis must be nonzero")
        self.axis = self.axis / n
        self.tip_start = np.asarray(self.tip_start, dtype=float)

    @property
    def tip(self) -> np.ndarray:
        return self.tip_start + self.s * self.axis

    @property
    def tip_velocity(self) -> np.ndarray:
        return self.sdot * self.axis


@dataclass
class ScheduledPush:
    """Synthetic hand-push: force ramp applied at a body-fixed point."""

    t_on: float
    t_off: float
    force: np.ndarray            # world frame, N (2,)
    point_body: np.ndarray       # body frame, m (2,)
    ramp: float = 0.0            # s to reach full force

    def active_force(self, t: float) -> np.ndarray | None:
        if t < self.t_on or t >= self.t_off:
            return None
        f = np.asarray(self.force, dtype=float)
        if self.ramp > 0.0:
            f = f * min(1.0, (t - self.t_on) / self.ramp)
        return f


@dataclass
class ContactInfo:
    force: np.ndarray            # wrench force on body, world (2,)
    point: np.ndarray            # world application point (2,)
    deflection: float
    on_wheel: bool = False
    wheel_index: int = -1


def resolve_contact(x: float, y: float, theta: float, tip, p: RobotParams):
    """Penetration of the dummy tip into the body outline.

    Returns ``(depth, outward_normal, surface_point, on_wheel, wheel_idx)``
    or ``None`` when there is no overlap.  Where the tip lies inside
    several shapes the shallowest penetration wins (minimum translation).
    """
    return _resolve_contact_outline(geometry.body_outline(x, y, theta, p), tip)


def _resolve_contact_outline(outline, tip):
    best = None
    tri = geometry.triangle_penetration(tip, outline)
    if tri is not None:
        best = (*tri, False, -1)
    for i in range(3):
        disc = geometry.disc_penetration(tip, outline.wheel_centers[i],
                                         outline.wheel_radius)
        if disc is not None and (best is None or disc[0] < best[0]):
            best = (*disc, True, i)
    return best


@dataclass
class SimTrace:
    """Per-control-tick record of a run; uniform timestep, monotone time."""

    columns: list = field(default_factory=lambda: list(TRACE_COLUMNS))
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        if name == "mode":
            return np.array([r[i] for r in self.rows], dtype=object)
        return np.array([float(r[i]) for r in self.rows])

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "SimTrace":
        trace = cls()
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            trace.columns = header.split(",")
            for line in fh:
                parts = line.rstrip("\n").split(",")
                row = []
                for name, val in zip(trace.columns, parts):
                    row.append(val if name == "mode" else float(val))
                trace.append(row)
        return trace


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), ".12g")


@dataclass
class WorldOptions:
    dt: float = 1e-4                   # physics step [s]
    control_rate: float = 1000.0       # Hz
    motors_on: bool = True
    controller_on: bool = True
    stiction_on: bool = True
    noise_on: bool = False
    seed: int = 0
    contact_height: float = 0.25       # m, for the tip-over proxy
    rest_rate: float = 0.05            # rad/s; below this the reading absorber acts

    def __post_init__(self):
        if not (1e-5 <= self.dt <= 1e-3):
            raise ValueError("dt must lie in [1e-5, 1e-3] s")


class World:
    """Complete scenario world stepped one control tick at a time."""

    def __init__(self, p: RobotParams, actuator: ActuatorParams,
                 gains: PDGains, options: WorldOptions,
                 sensor_model: SensorModel = SensorModel.SPRING,
                 estimator_cfg: EstimatorConfig | None = None,
                 admittance: AdmittanceParams | None = None,
                 supervisor_cfg: SupervisorConfig | None = None,
                 trajectory=None,
                 dummy: DummyState | None = None,
                 bumper: BumperModel | None = None,
                 pushes: list | None = None,
                 initial_pose=(0.0, 0.0, 0.0),
                 model_variant: ModelVariant = ModelVariant.FULL,
                 torque_override=None):
        self.p = p
        self.actuator_params = actuator
        self.gains = gains
        self.opt = options
        self.variant = model_variant
        self.rng = np.random.default_rng(options.seed)

        self.pose = np.array(initial_pose, dtype=float)
        self.vel = np.zeros(3)
        self.q_w = np.zeros(3)
        self.q_r = np.zeros(3)
        self.time = 0.0

        self.drivetrain = Drivetrain(actuator, sensor_model)
        self.sensor_model = sensor_model
        self.dummy = dummy
        self.bumper = bumper
        self.pushes = list(pushes) if pushes else []
        self.torque_override = torque_override

        est_cfg = estimator_cfg or EstimatorConfig()
        self.estimator = StreamingEstimator(p, est_cfg, initial_pose=initial_pose)
        adm = admittance or AdmittanceParams()
        sup_cfg = supervisor_cfg or SupervisorConfig(threshold=est_cfg.threshold)
        self.admittance = adm
        self.supervisor = Supervisor(adm, sup_cfg)
        self.trajectory = trajectory
        self.dt_control = 1.0 / options.control_rate
        self.n_sub = max(1, int(round(self.dt_control / options.dt)))
        self.converter = JointSpaceConverter(p, self.q_w, self.dt_control)
        self._prev_mode = Mode.TRACKING

        self.locked = bool(options.stiction_on and not options.motors_on)
        self._outline_key = None
        self._outline_val = None
        self._jinvT_key = None
        self._jinvT_val = None
        self.Meff = effective_mass_matrix(0.0, p, self.variant)
        # Meff is diagonal and heading-invariant for the 0/120/240 layout
        self._m_xy = float(self.Meff[0, 0])
        self._i_zz = float(self.Meff[2, 2])
        if self.variant is ModelVariant.FULL:
            self._kappa = 1.5 * (p.I_wheel / p.r_w ** 2 + p.I_roller / p.r_r ** 2)
        else:
            self._kappa = 0.0
        self._phi = np.array(p.phi)
        self.trace = SimTrace()
        self.tau_s = np.zeros(3)
        self.last_contact: ContactInfo | None = None
        self.tip_proxy_max = 0.0

        # energy bookkeeping
        self.energy0 = kinetic_energy(self.pose[2], self.vel, p, self.variant)
        self.work_motor = 0.0
        self.work_friction = 0.0
        self.work_external = 0.0

    # ------------------------------------------------------------------
    # external forces
    # ------------------------------------------------------------------
    def _outline(self):
        key = (self.pose[0], self.pose[1], self.pose[2])
        if key != self._outline_key:
            self._outline_key = key
            self._outline_val = geometry.body_outline(*key, self.p)
        return self._outline_val

    def _jinv_T(self):
        th = self.pose[2]
        if th != self._jinvT_key:
            self._jinvT_key = th
            self._jinvT_val = wheel_jacobian_inverse(th, self.p).T
        return self._jinvT_val

    def _contact(self) -> ContactInfo | None:
        if self.dummy is None or self.bumper is None:
            return None
        hit = _resolve_contact_outline(self._outline(), self.dummy.tip)
        if hit is None:
            # fully extended again: allow the magnet to re-latch
            bumper_force(0.0, 0.0, self.bumper)
            return None
        depth, n_out, q_surf, on_wheel, wheel_idx = hit
        v_tip = self.dummy.tip_velocity
        r = q_surf - self.pose[:2]
        v_surf = self.vel[:2] + self.vel[2] * np.array([-r[1], r[0]])
        rate = -float((v_tip - v_surf) @ n_out)
        f = bumper_force(depth, rate, self.bumper)
        return ContactInfo(force=-f * n_out, point=q_surf, deflection=depth,
                           on_wheel=on_wheel, wheel_index=wheel_idx)

    def _external_generalized(self, contact: ContactInfo | None):
        """Generalized external force on the base coordinates plus the
        total true force vector for the trace."""
        q_ext = np.zeros(3)
        f_total = np.zeros(2)
        if contact is not None:
            Jext = ext_point_jacobian(self.pose[:2], contact.point)
            q_ext += Jext.T @ np.array([contact.force[0], contact.force[1], 0.0])
            f_total += contact.force
        for push in self.pushes:
            f = push.active_force(self.time)
            if f is None:
                continue
            c, s = math.cos(self.pose[2]), math.sin(self.pose[2])
            rot = np.array([[c, -s], [s, c]])
            point = self.pose[:2] + rot @ push.point_body
            Jext = ext_point_jacobian(self.pose[:2], point)
            q_ext += Jext.T @ np.array([f[0], f[1], 0.0])
            f_total += f
        return q_ext, f_total

    # ------------------------------------------------------------------
    # sensing / control
    # ------------------------------------------------------------------
    def _sample_sensors(self, q_ext: np.ndarray):
        ap = self.actuator_params
        noise_rng = self.rng if (self.opt.noise_on and ap.torque_noise_sd > 0.0) else None
        if self.locked:
            tau_load = -self._jinv_T() @ q_ext
            self.tau_s = static_sensor_reading(tau_load, ap, noise_rng)
            return
        if not self.opt.motors_on:
            # freewheeling drivetrain transmits nothing
            tau = np.zeros(3)
            if noise_rng is not None:
                tau = tau + ap.torque_noise_sd * noise_rng.standard_normal(3)
            self.tau_s = tau
            return
        qdot_w = wheel_jacobian(self.pose[2], self.p) @ self.vel
        tau = self.drivetrain.delivered_torque(self.q_w, qdot_w)
        if ap.sensor_stiction > 0.0:
            at_rest = np.abs(qdot_w) < self.opt.rest_rate
            shrunk = np.sign(tau) * np.maximum(np.abs(tau) - ap.sensor_stiction, 0.0)
            tau = np.where(at_rest, shrunk, tau)
        if noise_rng is not None:
            tau = tau + ap.torque_noise_sd * noise_rng.standard_normal(3)
        self.tau_s = tau

    def _control(self):
        if not (self.opt.motors_on and self.opt.controller_on):
            self.drivetrain.set_command(np.zeros(3), self.dt_control)
            return Mode.TRACKING.value
        est = self.estimator
        mode_state = self.supervisor.update(
            self.time, est.pose, est.filtered_wrench, est.detector.triggered)
        mode = mode_state.mode
        if mode is not self._prev_mode:
            self.converter.anchor(self.q_w if self.sensor_model is SensorModel.RIGID
                                  else self.drivetrain.q_m)
            if mode is Mode.TRACKING and self.trajectory is not None:
                self.trajectory.rebase(est.pose, self.time)
            self._prev_mode = mode
        if mode is Mode.ESCAPING:
            te = self.time - mode_state.t_switch
            pose_des = escape_trajectory(te, mode_state.F_trigger,
                                         self.admittance, mode_state.x0)
            vel_des = escape_velocity(te, mode_state.F_trigger, self.admittance)
        elif self.trajectory is not None:
            pose_des, vel_des = self.trajectory.sample(self.time)
        else:
            pose_des, vel_des = est.pose.copy(), np.zeros(3)
        q_des, qdot_des = self.converter.step(vel_des, est.pose[2])

        if self.sensor_model is SensorModel.RIGID:
            q_meas, qdot_meas = self.q_w, wheel_jacobian(self.pose[2], self.p) @ self.vel
        else:
            q_meas, qdot_meas = self.drivetrain.q_m, self.drivetrain.qdot_m
        g = self.gains
        cmd = g.kp * (q_des - q_meas) + g.kd * (qdot_des - qdot_meas)
        self.drivetrain.set_command(cmd, self.dt_control)
        return mode.value

    # ------------------------------------------------------------------
    # physics
    # ------------------------------------------------------------------
    def _check_breakaway(self, q_ext: np.ndarray):
        if not self.locked:
            return
        tau_load = -self._jinv_T() @ q_ext
        if np.any(np.abs(tau_load) > self.actuator_params.stiction_torque):
            self.locked = False

    def _substep(self, dt: float):
        contact = self._contact()
        q_ext, _ = self._external_generalized(contact)
        self._check_breakaway(q_ext)

        if not self.locked:
            p = self.p
            theta, thetadot = self.pose[2], self.vel[2]
            phase = theta + self._phi
            s_arr = np.sin(phase)
            c_arr = np.cos(phase)
            vx, vy = self.vel[0], self.vel[1]
            qdot_w = (-s_arr * vx + c_arr * vy + p.R * thetadot) / p.r_w
            qdot_r = (c_arr * vx + s_arr * vy) / p.r_r
            if self.torque_override is not None:
                T = np.asarray(self.torque_override(self.time), dtype=float)
            elif self.opt.motors_on:
                T = self.drivetrain.delivered_torque(self.q_w, qdot_w)
            else:
                T = np.zeros(3)
            Br = p.B_r_mag * np.tanh(p.alpha * qdot_r)
            fx = (-float(s_arr @ T)) / p.r_w - float(c_arr @ Br) / p.r_r + q_ext[0]
            fy = float(c_arr @ T) / p.r_w - float(s_arr @ Br) / p.r_r + q_ext[1]
            ftheta = p.R * float(np.sum(T)) / p.r_w + q_ext[2]

            # midpoint-implicit gyroscopic term: exactly workless discretely
            m = self._m_xy
            h = 0.5 * dt * self._kappa * thetadot
            bx = m * vx - h * vy + dt * fx
            by = h * vx + m * vy + dt * fy
            det = m * m + h * h
            vx_new = (m * bx - h * by) / det
            vy_new = (h * bx + m * by) / det
            w_new = thetadot + dt * ftheta / self._i_zz

            vmx = 0.5 * (vx + vx_new)
            vmy = 0.5 * (vy + vy_new)
            vmw = 0.5 * (thetadot + w_new)
            qdw_mid = (-s_arr * vmx + c_arr * vmy + p.R * vmw) / p.r_w
            qdr_mid = (c_arr * vmx + s_arr * vmy) / p.r_r
            self.work_motor += dt * float(T @ qdw_mid)
            self.work_friction += dt * float(Br @ qdr_mid)
            self.work_external += dt * (q_ext[0] * vmx + q_ext[1] * vmy + q_ext[2] * vmw)

            if (abs(vx_new) > SPEED_LIMIT or abs(vy_new) > SPEED_LIMIT
                    or abs(w_new) > 10.0 * SPEED_LIMIT):
                raise SimulationUnstable(
                    f"speed limit exceeded at t={self.time:.4f}s")
            self.vel[0], self.vel[1], self.vel[2] = vx_new, vy_new, w_new
            self.pose = self.pose + dt * self.vel
            phase = self.pose[2] + self._phi
            s_arr = np.sin(phase)
            c_arr = np.cos(phase)
            qdot_w_new = (-s_arr * vx_new + c_arr * vy_new + p.R * w_new) / p.r_w
            qdot_r_new = (c_arr * vx_new + s_arr * vy_new) / p.r_r
            self.q_w = self.q_w + dt * qdot_w_new
            self.q_r = self.q_r + dt * qdot_r_new
            if self.opt.motors_on:
                self.drivetrain.step_rotor(self.q_w, qdot_w_new, dt)
            # relock only if stiction is on, motors are off and motion died out
            if (self.opt.stiction_on and not self.opt.motors_on
                    and np.all(np.abs(qdot_w_new) < 1e-4)
                    and np.linalg.norm(self.vel) < 1e-5):
                tau_load = -wheel_jacobian_inverse(self.pose[2], self.p).T @ q_ext
                if np.all(np.abs(tau_load) <= self.actuator_params.stiction_torque):
                    self.locked = True
                    self.vel = np.zeros(3)

        if self.dummy is not None:
            d = self.dummy
            f_axis = 0.0
            if contact is not None:
                f_axis += float(-contact.force @ d.axis)
            if d.pull_force != 0.0 and d.s < d.pull_travel:
                f_axis += d.pull_force
            if d.slider_friction > 0.0 and abs(d.sdot) > 1e-6:
                f_axis -= d.slider_friction * math.copysign(1.0, d.sdot)
            d.sdot += dt * f_axis / d.mass_total
            d.s += dt * d.sdot
            if d.s < 0.0:
                d.s = 0.0
                d.sdot = max(d.sdot, 0.0)
            if abs(d.sdot) > SPEED_LIMIT:
                raise SimulationUnstable("dummy speed limit exceeded")

        if contact is not None and self.opt.contact_height > 0.0:
            f = float(np.linalg.norm(contact.force))
            restoring = self.p.M_body * 9.81 * (self.p.R / 2.0)
            proxy = f * self.opt.contact_height / restoring
            self.tip_proxy_max = max(self.tip_proxy_max, proxy)

        self.time += dt

    def step_control_tick(self):
        """One 1 kHz tick: sense, estimate, control, substep, record."""
        contact = self._contact()
        q_ext, f_true = self._external_generalized(contact)
        self._check_breakaway(q_ext)
        self._sample_sensors(q_ext)
        self.estimator.update(self.q_w, self.tau_s)
        mode = self._control()

        est = self.estimator
        ce = est.last_estimate
        row = [
            self.time, self.pose[0], self.pose[1], self.pose[2],
            self.vel[0], self.vel[1], self.vel[2],
            self.q_w[0], self.q_w[1], self.q_w[2],
            self.tau_s[0], self.tau_s[1], self.tau_s[2],
            self.dummy.s if self.dummy else 0.0,
            self.dummy.sdot if self.dummy else 0.0,
            contact.deflection if contact else 0.0,
            f_true[0], f_true[1],
            est.filtered_wrench[0], est.filtered_wrench[1],
            ce.point[0] if ce is not None else math.nan,
            ce.point[1] if ce is not None else math.nan,
            mode,
        ]
        self.trace.append(row)

        sub_dt = self.dt_control / self.n_sub
        for _ in range(self.n_sub):
            self._substep(sub_dt)

    def run(self, duration: float):
        ticks = int(round(duration / self.dt_control))
        for _ in range(ticks):
            self.step_control_tick()
        return self.trace

    @property
    def kinetic_energy(self) -> float:
        return kinetic_energy(self.pose[2], self.vel, self.p, self.variant)

    def energy_balance_error(self) -> float:
        """|dKE - (W_motor - W_friction + W_external)| of the run so far."""
        dke = self.kinetic_energy - self.energy0
        return abs(dke - (self.work_motor - self.work_friction + self.work_external))
