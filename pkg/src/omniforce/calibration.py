"""Roller-friction identification from arc-motion torque traces.

Drives the wheel-space calibration trajectories, predicts nominal torques
over a (B_r, alpha) grid and picks the pair minimizing the RMS mismatch
against measured torques, followed by a short coordinate-descent
refinement.  The first half period of each trace is discarded as
transient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dynamics import GeneralizedState, ModelVariant, mass_matrix, nominal_torque
from .kinematics import (
    BaseState,
    RobotParams,
    roller_jacobian,
    roller_jacobian_dot,
    wheel_jacobian_dot,
    wheel_jacobian_inverse,
)

B_R_GRID = np.round(np.arange(0.0, 1.0 + 1e-9, 0.01), 10)
ALPHA_GRID = np.geomspace(0.05, 5.0, 50)


class TrajectoryId(Enum):
    ARC_W0 = "ARC_W0"
    PIVOT_W2 = "PIVOT_W2"


class FitDegenerate(RuntimeError):
    """RMS surface flat over the whole grid; nothing to identify."""


@dataclass
class CalibrationTrajectory:
    """Wheel-angle time series with analytic first/second derivatives."""

    trajectory_id: TrajectoryId
    omega: float
    t: np.ndarray
    q_w: np.ndarray      # (n, 3)
    qdot_w: np.ndarray
    qddot_w: np.ndarray


@dataclass
class CalibrationRun:
    trajectory_id: TrajectoryId
    omega: float
    duration: float
    measured_torques: np.ndarray
    fitted: tuple = (math.nan, math.nan)
    rms_error: float = math.nan


def generate_calibration_trajectory(traj_id: TrajectoryId, omega: float,
                                    duration: float,
                                    sample_rate: float = 1000.0) -> CalibrationTrajectory:
    """Sinusoidal wheel trajectories used for friction calibration.

    ARC_W0 drives wheel 0 with ``q = 3/2 - 3/2 cos(2 pi omega t)`` while
    wheels 1 and 2 hold; PIVOT_W2 drives wheels 0 and 1 with the same
    sinusoid (in phase) while wheel 2 holds.
    """
    if omega <= 0.0:
        raise ValueError("omega must be > 0")
    if duration * omega < 2.0:
        raise ValueError("duration must cover at least two periods")
    n = int(round(duration * sample_rate)) + 1
    t = np.arange(n) / sample_rate
    w = 2.0 * math.pi * omega
    q = 1.5 - 1.5 * np.cos(w * t)
    qd = 1.5 * w * np.sin(w * t)
    qdd = 1.5 * w * w * np.cos(w * t)
    q_w = np.zeros((n, 3))
    qdot_w = np.zeros((n, 3))
    qddot_w = np.zeros((n, 3))
    driven = (0,) if traj_id is TrajectoryId.ARC_W0 else (0, 1)
    for i in driven:
        q_w[:, i] = q
        qdot_w[:, i] = qd
        qddot_w[:, i] = qdd
    return CalibrationTrajectory(traj_id, omega, t, q_w, qdot_w, qddot_w)


@dataclass
class _Chain:
    """Kinematic chain evaluated along a trajectory (friction-independent)."""

    inertial_torque: np.ndarray    # (n, 3) torque with B_r = 0
    friction_map: np.ndarray       # (n, 3, 3) maps B_r vector to torque
    qdot_r: np.ndarray             # (n, 3)


def _integrate_chain(traj: CalibrationTrajectory, p: RobotParams,
                     variant: ModelVariant = ModelVariant.FULL) -> _Chain:
    """Integrate the base pose along the wheel trajectory and evaluate the
    friction-independent parts of the nominal torque model."""
    n = len(traj.t)
    dt = traj.t[1] - traj.t[0]
    pose = np.zeros(3)
    inertial = np.zeros((n, 3))
    fmap = np.zeros((n, 3, 3))
    qdot_r_all = np.zeros((n, 3))
    M = mass_matrix(p)
    for k in range(n):
        theta = pose[2]
        Jinv = wheel_jacobian_inverse(theta, p)
        vel = Jinv @ traj.qdot_w[k]
        thetadot = vel[2]
        dJw = wheel_jacobian_dot(theta, thetadot, p)
        dJinv = -Jinv @ dJw @ Jinv
        acc = Jinv @ traj.qddot_w[k] + dJinv @ traj.qdot_w[k]
        Jr = roller_jacobian(theta, p)
        dJr = roller_jacobian_dot(theta, thetadot, p)
        qdot_r = Jr @ vel
        qddot_r = Jr @ acc + dJr @ vel
        JwinvT = Jinv.T
        base = JwinvT @ (M @ acc)
        if variant is ModelVariant.FULL:
            base = base + JwinvT @ (Jr.T @ (p.I_roller * qddot_r)) \
                + p.I_wheel * traj.qddot_w[k]
        inertial[k] = base
        fmap[k] = JwinvT @ Jr.T
        qdot_r_all[k] = qdot_r
        pose = pose + dt * vel
    return _Chain(inertial, fmap, qdot_r_all)


def predict_torques(traj: CalibrationTrajectory, p: RobotParams,
                    variant: ModelVariant = ModelVariant.FULL) -> np.ndarray:
    """Nominal torque-sensor series the calibration model predicts for the
    given parameters along a trajectory (perfect tracking)."""
    chain = _integrate_chain(traj, p, variant)
    fr = p.B_r_mag * np.tanh(p.alpha * chain.qdot_r)
    return chain.inertial + np.einsum("nij,nj->ni", chain.friction_map, fr)


def _rms(pred: np.ndarray, meas: np.ndarray, skip: int) -> float:
    d = pred[skip:] - meas[skip:]
    return math.sqrt(float(np.mean(d * d)))


def fit_roller_friction(measured: np.ndarray, traj: CalibrationTrajectory,
                        p: RobotParams,
                        variant: ModelVariant = ModelVariant.FULL,
                        noise_floor: float = 1e-9):
    """Grid search over (B_r, alpha) plus coordinate-descent refinement.

    Returns ``(B_r, alpha, rms)``.  Ties resolve to the smaller B_r, then
    the smaller alpha, so results are deterministic.

    Raises
    ------
    FitDegenerate
        If the RMS surface is flat to within ``noise_floor``.
    """
    measured = np.asarray(measured, dtype=float)
    if measured.shape != traj.q_w.shape:
        raise ValueError("measured series must match trajectory samples")
    dt = traj.t[1] - traj.t[0]
    skip = int(round(0.5 / traj.omega / dt))  # first half period
    chain = _integrate_chain(traj, p, variant)

    resid0 = measured - chain.inertial  # friction must explain this

    def rms_for(b_r: float, alpha: float) -> float:
        fr = b_r * np.tanh(alpha * chain.qdot_r)
        pred_fr = np.einsum("nij,nj->ni", chain.friction_map, fr)
        d = pred_fr[skip:] - resid0[skip:]
        return math.sqrt(float(np.mean(d * d)))

    # vectorized grid pass: friction torque is linear in B_r given alpha
    best = (math.inf, 0.0, ALPHA_GRID[0])
    worst = -math.inf
    for alpha in ALPHA_GRID:
        g = np.einsum("nij,nj->ni", chain.friction_map,
                      np.tanh(alpha * chain.qdot_r))[skip:]
        r = resid0[skip:]
        gg = float(np.sum(g * g))
        gr = float(np.sum(g * r))
        rr = float(np.sum(r * r))
        n = g.shape[0] * g.shape[1]
        for b_r in B_R_GRID:
            val = math.sqrt(max(0.0, (b_r * b_r * gg - 2.0 * b_r * gr + rr) / n))
            if val < best[0] - 1e-15:
                best = (val, float(b_r), float(alpha))
            worst = max(worst, val)
    if worst - best[0] < noise_floor:
        raise FitDegenerate("rms surface is flat over the search grid")

    rms, b_r, alpha = best
    db = 0.01
    alpha_idx = int(np.argmin(np.abs(ALPHA_GRID - alpha)))
    da = (ALPHA_GRID[min(alpha_idx + 1, len(ALPHA_GRID) - 1)]
          - ALPHA_GRID[max(alpha_idx - 1, 0)]) / 2.0
    for _ in range(3):
        for b in np.linspace(b_r - db, b_r + db, 11):
            if b < 0.0:
                continue
            val = rms_for(b, alpha)
            if val < rms - 1e-15:
                rms, b_r = val, float(b)
        for a in np.linspace(max(alpha - da, 1e-4), alpha + da, 11):
            val = rms_for(b_r, a)
            if val < rms - 1e-15:
                rms, alpha = val, float(a)
        db /= 4.0
        da /= 4.0
    return b_r, alpha, rms


def run_calibration(p: RobotParams, traj_id: TrajectoryId = TrajectoryId.ARC_W0,
                    omega: float = 0.2, duration: float = 10.0,
                    noise_sd: float = 0.0, seed: int = 0) -> CalibrationRun:
    """Generate FULL-model data with the configured friction parameters and
    fit them back (self-consistency path, optionally with sensor noise)."""
    traj = generate_calibration_trajectory(traj_id, omega, duration)
    measured = predict_torques(traj, p, ModelVariant.FULL)
    if noise_sd > 0.0:
        rng = np.random.default_rng(seed)
        measured = measured + noise_sd * rng.standard_normal(measured.shape)
    fit_params = replace(p)  # fitted against the same geometry
    b_r, alpha, rms = fit_roller_friction(measured, traj, fit_params)
    return CalibrationRun(trajectory_id=traj_id, omega=omega, duration=duration,
                          measured_torques=measured, fitted=(b_r, alpha),
                          rms_error=rms)
