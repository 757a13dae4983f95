"""Coupled constrained dynamics of the base, wheels and rollers.

Two model variants are provided:

* ``FULL`` keeps the wheel and roller inertias.  The simulator uses it as
  ground truth.
* ``REDUCED`` neglects wheel/roller inertia and wheel-output damping.  The
  force estimator uses it, deliberately mismatched against the FULL
  simulator the way the hardware estimator is mismatched against reality.

The external wrench convention is physical: ``F_ext`` is the force/torque
applied *to* the robot in the world frame, and enters the body equations
as ``+J_ext^T F_ext``.  A static inward push therefore round-trips through
the residual equations to the same inward wrench.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kinematics import (
    BaseState,
    RobotParams,
    WheelState,
    roller_jacobian,
    roller_jacobian_dot,
    wheel_jacobian,
    wheel_jacobian_dot,
    wheel_jacobian_inverse,
)


class ModelVariant(Enum):
    FULL = "full"
    REDUCED = "reduced"


@dataclass
class GeneralizedState:
    """Full 9-coordinate state: Cartesian base plus wheel/roller joints."""

    base: BaseState = field(default_factory=BaseState)
    wheels: WheelState = field(default_factory=WheelState)

    @classmethod
    def from_base_motion(cls, base: BaseState, p: RobotParams) -> "GeneralizedState":
        """Populate wheel/roller rates and accelerations from the constraints."""
        Jw = wheel_jacobian(base.theta, p)
        Jr = roller_jacobian(base.theta, p)
        dJw = wheel_jacobian_dot(base.theta, base.thetadot, p)
        dJr = roller_jacobian_dot(base.theta, base.thetadot, p)
        v = base.vel
        a = base.acc
        w = WheelState(
            qdot_w=Jw @ v, qdot_r=Jr @ v,
            qddot_w=Jw @ a + dJw @ v, qddot_r=Jr @ a + dJr @ v,
        )
        return cls(base=base, wheels=w)


@dataclass
class ConstraintForces:
    """Lagrange multipliers of the wheel and roller rolling constraints."""

    lambda_w: np.ndarray
    lambda_r: np.ndarray


def roller_friction(qdot_r: np.ndarray, p: RobotParams) -> np.ndarray:
    """Coulomb roller friction torque, tanh-regularized.

    ``B_i = B_r_mag * tanh(alpha * qdot_r_i)``; odd in each rate and
    strictly inside ``(-B_r_mag, B_r_mag)``.
    """
    return p.B_r_mag * np.tanh(p.alpha * np.asarray(qdot_r, dtype=float))


def mass_matrix(p: RobotParams) -> np.ndarray:
    """Body-block mass matrix diag(M, M, I_body)."""
    return np.diag([p.M_body, p.M_body, p.I_body])


def effective_mass_matrix(theta: float, p: RobotParams,
                          variant: ModelVariant = ModelVariant.FULL) -> np.ndarray:
    """Body mass matrix with wheel/roller inertias reflected through the
    constraints (FULL) or without them (REDUCED)."""
    M = mass_matrix(p)
    if variant is ModelVariant.FULL:
        Jw = wheel_jacobian(theta, p)
        Jr = roller_jacobian(theta, p)
        M = M + p.I_wheel * (Jw.T @ Jw) + p.I_roller * (Jr.T @ Jr)
    return M


def ext_point_jacobian(base_xy, point_xy) -> np.ndarray:
    """Jacobian of a body-fixed point's world velocity w.r.t. base velocity."""
    x, y = base_xy
    xe, ye = point_xy
    return np.array([
        [1.0, 0.0, y - ye],
        [0.0, 1.0, xe - x],
        [0.0, 0.0, 1.0],
    ])


def nominal_torque(state: GeneralizedState, p: RobotParams,
                   variant: ModelVariant = ModelVariant.FULL) -> np.ndarray:
    """Predicted torque-sensor reading in the absence of external force.

    FULL:    T = Jw^-T [M xddot + Jr^T (I_r qddot_r + B_r)] + I_w qddot_w
    REDUCED: T = Jw^-T [M xddot + Jr^T B_r]
    """
    theta = state.base.theta
    JwinvT = wheel_jacobian_inverse(theta, p).T
    Jr = roller_jacobian(theta, p)
    Br = roller_friction(state.wheels.qdot_r, p)
    Mx = mass_matrix(p) @ state.base.acc
    if variant is ModelVariant.FULL:
        roller_term = p.I_roller * state.wheels.qddot_r + Br
        return JwinvT @ (Mx + Jr.T @ roller_term) + p.I_wheel * state.wheels.qddot_w
    return JwinvT @ (Mx + Jr.T @ Br)


def gyroscopic_matrix(thetadot: float, p: RobotParams,
                      variant: ModelVariant = ModelVariant.FULL) -> np.ndarray:
    """Skew (workless) velocity-coupling matrix from the reflected inertias.

    The body-coordinate force contributed by the constraint time
    derivatives is ``-G(thetadot) @ xdot`` with G skew-symmetric, so this
    term never does work on the base.
    """
    if variant is ModelVariant.REDUCED:
        return np.zeros((3, 3))
    kappa = 1.5 * (p.I_wheel / p.r_w ** 2 + p.I_roller / p.r_r ** 2)
    g = kappa * thetadot
    return np.array([
        [0.0, g, 0.0],
        [-g, 0.0, 0.0],
        [0.0, 0.0, 0.0],
    ])


def forward_dynamics(state: GeneralizedState, T_motor: np.ndarray,
                     F_ext: np.ndarray, contact_point, p: RobotParams,
                     variant: ModelVariant = ModelVariant.FULL):
    """Accelerations and constraint forces under motor torques and an
    external wrench applied at ``contact_point`` (world frame).

    Returns ``(xddot, qddot_w, qddot_r, ConstraintForces)``.
    """
    base = state.base
    theta = base.theta
    v = base.vel
    Jw = wheel_jacobian(theta, p)
    Jr = roller_jacobian(theta, p)
    dJw = wheel_jacobian_dot(theta, base.thetadot, p)
    dJr = roller_jacobian_dot(theta, base.thetadot, p)

    T = np.asarray(T_motor, dtype=float)
    F = np.asarray(F_ext, dtype=float)
    Br = roller_friction(Jr @ v, p)

    rhs = Jw.T @ T - Jr.T @ Br
    if np.any(F != 0.0):
        if contact_point is None:
            raise ValueError("contact_point required when F_ext is nonzero")
        Jext = ext_point_jacobian((base.x, base.y), contact_point)
        rhs = rhs + Jext.T @ F

    if variant is ModelVariant.FULL:
        Meff = effective_mass_matrix(theta, p, variant)
        rhs = rhs - p.I_wheel * (Jw.T @ (dJw @ v)) - p.I_roller * (Jr.T @ (dJr @ v))
        xddot = np.linalg.solve(Meff, rhs)
    else:
        xddot = np.linalg.solve(mass_matrix(p), rhs)

    qddot_w = Jw @ xddot + dJw @ v
    qddot_r = Jr @ xddot + dJr @ v
    if variant is ModelVariant.FULL:
        lam_w = p.I_wheel * qddot_w - T
        lam_r = p.I_roller * qddot_r + Br
    else:
        lam_w = -T
        lam_r = Br.copy()
    return xddot, qddot_w, qddot_r, ConstraintForces(lambda_w=lam_w, lambda_r=lam_r)


def kinetic_energy(theta: float, vel: np.ndarray, p: RobotParams,
                   variant: ModelVariant = ModelVariant.FULL) -> float:
    """Total kinetic energy of base plus (reflected) wheel/roller spin."""
    Meff = effective_mass_matrix(theta, p, variant)
    v = np.asarray(vel, dtype=float)
    return 0.5 * float(v @ Meff @ v)
