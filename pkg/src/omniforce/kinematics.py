"""Rolling-constraint kinematics of a three-omniwheel holonomic base.

Closed-form maps between Cartesian base motion ``x = (x, y, theta)`` and
wheel / roller joint motion, including the constraint Jacobians, their
inverses, and their time derivatives.  All functions here are pure and
operate on plain floats / numpy arrays, so they are safe to call from
multiple threads.

Conventions
-----------
* World frame is a fixed inertial frame; ``theta`` is the base heading.
* Wheel ``i`` sits at distance ``R`` from the body center, at placement
  angle ``phi_i`` measured from the body's reference axis.  Placement
  angles are fixed to 0, 120 and 240 degrees.
* Angles are stored unwrapped during integration; :func:`normalize_angle`
  is an explicit API-boundary operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_THIRDS_PI = 2.0 * math.pi / 3.0

DEFAULT_PHI = (0.0, TWO_THIRDS_PI, 2.0 * TWO_THIRDS_PI)


class SingularJacobianError(ValueError):
    """Raised when a wheel Jacobian is too ill-conditioned to invert."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle to the interval (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class RobotParams:
    """Geometry, inertias and friction parameters of the base.

    Parameters
    ----------
    R : float
        Center-of-body to wheel-center distance [m].
    r_w : float
        Wheel radius [m].
    r_r : float
        Omniwheel side-roller radius [m].
    phi : tuple of float
        Wheel placement angles [rad]; must be (0, 120, 240) degrees.
    M_body, I_body : float
        Base mass [kg] and yaw inertia [kg m^2].
    I_wheel, I_roller : float
        Reflected wheel and roller inertias [kg m^2].
    B_r_mag : float
        Coulomb roller friction magnitude [N m].
    alpha : float
        tanh scaling factor of the friction model [s/rad].
    side_length : float
        Edge length of the triangular body cross-section [m].
    """

    R: float = 0.3
    r_w: float = 0.1
    r_r: float = 0.02
    phi: tuple = field(default=DEFAULT_PHI)
    M_body: float = 60.0
    I_body: float = 2.7
    I_wheel: float = 0.02
    I_roller: float = 1e-4
    B_r_mag: float = 0.2
    alpha: float = 0.4
    side_length: float = 0.61

    def __post_init__(self):
        for name in ("R", "r_w", "r_r", "side_length", "M_body", "I_body",
                     "I_wheel", "I_roller"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"RobotParams.{name} must be > 0")
        if self.B_r_mag < 0.0 or self.alpha < 0.0:
            raise ValueError("friction parameters must be >= 0")
        phi = tuple(float(p) for p in self.phi)
        if len(phi) != 3 or any(abs(p - d) > 1e-12 for p, d in zip(phi, DEFAULT_PHI)):
            raise ValueError("wheel placement angles must be exactly 0/120/240 deg")
        object.__setattr__(self, "phi", phi)

    @property
    def tri_circumradius(self) -> float:
        """Circumradius of the triangular cross-section (vertex distance)."""
        return self.side_length / math.sqrt(3.0)

    @property
    def tri_inradius(self) -> float:
        """Inradius of the triangular cross-section (wall distance)."""
        return self.side_length / (2.0 * math.sqrt(3.0))


@dataclass
class BaseState:
    """Cartesian pose and its derivatives for the base body."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    xdot: float = 0.0
    ydot: float = 0.0
    thetadot: float = 0.0
    xddot: float = 0.0
    yddot: float = 0.0
    thetaddot: float = 0.0

    @property
    def pose(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @property
    def vel(self) -> np.ndarray:
        return np.array([self.xdot, self.ydot, self.thetadot])

    @property
    def acc(self) -> np.ndarray:
        return np.array([self.xddot, self.yddot, self.thetaddot])


@dataclass
class WheelState:
    """Wheel and roller joint angles plus their rates and accelerations."""

    q_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qdot_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qdot_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qddot_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qddot_r: np.ndarray = field(default_factory=lambda: np.zeros(3))


def wheel_jacobian(theta: float, p: RobotParams) -> np.ndarray:
    """Map base velocity (xdot, ydot, thetadot) to wheel rates.

    Row ``i`` is ``(1/r_w) * (-sin(theta+phi_i), cos(theta+phi_i), R)``.
    """
    a = theta + np.asarray(p.phi)
    J = np.empty((3, 3))
    J[:, 0] = -np.sin(a)
    J[:, 1] = np.cos(a)
    J[:, 2] = p.R
    J /= p.r_w
    return J


def roller_jacobian(theta: float, p: RobotParams) -> np.ndarray:
    """Map base velocity to passive side-roller rates.

    Row ``i`` is ``(1/r_r) * (cos(theta+phi_i), sin(theta+phi_i), 0)``.
    """
    a = theta + np.asarray(p.phi)
    J = np.empty((3, 3))
    J[:, 0] = np.cos(a)
    J[:, 1] = np.sin(a)
    J[:, 2] = 0.0
    J /= p.r_r
    return J


def _adjugate_inverse(J: np.ndarray) -> np.ndarray:
    """Closed-form 3x3 inverse via the adjugate (no pivoting)."""
    a, b, c = J[0]
    d, e, f = J[1]
    g, h, i = J[2]
    A = e * i - f * h
    B = -(d * i - f * g)
    C = d * h - e * g
    det = a * A + b * B + c * C
    adj = np.array([
        [A, -(b * i - c * h), b * f - c * e],
        [B, a * i - c * g, -(a * f - c * d)],
        [C, -(a * h - b * g), a * e - b * d],
    ])
    return adj / det, det


def wheel_jacobian_inverse(theta: float, p: RobotParams) -> np.ndarray:
    """Inverse wheel Jacobian: wheel rates back to base velocity.

    Raises
    ------
    SingularJacobianError
        If the conditioning of the Jacobian exceeds 1e12 (degenerate
        geometry parameters).
    """
    J = wheel_jacobian(theta, p)
    inv, det = _adjugate_inverse(J)
    if det == 0.0:
        raise SingularJacobianError("wheel Jacobian is singular")
    # Frobenius-norm condition estimate; exact value is irrelevant, only
    # the guard against degenerate parameter sets.
    cond = float(np.linalg.norm(J) * np.linalg.norm(inv))
    if cond > 1e12:
        raise SingularJacobianError(f"wheel Jacobian condition {cond:.3e} > 1e12")
    return inv


def wheel_jacobian_dot(theta: float, thetadot: float, p: RobotParams) -> np.ndarray:
    """Entry-wise time derivative of :func:`wheel_jacobian`."""
    a = theta + np.asarray(p.phi)
    dJ = np.empty((3, 3))
    dJ[:, 0] = -np.cos(a)
    dJ[:, 1] = -np.sin(a)
    dJ[:, 2] = 0.0
    dJ *= thetadot / p.r_w
    return dJ


def roller_jacobian_dot(theta: float, thetadot: float, p: RobotParams) -> np.ndarray:
    """Entry-wise time derivative of :func:`roller_jacobian`."""
    a = theta + np.asarray(p.phi)
    dJ = np.empty((3, 3))
    dJ[:, 0] = -np.sin(a)
    dJ[:, 1] = np.cos(a)
    dJ[:, 2] = 0.0
    dJ *= thetadot / p.r_r
    return dJ


def jacobian_time_derivative(theta: float, thetadot: float, p: RobotParams):
    """Time derivatives of both constraint Jacobians, as a pair."""
    return (wheel_jacobian_dot(theta, thetadot, p),
            roller_jacobian_dot(theta, thetadot, p))


def body_accel_from_wheels(qdot_w: np.ndarray, qddot_w: np.ndarray,
                           theta: float, thetadot: float,
                           p: RobotParams) -> np.ndarray:
    """Reconstruct Cartesian base acceleration from wheel data.

    Uses ``xddot = Jw^-1 qddot_w + d(Jw^-1)/dt qdot_w`` with the identity
    ``d(J^-1)/dt = -J^-1 Jdot J^-1``.
    """
    Jinv = wheel_jacobian_inverse(theta, p)
    Jdot = wheel_jacobian_dot(theta, thetadot, p)
    dJinv = -Jinv @ Jdot @ Jinv
    return Jinv @ np.asarray(qddot_w) + dJinv @ np.asarray(qdot_w)
