"""Full-body collision force estimation and admittance reaction for a
three-omniwheel holonomic base, with a deterministic physics testbed."""

from .actuator import ActuatorParams, PDGains, SensorModel
from .controller import AdmittanceParams, Mode, design_damping, escape_trajectory
from .dynamics import (
    ConstraintForces,
    GeneralizedState,
    ModelVariant,
    forward_dynamics,
    nominal_torque,
    roller_friction,
)
from .estimator import (
    ContactEstimate,
    DetectorState,
    Wrench,
    detect,
    estimate_contact,
    locate_contact,
    residual_torques,
    solve_force,
    zero_moment_line,
)
from .kinematics import (
    BaseState,
    RobotParams,
    WheelState,
    body_accel_from_wheels,
    jacobian_time_derivative,
    roller_jacobian,
    wheel_jacobian,
    wheel_jacobian_inverse,
)
from .simulator import (
    BumperKind,
    BumperModel,
    DummyState,
    SimTrace,
    World,
    WorldOptions,
    bumper_force,
    resolve_contact,
)

__version__ = "0.1.0"
