"""Scenario configuration: YAML schema, defaults, validation, world build.

A scenario file is a nested mapping with the sections below; unknown keys
are rejected so typos fail loudly.  ``load`` -> ``to_dict`` -> ``load``
round-trips to the identical configuration.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
import yaml

from .actuator import ActuatorParams, PDGains, SensorModel
from .calibration import TrajectoryId
from .controller import (
    AdmittanceParams,
    ArcTrajectory,
    HoldTrajectory,
    LineTrajectory,
    SupervisorConfig,
)
from .estimator import EstimatorConfig
from .kinematics import RobotParams
from .simulator import (
    BumperKind,
    BumperModel,
    DummyState,
    ScheduledPush,
    World,
    WorldOptions,
)


class ConfigError(ValueError):
    """Invalid or missing scenario configuration; message names the field."""


class Experiment(Enum):
    STATIC_PUSH = "STATIC_PUSH"
    DUMMY_INTO_ROBOT = "DUMMY_INTO_ROBOT"
    ROBOT_INTO_DUMMY = "ROBOT_INTO_DUMMY"
    ARC_WITH_PUSHES = "ARC_WITH_PUSHES"
    CALIBRATION = "CALIBRATION"


_DEFAULTS = {
    "meta": {"id": "scenario", "description": ""},
    "experiment": "STATIC_PUSH",
    "robot": {
        "R": 0.3, "r_w": 0.1, "r_r": 0.02,
        "M_body": 60.0, "I_body": 2.7, "I_wheel": 0.02, "I_roller": 1.0e-4,
        "B_r_mag": 0.2, "alpha": 0.4, "side_length": 0.61,
    },
    "actuator": {
        "k_sensor": 2500.0, "c_sensor": 2.0, "m_rotor": 0.05,
        "B1": 0.05, "B2": 0.0,
        "stiction_torque": 1.5, "sensor_stiction": 0.0,
        "torque_noise_sd": 0.0, "sample_rate": 1000.0, "tau_max": 6.0,
        "tau_slew": 100.0,
        "sensor_model": "SPRING",
    },
    "gains": {"kp": 200.0, "kd": 4.0},
    "estimator": {
        "accel_cutoff_hz": 30.0, "torque_filter_window": 0.05,
        "threshold": 0.8, "detector_window": 0.05,
    },
    "controller": {
        "enabled": True, "M_des": 2.0, "B_des": 1.6, "escape_standoff": 0.5,
        "escape_time": None, "quiet_time": 0.2,
    },
    "trajectory": {"kind": "hold", "diameter": 1.5, "speed": 0.16,
                   "velocity": [0.0, 0.0], "ramp": 1.0},
    "dummy": {
        "enabled": False, "mass": 10.0, "pull_force": 0.0,
        "release_gap": 0.0, "pull_travel": None,
        "axis": [-1.0, 0.0], "tip_start": [1.0, 0.0],
        "slider_friction": 0.0, "contact_height": 0.25,
        "bumper": {
            "kind": "PU", "k_b": 20000.0, "c_b": 50.0, "travel_max": 0.05,
            "bottom_k": 5000.0, "latch_force": 30.0, "latch_travel": 5.0e-4,
        },
    },
    "pushes": [],
    "sim": {
        "dt": 1.0e-4, "duration": 2.0, "seed": 0,
        "motors_on": True, "stiction_on": True, "noise_on": False,
    },
    "initial_pose": [0.0, 0.0, 0.0],
    "calibration": {
        "trajectory": "ARC_W0", "omega": 0.2, "duration": 10.0,
        "noise_sd": 0.0, "seeds": 1,
    },
    "checks": {},
}


def _merge(defaults, override, path=""):
    if override is None:
        return copy.deepcopy(defaults)
    if isinstance(defaults, dict):
        if not isinstance(override, dict):
            raise ConfigError(f"{path or 'config'} must be a mapping")
        if not defaults:  # free-form sections (e.g. checks)
            return copy.deepcopy(override)
        out = {}
        for key, dval in defaults.items():
            sub = override.get(key)
            out[key] = _merge(dval, sub, f"{path}.{key}" if path else key)
        unknown = set(override) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path or 'root'}'")
        return out
    return copy.deepcopy(override)


@dataclass
class ScenarioConfig:
    """Validated scenario: raw dict plus typed accessors."""

    data: dict = field(default_factory=lambda: copy.deepcopy(_DEFAULTS))

    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict | None) -> "ScenarioConfig":
        merged = _merge(_DEFAULTS, raw or {})
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.data, fh, sort_keys=False)

    def dumps(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)

    # ------------------------------------------------------------------
    def validate(self):
        d = self.data
        try:
            self.experiment
        except ValueError:
            raise ConfigError(f"experiment: unknown value {d['experiment']!r}")
        try:
            self.robot_params
        except ValueError as exc:
            raise ConfigError(f"robot: {exc}")
        try:
            self.actuator_params
        except ValueError as exc:
            raise ConfigError(f"actuator: {exc}")
        if d["actuator"]["sensor_model"] not in ("SPRING", "RIGID"):
            raise ConfigError("actuator.sensor_model must be SPRING or RIGID")
        sim = d["sim"]
        if not (1e-5 <= sim["dt"] <= 1e-3):
            raise ConfigError("sim.dt must lie in [1e-5, 1e-3]")
        if sim["duration"] <= 0:
            raise ConfigError("sim.duration must be > 0")
        if d["controller"]["M_des"] <= 0 or d["controller"]["B_des"] <= 0:
            raise ConfigError("controller.M_des and B_des must be > 0")
        if d["estimator"]["threshold"] <= 0:
            raise ConfigError("estimator.threshold must be > 0")
        if d["trajectory"]["kind"] not in ("hold", "arc", "line"):
            raise ConfigError("trajectory.kind must be 'hold', 'arc' or 'line'")
        bumper = d["dummy"]["bumper"]
        if bumper["kind"] not in ("PU", "SPRING", "MAGNET"):
            raise ConfigError("dummy.bumper.kind must be PU, SPRING or MAGNET")
        if self.experiment in (Experiment.DUMMY_INTO_ROBOT, Experiment.ROBOT_INTO_DUMMY):
            if not d["dummy"]["enabled"]:
                raise ConfigError(f"dummy.enabled must be true for {d['experiment']}")
        if d["calibration"]["trajectory"] not in ("ARC_W0", "PIVOT_W2"):
            raise ConfigError("calibration.trajectory must be ARC_W0 or PIVOT_W2")
        axis = d["dummy"]["axis"]
        if len(axis) != 2 or (axis[0] == 0 and axis[1] == 0):
            raise ConfigError("dummy.axis must be a nonzero 2-vector")
        for i, push in enumerate(d["pushes"]):
            for key in ("t_on", "t_off", "force", "point_body"):
                if key not in push:
                    raise ConfigError(f"pushes[{i}].{key} missing")

    # ------------------------------------------------------------------
    @property
    def scenario_id(self) -> str:
        return str(self.data["meta"]["id"])

    @property
    def experiment(self) -> Experiment:
        return Experiment(self.data["experiment"])

    @property
    def robot_params(self) -> RobotParams:
        return RobotParams(**self.data["robot"])

    @property
    def actuator_params(self) -> ActuatorParams:
        a = dict(self.data["actuator"])
        a.pop("sensor_model")
        return ActuatorParams(**a)

    @property
    def sensor_model(self) -> SensorModel:
        return SensorModel[self.data["actuator"]["sensor_model"]]

    @property
    def gains(self) -> PDGains:
        return PDGains(**self.data["gains"])

    @property
    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(sample_rate=1000.0, **self.data["estimator"])

    @property
    def admittance(self) -> AdmittanceParams:
        c = self.data["controller"]
        return AdmittanceParams(M_des=c["M_des"], B_des=c["B_des"],
                                escape_standoff=c["escape_standoff"])

    @property
    def supervisor_config(self) -> SupervisorConfig:
        c = self.data["controller"]
        return SupervisorConfig(threshold=self.data["estimator"]["threshold"],
                                escape_time=c["escape_time"],
                                quiet_time=c["quiet_time"])

    @property
    def checks(self) -> dict:
        return dict(self.data["checks"])

    def trajectory_for(self, pose):
        t = self.data["trajectory"]
        if t["kind"] == "arc":
            return ArcTrajectory(pose, diameter=t["diameter"], speed=t["speed"])
        if t["kind"] == "line":
            return LineTrajectory(pose, velocity=t["velocity"], ramp=t["ramp"])
        return HoldTrajectory(pose)

    def dummy_state(self) -> DummyState | None:
        d = self.data["dummy"]
        if not d["enabled"]:
            return None
        pull_travel = d["pull_travel"]
        if pull_travel is None:
            pull_travel = d["release_gap"] if d["release_gap"] > 0 else math.inf
        return DummyState(
            tip_start=np.array(d["tip_start"], dtype=float),
            axis=np.array(d["axis"], dtype=float),
            mass_total=d["mass"], pull_force=d["pull_force"],
            pull_travel=pull_travel, slider_friction=d["slider_friction"],
        )

    def bumper_model(self) -> BumperModel | None:
        d = self.data["dummy"]
        if not d["enabled"]:
            return None
        b = d["bumper"]
        return BumperModel(kind=BumperKind(b["kind"]), k_b=b["k_b"], c_b=b["c_b"],
                           travel_max=b["travel_max"], bottom_k=b["bottom_k"],
                           latch_force=b["latch_force"],
                           latch_travel=b["latch_travel"])

    def scheduled_pushes(self) -> list[ScheduledPush]:
        out = []
        for push in self.data["pushes"]:
            out.append(ScheduledPush(
                t_on=float(push["t_on"]), t_off=float(push["t_off"]),
                force=np.array(push["force"], dtype=float),
                point_body=np.array(push["point_body"], dtype=float),
                ramp=float(push.get("ramp", 0.0))))
        return out

    def world_options(self, seed_override=None) -> WorldOptions:
        s = self.data["sim"]
        return WorldOptions(
            dt=s["dt"], motors_on=s["motors_on"],
            controller_on=self.data["controller"]["enabled"],
            stiction_on=s["stiction_on"], noise_on=s["noise_on"],
            seed=s["seed"] if seed_override is None else int(seed_override),
            contact_height=self.data["dummy"]["contact_height"],
        )

    @property
    def calibration_settings(self) -> dict:
        c = dict(self.data["calibration"])
        c["trajectory"] = TrajectoryId(c["trajectory"])
        return c

    # ------------------------------------------------------------------
    def build_world(self, seed_override=None) -> World:
        pose = tuple(float(v) for v in self.data["initial_pose"])
        return World(
            p=self.robot_params,
            actuator=self.actuator_params,
            gains=self.gains,
            options=self.world_options(seed_override),
            sensor_model=self.sensor_model,
            estimator_cfg=self.estimator_config,
            admittance=self.admittance,
            supervisor_cfg=self.supervisor_config,
            trajectory=self.trajectory_for(pose),
            dummy=self.dummy_state(),
            bumper=self.bumper_model(),
            pushes=self.scheduled_pushes(),
            initial_pose=pose,
        )
