"""Scenario reports computed purely from a trace and its configuration.

Everything here is recomputable offline from the trace CSV: detection
latency re-derives the moving-average crossing from the estimate columns,
the true contact point is reconstructed geometrically from the dummy
state columns, and peak torques are split into an impact-aligned
component (torque in the direction the collision loads the drivetrain)
and the absolute peak, because reaction/escape torques carry the opposite
sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .simulator import SimTrace, resolve_contact

G_ACCEL = 9.81


@dataclass
class Report:
    scenario_id: str
    experiment: str
    status: str = "ok"
    detection_latency_ms: float = math.nan
    first_contact_t: float = math.nan
    trigger_t: float = math.nan
    peak_torque: list = field(default_factory=lambda: [math.nan] * 3)
    peak_impact_torque: list = field(default_factory=lambda: [math.nan] * 3)
    magnitude_true: float = math.nan
    magnitude_est: float = math.nan
    magnitude_error_pct: float = math.nan
    direction_error_pct: float = math.nan
    location_error_m: float = math.nan
    location_error_pct: float = math.nan
    escape_displacement_m: float = math.nan
    tip_proxy_max: float = math.nan
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.checks.values()) if self.checks else True

    # ------------------------------------------------------------------
    def metric(self, name: str):
        scalars = {
            "detection_latency_ms": self.detection_latency_ms,
            "magnitude_est": self.magnitude_est,
            "magnitude_error_pct": self.magnitude_error_pct,
            "direction_error_pct": self.direction_error_pct,
            "location_error_m": self.location_error_m,
            "location_error_pct": self.location_error_pct,
            "escape_displacement_m": self.escape_displacement_m,
            "tip_proxy_max": self.tip_proxy_max,
            "peak_torque_max": max(self.peak_torque),
            "peak_impact_torque_max": max(self.peak_impact_torque),
        }
        if name not in scalars:
            raise KeyError(f"unknown report metric {name!r}")
        return scalars[name]

    def apply_checks(self, checks: dict):
        for name, bounds in checks.items():
            lo, hi = bounds
            val = self.metric(name)
            ok = not math.isnan(val)
            if ok and lo is not None:
                ok = val >= lo
            if ok and hi is not None:
                ok = val <= hi
            self.checks[name] = {"value": val, "lo": lo, "hi": hi, "pass": bool(ok)}
        return self

    # ------------------------------------------------------------------
    def rows(self):
        out = [
            ("scenario", self.scenario_id),
            ("experiment", self.experiment),
            ("status", self.status),
            ("detection_latency_ms", self.detection_latency_ms),
            ("peak_torque_w0_Nm", self.peak_torque[0]),
            ("peak_torque_w1_Nm", self.peak_torque[1]),
            ("peak_torque_w2_Nm", self.peak_torque[2]),
            ("peak_impact_torque_w0_Nm", self.peak_impact_torque[0]),
            ("peak_impact_torque_w1_Nm", self.peak_impact_torque[1]),
            ("peak_impact_torque_w2_Nm", self.peak_impact_torque[2]),
            ("magnitude_true_N", self.magnitude_true),
            ("magnitude_est_N", self.magnitude_est),
            ("magnitude_error_pct", self.magnitude_error_pct),
            ("direction_error_pct", self.direction_error_pct),
            ("location_error_m", self.location_error_m),
            ("location_error_pct", self.location_error_pct),
            ("escape_displacement_m", self.escape_displacement_m),
            ("tip_proxy_max", self.tip_proxy_max),
        ]
        for name, chk in self.checks.items():
            out.append((f"check:{name}",
                        f"{'PASS' if chk['pass'] else 'FAIL'} "
                        f"value={chk['value']:.6g} lo={chk['lo']} hi={chk['hi']}"))
        return out

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("field,value\n")
            for key, val in self.rows():
                fh.write(f"{key},{_fmt(val)}\n")

    def write_text(self, path):
        rows = self.rows()
        width = max(len(k) for k, _ in rows)
        with open(path, "w", encoding="utf-8") as fh:
            for key, val in rows:
                fh.write(f"{key.ljust(width)}  {_fmt(val)}\n")


def _fmt(v):
    if isinstance(v, str):
        return v
    try:
        return format(float(v), ".9g")
    except (TypeError, ValueError):
        return str(v)


# ----------------------------------------------------------------------
def moving_average_crossing(t: np.ndarray, mag: np.ndarray, window_s: float,
                            threshold: float):
    """First time the full-window moving average of ``mag`` exceeds the
    threshold (same zero-padded definition as the online detector)."""
    if len(t) < 2:
        return math.nan
    dt = t[1] - t[0]
    size = max(1, int(round(window_s / dt)))
    csum = np.cumsum(mag)
    avg = np.empty_like(mag)
    avg[:size] = csum[:size] / size
    avg[size:] = (csum[size:] - csum[:-size]) / size
    idx = np.nonzero(avg > threshold)[0]
    if len(idx) == 0:
        return math.nan
    # online detector stamps after advancing one tick
    return t[idx[0]] + dt


def report_from_trace(trace: SimTrace, config) -> Report:
    """Build a report from a trace plus its scenario config."""
    rep = Report(scenario_id=config.scenario_id,
                 experiment=config.experiment.value)
    t = trace.column("t")
    if len(t) == 0:
        rep.status = "empty"
        return rep
    fx_true = trace.column("Fx_true")
    fy_true = trace.column("Fy_true")
    mag_true = np.hypot(fx_true, fy_true)
    fx_est = trace.column("Fx_est")
    fy_est = trace.column("Fy_est")
    mag_est = np.hypot(fx_est, fy_est)

    contact = mag_true > 0.0
    est_cfg = config.data["estimator"]
    trig = moving_average_crossing(t, mag_est, est_cfg["detector_window"],
                                   est_cfg["threshold"])
    rep.trigger_t = trig
    if contact.any():
        i0 = int(np.argmax(contact))
        rep.first_contact_t = t[i0]
        if not math.isnan(trig):
            rep.detection_latency_ms = (trig - rep.first_contact_t) * 1e3

        taus = np.stack([trace.column(f"tau_s{i}") for i in range(3)], axis=1)
        tc = taus[contact]
        rep.peak_torque = list(np.abs(tc).max(axis=0))
        sign = np.sign(tc[:min(10, len(tc))].mean(axis=0))
        sign[sign == 0.0] = 1.0
        rep.peak_impact_torque = list((tc * sign).max(axis=0))

        _estimate_errors(rep, trace, config, contact)

    h = config.data["dummy"]["contact_height"]
    p = config.robot_params
    restoring = p.M_body * G_ACCEL * (p.R / 2.0)
    rep.tip_proxy_max = float((mag_true * h / restoring).max()) if len(t) else math.nan

    mode = trace.column("mode")
    esc = np.nonzero(mode == "ESCAPING")[0]
    if len(esc) > 0:
        i_sw = esc[0]
        x = trace.column("x")
        y = trace.column("y")
        rep.escape_displacement_m = math.hypot(x[-1] - x[i_sw], y[-1] - y[i_sw])
    rep.apply_checks(config.checks)
    return rep


def _estimate_errors(rep: Report, trace: SimTrace, config, contact: np.ndarray):
    """Estimate-vs-truth errors over the settled tail of the contact."""
    idx = np.nonzero(contact)[0]
    tail = idx[int(len(idx) * 0.75):]
    if len(tail) == 0:
        return
    p = config.robot_params
    fx_true = trace.column("Fx_true")[tail].mean()
    fy_true = trace.column("Fy_true")[tail].mean()
    fx_est = trace.column("Fx_est")[tail].mean()
    fy_est = trace.column("Fy_est")[tail].mean()
    rep.magnitude_true = math.hypot(fx_true, fy_true)
    rep.magnitude_est = math.hypot(fx_est, fy_est)
    if rep.magnitude_true > 0.0:
        rep.magnitude_error_pct = abs(rep.magnitude_est - rep.magnitude_true) \
            / rep.magnitude_true * 100.0
    if rep.magnitude_est > 0.0 and rep.magnitude_true > 0.0:
        a_true = math.atan2(fy_true, fx_true)
        a_est = math.atan2(fy_est, fx_est)
        d = abs(a_est - a_true) % (2.0 * math.pi)
        d = min(d, 2.0 * math.pi - d)
        rep.direction_error_pct = d / (2.0 * math.pi) * 100.0

    # true contact point: dummy tip pressed into the body outline
    dummy = config.data["dummy"]
    px = trace.column("px_est")[tail]
    py = trace.column("py_est")[tail]
    ok = ~(np.isnan(px) | np.isnan(py))
    if dummy["enabled"] and ok.any():
        x = trace.column("x")[tail]
        y = trace.column("y")[tail]
        th = trace.column("theta")[tail]
        s = trace.column("dummy_s")[tail]
        axis = np.asarray(dummy["axis"], dtype=float)
        axis = axis / np.linalg.norm(axis)
        tip0 = np.asarray(dummy["tip_start"], dtype=float)
        errs = []
        for k in range(len(tail)):
            if not ok[k]:
                continue
            tip = tip0 + s[k] * axis
            hit = resolve_contact(x[k], y[k], th[k], tip, p)
            if hit is None:
                continue
            _, _, q_surf, on_wheel, _ = hit
            if on_wheel:
                outline = geometry.body_outline(x[k], y[k], th[k], p)
                q_surf, _ = geometry.closest_point_on_triangle_boundary(q_surf, outline)
            errs.append(math.hypot(px[k] - q_surf[0], py[k] - q_surf[1]))
        if errs:
            rep.location_error_m = float(np.mean(errs))
            rep.location_error_pct = rep.location_error_m / p.side_length * 100.0
