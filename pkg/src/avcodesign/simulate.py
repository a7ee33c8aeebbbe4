"""Closed-loop runs: plant, filter, and controllers wired together.

Each control cycle measures the true state (possibly dropping the sample),
updates the filter, and computes the next steering and acceleration inputs
from the estimate; the plant and the filter prediction then advance at the
faster integration rate with those inputs held. Outcome metrics integrate
over the true state, never the estimate.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .controllers import (
    LqrGainCache,
    LqrParams,
    NmpcParams,
    PidMemory,
    PidParams,
    PurePursuitParams,
    RiccatiError,
    StanleyParams,
    lqr_steering,
    nmpc,
    pid_speed,
    pure_pursuit,
    reference_point,
    stanley,
    steering_rate_command,
    tracking_error,
)
from .ekf import CovarianceError, EkfState, ekf_predict, ekf_update
from .paths import PathError, PathSpec
from .vehicle import (
    NoiseSpec,
    SteeringSingularity,
    VehicleParams,
    front_wheel,
    matrix_sqrt,
    measure,
    process_increment,
    step,
)

# converts |acceleration| to the |steering rate| scale inside the comfort
# integral, in s/m
COMFORT_ACCEL_WEIGHT = 1.0

DEFAULT_P0 = np.diag([0.01, 0.01, 0.0025, 0.0025, 0.04])

FAMILIES = ("stanley", "pure_pursuit", "lqr", "nmpc")

_PARAM_TYPES = {
    "stanley": StanleyParams,
    "pure_pursuit": PurePursuitParams,
    "lqr": LqrParams,
    "nmpc": NmpcParams,
}

METRIC_FIELDS = ("e_p_tot", "delta_tot", "speed_err_tot", "discomfort",
                 "steer_rate_tot", "accel_tot")


@dataclass(frozen=True)
class ControllerSpec:
    """A lateral controller family plus its parameter set."""

    family: str
    params: object

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown controller family {self.family!r}")
        want = _PARAM_TYPES[self.family]
        if not isinstance(self.params, want):
            raise ValueError(
                f"{self.family} expects {want.__name__} parameters")


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Integration rates, horizon, and start-pose perturbations.

    The plant and filter advance every ``dt``; measurement and control run
    every ``control_every`` plant steps with inputs held in between. A zero
    ``t_end`` horizon means "time to traverse the path at the target speed".
    ``initial_offset`` shifts the start pose to the left of the path and
    ``initial_heading_error`` turns it counterclockwise.
    """

    dt: float = 0.01
    control_every: int = 2
    runs: int = 100
    t_end: float | None = None
    initial_offset: float = 0.0
    initial_heading_error: float = 0.0
    p0: np.ndarray = field(default_factory=lambda: DEFAULT_P0.copy())
    vehicle: VehicleParams = VehicleParams()

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.control_every < 1:
            raise ValueError("control_every must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")

    @property
    def control_dt(self) -> float:
        return self.dt * self.control_every


@dataclass(frozen=True)
class Metrics:
    """Time-integral run metrics.

    ``discomfort`` equals steer_rate_tot + COMFORT_ACCEL_WEIGHT * accel_tot
    exactly; the two addends are kept so the steering and acceleration
    contributions stay attributable to their controllers."""

    e_p_tot: float
    delta_tot: float
    speed_err_tot: float
    discomfort: float
    steer_rate_tot: float
    accel_tot: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


@dataclass(frozen=True)
class SimOutcome:
    """Monte-Carlo mean of the run metrics plus their standard errors."""

    e_p_tot: float
    delta_tot: float
    speed_err_tot: float
    discomfort: float
    steer_rate_tot: float
    accel_tot: float
    runs: int
    failed: int
    dispersion: Metrics

    def metrics(self) -> Metrics:
        return Metrics(self.e_p_tot, self.delta_tot, self.speed_err_tot,
                       self.discomfort, self.steer_rate_tot, self.accel_tot)

    def as_dict(self) -> dict:
        out = self.metrics().as_dict()
        out["runs"] = self.runs
        out["failed"] = self.failed
        for name, value in self.dispersion.as_dict().items():
            out["se_" + name] = value
        return out


@dataclass
class Trace:
    """Plant-rate states and inputs plus the per-cycle command records."""

    states: list
    inputs: list
    commands: list


@dataclass(frozen=True)
class RunResult:
    metrics: Metrics | None
    trace: Trace | None
    failure: str | None

    @property
    def failed(self) -> bool:
        return self.failure is not None


def _make_lateral(spec: ControllerSpec, path: PathSpec,
                  vehicle: VehicleParams, dt_ctrl: float):
    """Bind a family to this run; returns estimate -> (command, diagnostics).

    The returned callable owns whatever per-run state the family needs (the
    speed-scheduled gain cache, the warm start)."""
    bounds = (vehicle.delta_min, vehicle.delta_max)
    l = vehicle.wheelbase

    if spec.family == "stanley":
        def act(s_hat):
            e = tracking_error(s_hat, path, l)
            v_f = front_wheel(s_hat, l)[2]
            return stanley(e, v_f, spec.params, bounds), None
        return act

    if spec.family == "pure_pursuit":
        def act(s_hat):
            cmd = pure_pursuit(s_hat, path, spec.params, l, bounds)
            return cmd.delta, {
                "goal_index": cmd.goal_index,
                "e_along": cmd.e_along,
                "e_lat": cmd.e_lat,
                "alpha": cmd.alpha,
            }
        return act

    if spec.family == "lqr":
        cache = LqrGainCache(l, spec.params)

        def act(s_hat):
            e = tracking_error(s_hat, path, l)
            gain = cache.gain(s_hat[4])
            return lqr_steering(e, gain, bounds), None
        return act

    params: NmpcParams = spec.params
    warm = {"inputs": None}

    def act(s_hat):
        e = tracking_error(s_hat, path, l, ref_point=params.ref_point)
        rx, ry = reference_point(s_hat, l, params.ref_point)
        i = path.nearest_index(rx, ry)
        v_f = front_wheel(s_hat, l)[2]
        ahead = (params.n_h + 1) * dt_ctrl * max(v_f, 0.1) + 2.0
        result = nmpc(e, path.window(i, ahead), v_f, params, dt_ctrl,
                      bounds, l, warm_start=warm["inputs"])
        warm["inputs"] = result.inputs
        return result.first, {
            "cost": result.cost,
            "budget_exhausted": result.budget_exhausted,
        }
    return act


def _initial_state(path: PathSpec, v_t: float, config: SimConfig) -> tuple:
    x0, y0 = (float(c) for c in path.points[0])
    heading = float(path.headings[0])
    off = config.initial_offset
    x0 -= off * math.sin(heading)
    y0 += off * math.cos(heading)
    return config.vehicle.clamp_state(
        (x0, y0, heading + config.initial_heading_error, 0.0, v_t))


_RUN_FAILURES = (CovarianceError, RiccatiError, SteeringSingularity,
                 PathError, FloatingPointError, np.linalg.LinAlgError)


def simulate_once(lateral: ControllerSpec, pid: PidParams, path: PathSpec,
                  noise: NoiseSpec, config: SimConfig,
                  record: bool = False) -> RunResult:
    """One closed-loop run; a controller or filter failure ends it early."""
    vehicle = config.vehicle
    dt = config.dt
    every = config.control_every
    horizon = config.t_end if config.t_end is not None \
        else path.length / pid.v_t
    n_steps = max(1, int(round(horizon / dt)))

    s = _initial_state(path, pid.v_t, config)
    proc_rng, meas_rng, drop_rng = noise.streams()
    w_sqrt = matrix_sqrt(noise.W)
    v_sqrt = matrix_sqrt(noise.V)
    ekf = EkfState.initial(s, config.p0)
    act = _make_lateral(lateral, path, vehicle, config.control_dt)
    mem = PidMemory()
    a_bounds = (vehicle.accel_min, vehicle.accel_max)
    u = (0.0, 0.0)

    e_acc = d_acc = v_acc = sr_acc = aa_acc = 0.0
    trace = Trace(states=[s], inputs=[], commands=[]) if record else None
    try:
        for k in range(n_steps):
            e_true = tracking_error(s, path, vehicle.wheelbase)
            e_acc += abs(e_true.e_p) * dt
            d_acc += abs(s[3]) * dt
            v_acc += abs(pid.v_t - s[4]) * dt
            sr_acc += abs(u[0]) * dt
            aa_acc += abs(u[1]) * dt

            increment = process_increment(w_sqrt, dt, proc_rng)
            s = step(s, u, dt, vehicle, increment)
            ekf = ekf_predict(ekf, u, dt, noise.W, vehicle)
            if record:
                trace.states.append(s)
                trace.inputs.append(u)

            if (k + 1) % every == 0 and k + 1 < n_steps:
                if not all(math.isfinite(c) for c in s):
                    raise FloatingPointError("state diverged")
                y = measure(s, v_sqrt, noise.drop_probability,
                            meas_rng, drop_rng)
                ekf = ekf_update(ekf, y, noise.V)
                delta_cmd, diag = act(ekf.s_hat)
                v_s = steering_rate_command(delta_cmd, ekf.s_hat[3],
                                            config.control_dt, vehicle)
                a_cmd, mem = pid_speed(ekf.speed_estimate, mem, pid,
                                       config.control_dt, a_bounds)
                u = (v_s, a_cmd)
                if record:
                    entry = {"step": k + 1, "delta_cmd": delta_cmd}
                    if diag:
                        entry.update(diag)
                    trace.commands.append(entry)
    except _RUN_FAILURES as exc:
        return RunResult(metrics=None, trace=trace,
                         failure=f"{type(exc).__name__}: {exc}")
    discomfort = sr_acc + COMFORT_ACCEL_WEIGHT * aa_acc
    return RunResult(metrics=Metrics(e_acc, d_acc, v_acc, discomfort,
                                     sr_acc, aa_acc),
                     trace=trace, failure=None)


def _aggregate(samples: list[Metrics], failed: int) -> SimOutcome:
    if not samples:
        blank = Metrics(*([float("nan")] * len(METRIC_FIELDS)))
        return SimOutcome(**blank.as_dict(), runs=0, failed=failed,
                          dispersion=blank)
    n = len(samples)
    means = {}
    errors = {}
    for name in METRIC_FIELDS:
        values = [getattr(m, name) for m in samples]
        means[name] = statistics.fmean(values)
        errors[name] = statistics.stdev(values) / math.sqrt(n) if n > 1 \
            else 0.0
    return SimOutcome(**means, runs=n, failed=failed,
                      dispersion=Metrics(**errors))


def run_closed_loop(lateral: ControllerSpec, pid: PidParams, path: PathSpec,
                    noise: NoiseSpec, config: SimConfig) -> SimOutcome:
    """Average Monte-Carlo repetitions; run i reseeds the noise at seed+i.

    Failed runs are excluded from the averages and counted."""
    samples = []
    failed = 0
    for i in range(config.runs):
        result = simulate_once(lateral, pid, path,
                               replace(noise, seed=noise.seed + i), config)
        if result.failure is None:
            samples.append(result.metrics)
        else:
            failed += 1
    return _aggregate(samples, failed)


def reference_rollout(path: PathSpec, v_t: float, dt: float = 0.01,
                      max_steps: int | None = None) -> list[tuple]:
    """Noiseless nominal-tracking truth states at the plant rate.

    Useful as the linearization reference for covariance recursions run
    outside the loop."""
    noise = NoiseSpec(W=np.zeros((5, 5)), V=np.zeros((5, 5)),
                      drop_probability=0.0, seed=0)
    config = SimConfig(dt=dt, runs=1)
    lateral = ControllerSpec("stanley", StanleyParams(g=0.5))
    pid = PidParams(k_p=1.0, k_i=0.1, k_d=0.01, v_t=v_t)
    result = simulate_once(lateral, pid, path, noise, config, record=True)
    if result.failure is not None:
        raise RuntimeError(f"reference rollout failed: {result.failure}")
    states = result.trace.states
    if max_steps is not None:
        states = states[:max_steps + 1]
    return states
