"""Lateral and longitudinal control laws plus the tracking-error geometry.

Conventions used throughout: the path-lateral error e_p is positive when the
reference point sits to the RIGHT of the path (e_p = -(tangent x offset)),
and theta_e is the path-tangent heading minus the vehicle heading, wrapped to
(-pi, pi]. Under these signs, with the plant turning left for positive
steering, every law below is stabilizing exactly as written and the lateral
error of the front axle obeys d(e_p)/dt = v_f sin(theta_e - delta) on any
smooth path.

Lateral families: Stanley (front-axle proportional), pure pursuit (goal
chasing at a lookahead), LQR (Riccati gain on the linearized error system),
and a single-shooting NMPC (coordinate-descent over the input sequence).
Longitudinal: PID on the speed estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .paths import PathSpec
from .vehicle import VehicleParams

REF_POINTS = ("front_axle", "rear", "center_of_gravity")


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    out = math.remainder(a, 2.0 * math.pi)
    return math.pi if out <= -math.pi else out


def clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


@dataclass(frozen=True)
class TrackingError:
    e_p: float
    theta_e: float


def reference_point(s, wheelbase: float, ref_point: str) -> tuple[float, float]:
    x, y, th = s[0], s[1], s[2]
    if ref_point == "rear":
        return x, y
    if ref_point == "center_of_gravity":
        return x + 0.5 * wheelbase * math.cos(th), y + 0.5 * wheelbase * math.sin(th)
    if ref_point == "front_axle":
        return x + wheelbase * math.cos(th), y + wheelbase * math.sin(th)
    raise ValueError(f"unknown reference point {ref_point!r}")


def tracking_error(s, path: PathSpec, wheelbase: float,
                   ref_point: str = "front_axle") -> TrackingError:
    px, py = reference_point(s, wheelbase, ref_point)
    i = path.nearest_index(px, py)
    tx, ty = path.tangent(i)
    ox = px - float(path.points[i, 0])
    oy = py - float(path.points[i, 1])
    e_p = ty * ox - tx * oy
    theta_e = wrap_angle(float(path.headings[i]) - s[2])
    return TrackingError(e_p=e_p, theta_e=theta_e)


# ---------------------------------------------------------------------------
# Stanley


@dataclass(frozen=True)
class StanleyParams:
    g: float

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("Stanley gain must be positive")


STANLEY_MIN_SPEED = 0.1


def stanley(e: TrackingError, v_f: float, params: StanleyParams,
            bounds: tuple[float, float]) -> float:
    v = max(v_f, STANLEY_MIN_SPEED)
    return clamp(e.theta_e + math.atan(params.g * e.e_p / v), *bounds)


def steering_rate_command(delta_cmd: float, delta_now: float, dt: float,
                          params: VehicleParams) -> float:
    """Rate input that tracks a steering-angle command within one period."""
    return clamp((delta_cmd - delta_now) / dt,
                 params.steer_rate_min, params.steer_rate_max)


# ---------------------------------------------------------------------------
# Pure pursuit


@dataclass(frozen=True)
class PurePursuitParams:
    L: float

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("lookahead must be positive")


@dataclass(frozen=True)
class PurePursuitCommand:
    delta: float
    alpha: float
    curvature: float
    e_along: float    # forward component of the goal in the vehicle frame
    e_lat: float      # left-positive lateral component of the goal
    goal_index: int
    goal_held_at_end: bool


def pure_pursuit_steering(alpha: float, wheelbase: float, lookahead: float) -> float:
    return math.atan(2.0 * wheelbase * math.sin(alpha) / lookahead)


def pure_pursuit(s, path: PathSpec, params: PurePursuitParams, wheelbase: float,
                 bounds: tuple[float, float]) -> PurePursuitCommand:
    x, y, th = s[0], s[1], s[2]
    i = path.nearest_index(x, y)
    target_arc = float(path.arclengths[i]) + params.L
    j = int(np.searchsorted(path.arclengths, target_arc))
    held = j >= len(path)
    if held:
        j = len(path) - 1
    gx = float(path.points[j, 0]) - x
    gy = float(path.points[j, 1]) - y
    e_along = math.cos(th) * gx + math.sin(th) * gy
    e_lat = -math.sin(th) * gx + math.cos(th) * gy
    alpha = math.atan2(e_lat, e_along)
    delta = clamp(pure_pursuit_steering(alpha, wheelbase, params.L), *bounds)
    return PurePursuitCommand(delta=delta, alpha=alpha,
                              curvature=2.0 * math.sin(alpha) / params.L,
                              e_along=e_along, e_lat=e_lat, goal_index=j,
                              goal_held_at_end=held)


# ---------------------------------------------------------------------------
# LQR


@dataclass(frozen=True)
class LqrParams:
    Q: np.ndarray
    R: float

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "Q", Q)
        if Q.shape != (2, 2) or not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(Q)[0] < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if self.R <= 0:
            raise ValueError("R must be positive")


class RiccatiError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


LQR_MIN_SPEED = 0.1
_RESIDUAL_LIMIT = 1e-8


def error_system(v: float, wheelbase: float) -> tuple[np.ndarray, np.ndarray]:
    """Linearized lateral error dynamics around zero error at speed v."""
    A = np.array([[0.0, v], [0.0, 0.0]])
    B = np.array([[0.0], [v / wheelbase]])
    return A, B


def lqr_gain(v: float, wheelbase: float, params: LqrParams) -> np.ndarray:
    """Riccati gain row K for the linearized error system at speed v.

    The physical steering command is delta = +K [e_p, theta_e] under this
    module's sign conventions (the linearized input is the negated steering)."""
    if v < LQR_MIN_SPEED:
        raise ValueError(f"speed {v} below the {LQR_MIN_SPEED} m/s threshold")
    if not np.any(params.Q):
        return np.zeros(2)
    A, B = error_system(v, wheelbase)
    R = np.array([[params.R]])
    S = scipy.linalg.solve_continuous_are(A, B, params.Q, R)
    residual = float(np.linalg.norm(
        A.T @ S + S @ A - S @ B @ B.T @ S / params.R + params.Q))
    if not math.isfinite(residual) or residual >= _RESIDUAL_LIMIT:
        raise RiccatiError("Riccati solve did not converge", residual)
    return (B.T @ S / params.R)[0]


def lqr_steering(e: TrackingError, K: np.ndarray,
                 bounds: tuple[float, float]) -> float:
    return clamp(float(K[0] * e.e_p + K[1] * e.theta_e), *bounds)


class LqrGainCache:
    """Per-run gain cache keyed by speed rounded to 0.1 m/s, holding the last
    gain when the vehicle moves slower than the solvable threshold."""

    def __init__(self, wheelbase: float, params: LqrParams):
        self.wheelbase = wheelbase
        self.params = params
        self._cache: dict[float, np.ndarray] = {}
        self._last = np.zeros(2)

    def gain(self, v: float) -> np.ndarray:
        if v < LQR_MIN_SPEED:
            return self._last
        key = round(v, 1)
        K = self._cache.get(key)
        if K is None:
            K = lqr_gain(max(key, LQR_MIN_SPEED), self.wheelbase, self.params)
            self._cache[key] = K
        self._last = K
        return K


# ---------------------------------------------------------------------------
# NMPC


@dataclass(frozen=True)
class NmpcParams:
    Q: np.ndarray
    R: float
    n_h: int
    path_approx: str = "linear"
    ref_point: str = "center_of_gravity"

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "Q", Q)
        if Q.shape != (2, 2) or not np.allclose(Q, Q.T, atol=1e-12) \
                or np.linalg.eigvalsh(Q)[0] < -1e-12:
            raise ValueError("Q must be a symmetric 2x2 PSD matrix")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.n_h < 1:
            raise ValueError("horizon must be at least one step")
        if self.path_approx not in ("linear", "quadratic", "cubic"):
            raise ValueError(f"unknown path approximation {self.path_approx!r}")
        if self.ref_point not in ("rear", "center_of_gravity"):
            raise ValueError(f"unknown reference point {self.ref_point!r}")


@dataclass(frozen=True)
class NmpcResult:
    inputs: tuple
    cost: float
    budget_exhausted: bool
    evaluations: int

    @property
    def first(self) -> float:
        return self.inputs[0]


_DEGREE = {"linear": 1, "quadratic": 2, "cubic": 3}
_DESCENT_STEPS = (0.2, 0.05, 0.0125)
_RESTART_OFFSETS = (0.0, 0.1, -0.1)
_SWEEP_BUDGET = 200


def fit_curvatures(window: PathSpec, arc_offsets, degree: int):
    """Curvature of a polynomial least-squares fit of the window, evaluated
    ahead of the window start. The fit lives in the frame of the first sample
    (tangent as x-axis); a linear fit therefore carries zero curvature."""
    h0 = float(window.headings[0])
    c, s = math.cos(h0), math.sin(h0)
    dx = window.points[:, 0] - float(window.points[0, 0])
    dy = window.points[:, 1] - float(window.points[0, 1])
    xs = c * dx + s * dy
    ys = -s * dx + c * dy
    deg = min(degree, len(xs) - 1)
    with warnings.catch_warnings():
        # collinear windows make higher degrees rank-deficient, which is fine
        warnings.simplefilter("ignore")
        coeffs = np.polyfit(xs, ys, deg)
    d1 = np.polyder(coeffs)
    d2 = np.polyder(coeffs, 2)
    out = []
    for a in arc_offsets:
        x = min(float(a), float(xs[-1]))
        slope = float(np.polyval(d1, x))
        curv = float(np.polyval(d2, x))
        out.append(curv / (1.0 + slope * slope) ** 1.5)
    return out


class _Rollout:
    """Single-shooting rollout of the lateral error model with incremental
    re-evaluation: changing input j only re-rolls steps j..n_h-1."""

    def __init__(self, e0: TrackingError, v_f: float, curvatures, dt: float,
                 wheelbase: float, Q: np.ndarray, R: float):
        self.v = v_f
        self.k = curvatures
        self.dt = dt
        self.l = wheelbase
        self.q11, self.q12, self.q22 = float(Q[0, 0]), float(Q[0, 1]), float(Q[1, 1])
        self.R = R
        self.n = len(curvatures)
        self.e0 = (e0.e_p, e0.theta_e)
        self.evaluations = 0

    def _advance(self, state, u, kappa):
        ep, th = state
        ep1 = ep + self.dt * self.v * math.sin(th - u)
        th1 = th + self.dt * (self.v * kappa - self.v * math.sin(u) / self.l)
        return (ep1, th1)

    def _stage_cost(self, state, u) -> float:
        ep, th = state
        return (self.q11 * ep * ep + 2.0 * self.q12 * ep * th
                + self.q22 * th * th + self.R * u * u)

    def full(self, inputs):
        """Total cost plus per-step prefix data for later suffix evaluation."""
        states = [self.e0]
        costs = []
        for i, u in enumerate(inputs):
            nxt = self._advance(states[-1], u, self.k[i])
            states.append(nxt)
            costs.append(self._stage_cost(nxt, u))
        self.evaluations += 1
        return sum(costs), states, costs

    def suffix(self, states, costs, inputs, j, u_j) -> float:
        """Cost of ``inputs`` with coordinate j replaced by ``u_j``."""
        total = sum(costs[:j])
        state = states[j]
        for i in range(j, self.n):
            u = u_j if i == j else inputs[i]
            state = self._advance(state, u, self.k[i])
            total += self._stage_cost(state, u)
        self.evaluations += 1
        return total


def _descend(roll: _Rollout, start, bounds, candidate_grid) -> tuple[tuple, float, bool]:
    lo, hi = bounds
    inputs = [clamp(u, lo, hi) for u in start]
    cost, states, costs = roll.full(inputs)
    sweeps = 0
    exhausted = False
    while sweeps < _SWEEP_BUDGET:
        sweeps += 1
        improved = False
        for j in range(roll.n):
            if candidate_grid is not None:
                candidates = candidate_grid
            else:
                candidates = [clamp(inputs[j] + d * s, lo, hi)
                              for s in _DESCENT_STEPS for d in (1.0, -1.0)]
            best_u, best_c = inputs[j], cost
            for u in candidates:
                if u == inputs[j]:
                    continue
                c = roll.suffix(states, costs, inputs, j, u)
                if c < best_c - 1e-15:
                    best_u, best_c = u, c
            if best_u != inputs[j]:
                inputs[j] = best_u
                cost, states, costs = roll.full(inputs)
                improved = True
        if not improved:
            break
    else:
        exhausted = True
    return tuple(inputs), cost, exhausted


def nmpc(e0: TrackingError, window: PathSpec, v_f: float, params: NmpcParams,
         dt: float, bounds: tuple[float, float], wheelbase: float,
         warm_start=None, candidate_grid=None) -> NmpcResult:
    """Receding-horizon lateral control: minimize the quadratic error/effort
    cost over the input sequence and return it (apply the first input).

    ``candidate_grid`` switches the per-coordinate search to a fixed grid,
    which makes the optimum exactly reproducible by exhaustive search."""
    v = max(v_f, STANLEY_MIN_SPEED)
    offsets = [(i + 1) * dt * v for i in range(params.n_h)]
    curvatures = fit_curvatures(window, offsets, _DEGREE[params.path_approx])
    roll = _Rollout(e0, v, curvatures, dt, wheelbase, params.Q, params.R)

    starts = []
    if warm_start is not None and len(warm_start) == params.n_h:
        starts.append(tuple(warm_start))
    starts.extend(tuple([o] * params.n_h) for o in _RESTART_OFFSETS)
    if candidate_grid is not None:
        # keep every evaluated point on the grid, so the result is exactly
        # reproducible by exhaustive grid search
        starts = [tuple(min(candidate_grid, key=lambda g: abs(g - u))
                        for u in start) for start in starts]

    best = None
    exhausted = False
    for start in starts:
        inputs, cost, ex = _descend(roll, start, bounds, candidate_grid)
        exhausted = exhausted or ex
        if best is None or cost < best[1] - 1e-15:
            best = (inputs, cost)
    return NmpcResult(inputs=best[0], cost=best[1], budget_exhausted=exhausted,
                      evaluations=roll.evaluations)


# ---------------------------------------------------------------------------
# PID speed control


@dataclass(frozen=True)
class PidParams:
    k_p: float
    k_i: float
    k_d: float
    v_t: float

    def __post_init__(self):
        if min(self.k_p, self.k_i, self.k_d) < 0:
            raise ValueError("PID gains must be nonnegative")


@dataclass(frozen=True)
class PidMemory:
    integral: float = 0.0
    prev_err: float | None = None
    prev_v: float | None = None


def pid_speed(v_hat: float, memory: PidMemory, params: PidParams, dt: float,
              bounds: tuple[float, float]) -> tuple[float, PidMemory]:
    """One PID step on the speed estimate; returns (acceleration, memory).

    The derivative acts on the measured speed (not the error) so setpoint
    steps do not kick it; the integral accumulates trapezoidally and freezes
    whenever the raw command exceeds the actuator bound (anti-windup)."""
    err = params.v_t - v_hat
    integral = memory.integral
    if memory.prev_err is not None:
        integral += 0.5 * dt * (err + memory.prev_err)
    derivative = 0.0
    if memory.prev_v is not None and params.k_d > 0:
        derivative = -params.k_d * (v_hat - memory.prev_v) / dt
    u = params.k_p * err + params.k_i * integral + derivative
    lo, hi = bounds
    if not lo <= u <= hi:
        # saturated: hold the integral where it was and recompute
        integral = memory.integral
        u = params.k_p * err + params.k_i * integral + derivative
    return clamp(u, lo, hi), PidMemory(integral=integral, prev_err=err,
                                       prev_v=v_hat)
