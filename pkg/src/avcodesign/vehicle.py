"""Kinematic single-track vehicle: noisy dynamics and noisy measurements.

State s = (x_r, y_r, theta, delta, v_r): rear-axle position, heading,
steering angle, rear speed. Inputs u = (v_s, a_r): steering rate and rear
acceleration. The deterministic part integrates with RK4; process noise adds
a Gaussian increment with covariance W*dt after each step (Euler-Maruyama);
steering and speed clamp to their intervals afterwards.

Measurements observe the full state plus Gaussian noise with covariance V,
and are dropped entirely with probability p. The drop decision, measurement
noise and process noise each consume their own random stream so that runs
with different drop rates share every other draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SteeringSingularity(ValueError):
    """Steering magnitude at or beyond pi/2 has no single-track solution."""


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.7
    delta_min: float = -0.6
    delta_max: float = 0.6
    steer_rate_min: float = -1.0
    steer_rate_max: float = 1.0
    v_min: float = 0.0
    v_max: float = 20.0
    accel_min: float = -3.0
    accel_max: float = 3.0

    def clamp_input(self, u):
        v_s, a_r = u
        return (min(max(v_s, self.steer_rate_min), self.steer_rate_max),
                min(max(a_r, self.accel_min), self.accel_max))

    def clamp_state(self, s):
        x, y, th, de, v = s
        return (x, y, th,
                min(max(de, self.delta_min), self.delta_max),
                min(max(v, self.v_min), self.v_max))


def dynamics_derivative(s, u, wheelbase: float):
    """Time derivative (dx, dy, dtheta, ddelta, dv) of the single-track model."""
    if wheelbase <= 0:
        raise ValueError("wheelbase must be positive")
    x, y, th, de, v = s
    if abs(de) >= math.pi / 2:
        raise SteeringSingularity(f"steering angle {de} outside (-pi/2, pi/2)")
    v_s, a_r = u
    return (v * math.cos(th), v * math.sin(th), v * math.tan(de) / wheelbase,
            v_s, a_r)


def rk4_step(s, u, dt: float, params: VehicleParams):
    """Deterministic RK4 step; inputs clamp first, no state clamping here."""
    u = params.clamp_input(u)
    l = params.wheelbase
    k1 = dynamics_derivative(s, u, l)
    s2 = tuple(a + 0.5 * dt * b for a, b in zip(s, k1))
    k2 = dynamics_derivative(s2, u, l)
    s3 = tuple(a + 0.5 * dt * b for a, b in zip(s, k2))
    k3 = dynamics_derivative(s3, u, l)
    s4 = tuple(a + dt * b for a, b in zip(s, k3))
    k4 = dynamics_derivative(s4, u, l)
    return tuple(a + dt / 6.0 * (p + 2 * q + 2 * r + w)
                 for a, p, q, r, w in zip(s, k1, k2, k3, k4))


def step(s, u, dt: float, params: VehicleParams, noise_increment=None):
    """One simulation step: RK4, additive noise increment, state clamping.

    ``noise_increment`` is the precomputed 5-vector sqrt(W*dt)-scaled draw
    (None for noiseless stepping)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = rk4_step(s, u, dt, params)
    if noise_increment is not None:
        out = tuple(a + float(b) for a, b in zip(out, noise_increment))
    return params.clamp_state(out)


def front_wheel(s, wheelbase: float):
    """Front-axle position, speed along the front-wheel heading, yaw rate."""
    x, y, th, de, v = s
    if abs(de) >= math.pi / 2:
        raise SteeringSingularity(f"steering angle {de} outside (-pi/2, pi/2)")
    x_f = x + wheelbase * math.cos(th)
    y_f = y + wheelbase * math.sin(th)
    v_f = v / math.cos(de)
    omega = v_f * math.sin(de) / wheelbase
    return x_f, y_f, v_f, omega


def jacobian(s, wheelbase: float) -> np.ndarray:
    """State Jacobian of the dynamics; inputs enter additively and drop out."""
    x, y, th, de, v = s
    F = np.zeros((5, 5))
    F[0, 2] = -v * math.sin(th)
    F[0, 4] = math.cos(th)
    F[1, 2] = v * math.cos(th)
    F[1, 4] = math.sin(th)
    F[2, 3] = v * (1.0 + math.tan(de) ** 2) / wheelbase
    F[2, 4] = math.tan(de) / wheelbase
    return F


def matrix_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues below zero clip to zero so
    singular covariances (including exactly zero) transform cleanly."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (5, 5) or not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError("covariance must be a symmetric 5x5 matrix")
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] < -1e-9:
        raise ValueError("covariance must be positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


@dataclass(frozen=True)
class NoiseSpec:
    """Noise environment of one run: process covariance rate W (per second),
    measurement covariance V, drop probability, and the run seed."""
    W: np.ndarray
    V: np.ndarray
    drop_probability: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float))
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop probability must lie in [0, 1]")
        matrix_sqrt(self.W)
        matrix_sqrt(self.V)

    def streams(self):
        """Independent process / measurement / drop generators for one run."""
        kids = np.random.SeedSequence(self.seed).spawn(3)
        return tuple(np.random.default_rng(k) for k in kids)


def process_increment(W_sqrt: np.ndarray, dt: float, rng) -> np.ndarray | None:
    """Euler-Maruyama increment sqrt(dt) * sqrt(W) z. Always consumes the
    stream so noiseless and noisy runs stay draw-aligned."""
    z = rng.standard_normal(5)
    if not W_sqrt.any():
        return None
    return math.sqrt(dt) * (W_sqrt @ z)


def measure(s, V_sqrt: np.ndarray, drop_probability: float, meas_rng, drop_rng):
    """Full-state observation with additive noise, or None when dropped.

    Both streams are consumed on every call: runs that differ only in drop
    probability see identical noise on the measurements they share, and
    raising the probability only grows the dropped set."""
    u = float(drop_rng.uniform())
    z = meas_rng.standard_normal(5)
    if u < drop_probability:
        return None
    return np.asarray(s, dtype=float) + V_sqrt @ z
