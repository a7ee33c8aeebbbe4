"""Extended Kalman filter for the single-track model, full-state observations.

Prediction integrates the estimate through the noiseless dynamics and the
covariance through dP/dt = F P + P F' + W jointly with RK4, re-evaluating the
Jacobian at every stage and re-symmetrizing. The measurement update uses
K = P (P + V)^-1 on the full state; dropped observations leave the filter
untouched. The covariance must stay positive semidefinite (within tolerance)
at every step, else the filter raises.

A frozen-Jacobian helper replays the covariance recursion along a fixed
reference trajectory, making it a deterministic function of (W, V, drop
pattern) alone. That turns the monotonicity statements about sensor quality
into exact matrix-order assertions instead of statistical ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .vehicle import VehicleParams, dynamics_derivative, jacobian

PSD_TOLERANCE = 1e-9


class CovarianceError(RuntimeError):
    """Covariance lost positive semidefiniteness beyond tolerance."""


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_psd(P: np.ndarray) -> np.ndarray:
    low = float(np.linalg.eigvalsh(P)[0])
    if low < -PSD_TOLERANCE:
        raise CovarianceError(f"covariance eigenvalue {low} below tolerance")
    return P


@dataclass(frozen=True)
class EkfState:
    s_hat: tuple
    P: np.ndarray
    F: np.ndarray | None = None      # Jacobian at the last prediction
    K: np.ndarray | None = None      # gain of the last applied update
    regularized: bool = False        # a singular (P+V) was ever regularized

    @staticmethod
    def initial(s0, P0) -> "EkfState":
        return EkfState(s_hat=tuple(float(v) for v in s0),
                        P=_check_psd(_sym(np.asarray(P0, dtype=float))))

    @property
    def speed_estimate(self) -> float:
        return self.s_hat[4]

    @property
    def speed_variance(self) -> float:
        return float(self.P[4, 4])


def ekf_predict(ekf: EkfState, u, dt: float, W: np.ndarray,
                params: VehicleParams) -> EkfState:
    """Propagate estimate and covariance over dt with no measurement."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = params.clamp_input(u)
    W = np.asarray(W, dtype=float)
    l = params.wheelbase

    def deriv(s, P):
        F = jacobian(s, l)
        return dynamics_derivative(s, u, l), _sym(F @ P + P @ F.T + W), F

    s0, P0 = ekf.s_hat, ekf.P
    ds1, dP1, F1 = deriv(s0, P0)
    s2 = tuple(a + 0.5 * dt * b for a, b in zip(s0, ds1))
    ds2, dP2, _ = deriv(s2, _sym(P0 + 0.5 * dt * dP1))
    s3 = tuple(a + 0.5 * dt * b for a, b in zip(s0, ds2))
    ds3, dP3, _ = deriv(s3, _sym(P0 + 0.5 * dt * dP2))
    s4 = tuple(a + dt * b for a, b in zip(s0, ds3))
    ds4, dP4, _ = deriv(s4, _sym(P0 + dt * dP3))

    s1 = tuple(a + dt / 6.0 * (p + 2 * q + 2 * r + w)
               for a, p, q, r, w in zip(s0, ds1, ds2, ds3, ds4))
    P1 = _sym(P0 + dt / 6.0 * (dP1 + 2 * dP2 + 2 * dP3 + dP4))
    return replace(ekf, s_hat=s1, P=_check_psd(P1), F=F1)


def _gain(P: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, bool]:
    A = P + V
    # near-singular innovation covariances (noiseless updates collapse P to
    # rounding dust) make the solve produce garbage rather than raise, so
    # regularize on conditioning, not just on the exception
    if np.linalg.eigvalsh(A)[0] < 1e-12:
        A = A + 1e-12 * np.eye(len(A))
        return np.linalg.solve(A, P).T, True
    try:
        # P and A are symmetric, so solve(A, P).T equals P A^-1
        return np.linalg.solve(A, P).T, False
    except np.linalg.LinAlgError:
        A = A + 1e-12 * np.eye(len(A))
        return np.linalg.solve(A, P).T, True


def ekf_update(ekf: EkfState, y, V: np.ndarray) -> EkfState:
    """Fold in a full-state observation; a dropped one (None) changes nothing."""
    if y is None:
        return ekf
    y = np.asarray(y, dtype=float)
    if y.shape != (5,):
        raise ValueError("observation must have 5 components")
    V = np.asarray(V, dtype=float)
    K, regularized = _gain(ekf.P, V)
    innovation = y - np.asarray(ekf.s_hat)
    s1 = tuple(float(a + b) for a, b in zip(ekf.s_hat, K @ innovation))
    P1 = _sym((np.eye(5) - K) @ ekf.P)
    return EkfState(s_hat=s1, P=_check_psd(P1), F=ekf.F, K=K,
                    regularized=ekf.regularized or regularized)


# ---------------------------------------------------------------------------
# Frozen-Jacobian covariance recursion.


def predict_covariance(P: np.ndarray, F: np.ndarray, W: np.ndarray,
                       dt: float) -> np.ndarray:
    """One RK4 step of dP/dt = F P + P F' + W with the Jacobian held fixed."""
    def deriv(Q):
        return _sym(F @ Q + Q @ F.T + W)

    k1 = deriv(P)
    k2 = deriv(_sym(P + 0.5 * dt * k1))
    k3 = deriv(_sym(P + 0.5 * dt * k2))
    k4 = deriv(_sym(P + dt * k3))
    return _sym(P + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def update_covariance(P: np.ndarray, V: np.ndarray) -> np.ndarray:
    K, _ = _gain(P, V)
    return _sym((np.eye(len(P)) - K) @ P)


def covariance_sequence(reference_states, dt: float, W: np.ndarray,
                        V: np.ndarray, updates, P0: np.ndarray,
                        params: VehicleParams) -> list:
    """Covariance after each step along a fixed reference trajectory.

    ``reference_states[k]`` is the state at the start of step k and
    ``updates[k]`` says whether a (non-dropped) measurement folds in after
    predicting across that step. The recursion never touches the estimate, so
    it is a deterministic map from (W, V, updates) to matrix sequences."""
    if len(updates) != len(reference_states):
        raise ValueError("one update flag per reference state required")
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    P = _check_psd(_sym(np.asarray(P0, dtype=float)))
    out = []
    for s, do_update in zip(reference_states, updates):
        F = jacobian(s, params.wheelbase)
        P = predict_covariance(P, F, W, dt)
        if do_update:
            P = update_covariance(P, V)
        _check_psd(P)
        out.append(P)
    return out
