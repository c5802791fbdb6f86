"""Per-pair EKF fusing velocity/yaw-rate inputs with UWB range measurements.

The filter state is the relative pose X = [x, y, psi] of the peer robot in
the owner's horizontal frame.  Predictions run at the input rate; range
updates arrive whenever a ranging exchange for the pair completes.  Heights
enter only through the range observation, never through the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import integrate_step, wrap_angle

# Defaults for the two-robot simulation study.
DEFAULT_P0_DIAG = (10.0, 10.0, 0.1)
DEFAULT_Q_V = 0.25
DEFAULT_Q_R = 0.4
DEFAULT_R_D = 0.1

# Below this predicted range the observation Jacobian is ill-defined and the
# measurement update is skipped.
Z_MIN = 1e-6

# Range updates are also skipped while the estimated planar baseline is this
# small: the planar entries of H vanish as p -> 0 while the gain along the
# (arbitrary) baseline direction blows up, which can fling the state far past
# the truth on the very first update and lock the innovation gate shut.
BASELINE_MIN = 0.05

# Consecutive gated innovations tolerated before the covariance is
# re-inflated to let the filter re-acquire; isolated outliers never reach it.
_GATE_RECOVERY_COUNT = 50
_GATE_RECOVERY_INFLATION = (2.0, 2.0, 0.2)

# Eigenvalue floor applied when re-conditioning P after every step.
_EIG_FLOOR = 1e-12


class FilterFault(RuntimeError):
    """Raised when the filter state goes non-finite or the innovation
    covariance loses positivity.  Carries the offending state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class RangeObservation:
    """One processed range measurement plus the heights of both robots."""

    d: float
    h_i: float
    h_j: float
    t: float = 0.0

    def __post_init__(self):
        if self.d < 0.0 or self.h_i < 0.0 or self.h_j < 0.0:
            raise ValueError("range and heights must be non-negative")


@dataclass
class EkfState:
    """Relative-pose estimate with covariance and noise parameters."""

    x: np.ndarray            # [x_ij, y_ij, psi_ij]
    P: np.ndarray            # 3x3 covariance
    Q: np.ndarray            # 6x6 input-noise covariance (diagonal)
    R: float                 # scalar range-noise variance
    rejected: int = 0        # innovations discarded by the gate
    _gate_streak: int = 0    # consecutive rejections, for gate recovery

    def copy(self) -> "EkfState":
        return EkfState(self.x.copy(), self.P.copy(), self.Q, self.R,
                        self.rejected, self._gate_streak)


def initialize(P0=None, q_v: float = DEFAULT_Q_V, q_r: float = DEFAULT_Q_R,
               r_d: float = DEFAULT_R_D) -> EkfState:
    """Fresh filter: zero state, prior covariance P0, diagonal Q and scalar R.

    Defaults reproduce the two-robot simulation configuration.
    """
    if P0 is None:
        P0 = np.diag(DEFAULT_P0_DIAG)
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (3, 3):
        raise ValueError("P0 must be 3x3")
    if np.min(np.linalg.eigvalsh(0.5 * (P0 + P0.T))) < -1e-9:
        raise ValueError("P0 must be positive semidefinite")
    if q_v <= 0.0 or q_r <= 0.0 or r_d <= 0.0:
        raise ValueError("noise parameters must be positive")
    Q = np.diag([q_v**2, q_v**2, q_r**2, q_v**2, q_v**2, q_r**2])
    return EkfState(x=np.zeros(3), P=P0.copy(), Q=Q, R=r_d**2)


def jacobian_a(X, U, dt: float) -> np.ndarray:
    """State Jacobian of the discrete Euler step, A = I + dt * df/dX."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    r_i = U[2]
    vjx, vjy = U[3], U[4]
    c, s = np.cos(X[2]), np.sin(X[2])
    return np.array([
        [1.0, r_i * dt, (-s * vjx - c * vjy) * dt],
        [-r_i * dt, 1.0, (c * vjx - s * vjy) * dt],
        [0.0, 0.0, 1.0],
    ])


def jacobian_b(X, dt: float) -> np.ndarray:
    """Input Jacobian of the discrete Euler step, B = dt * df/dU.

    The dt factor makes B consistent with A as a linearization of the same
    discrete step; this is pinned down by the finite-difference tests.
    """
    X = np.asarray(X, dtype=float)
    x, y = X[0], X[1]
    c, s = np.cos(X[2]), np.sin(X[2])
    return dt * np.array([
        [-1.0, 0.0, y, c, -s, 0.0],
        [0.0, -1.0, -x, s, c, 0.0],
        [0.0, 0.0, -1.0, 0.0, 0.0, 1.0],
    ])


def observe_range(X, h_i: float, h_j: float) -> float:
    """Predicted range sqrt(x^2 + y^2 + (h_j - h_i)^2)."""
    X = np.asarray(X, dtype=float)
    return float(np.sqrt(X[0]**2 + X[1]**2 + (h_j - h_i)**2))


class DegenerateGeometry(ValueError):
    """Predicted range too small for a well-defined observation Jacobian."""


def jacobian_h(X, h_i: float, h_j: float) -> np.ndarray:
    """Observation Jacobian [x/z, y/z, 0]; rejects near-zero range."""
    X = np.asarray(X, dtype=float)
    z = observe_range(X, h_i, h_j)
    if z < Z_MIN:
        raise DegenerateGeometry(f"predicted range {z:.2e} below {Z_MIN:.0e}")
    return np.array([X[0] / z, X[1] / z, 0.0])


def _condition(P: np.ndarray) -> np.ndarray:
    """Symmetrize and clamp eigenvalues; keeps P PSD over long runs."""
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    if w[0] < _EIG_FLOOR:
        P = (V * np.maximum(w, _EIG_FLOOR)) @ V.T
        P = 0.5 * (P + P.T)
    return P


def predict(s: EkfState, U, dt: float) -> EkfState:
    """EKF time update: Euler step of the state, A P A' + B Q B' covariance."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    U = np.asarray(U, dtype=float)
    A = jacobian_a(s.x, U, dt)
    B = jacobian_b(s.x, dt)
    x_new = integrate_step(s.x, U, dt)
    P_new = A @ s.P @ A.T + B @ s.Q @ B.T
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(P_new))):
        raise FilterFault("non-finite state after predict", state=s)
    return replace(s, x=x_new, P=_condition(P_new))


def update(s: EkfState, obs: RangeObservation, gate: float = 6.0) -> EkfState:
    """EKF measurement update with a sigma gate on the range innovation.

    Degenerate geometry (predicted range ~ 0) skips the update; a gated
    innovation increments ``rejected`` and leaves the state untouched.
    """
    if np.hypot(s.x[0], s.x[1]) < BASELINE_MIN:
        return s.copy()
    try:
        H = jacobian_h(s.x, obs.h_i, obs.h_j)
    except DegenerateGeometry:
        return s.copy()
    z_pred = observe_range(s.x, obs.h_i, obs.h_j)
    S_cov = float(H @ s.P @ H) + s.R
    if S_cov <= 0.0 or not np.isfinite(S_cov):
        raise FilterFault("innovation covariance not positive", state=s)
    innov = obs.d - z_pred
    if abs(innov) > gate * np.sqrt(S_cov):
        streak = s._gate_streak + 1
        P = s.P.copy()
        if streak >= _GATE_RECOVERY_COUNT:
            P = P + np.diag(_GATE_RECOVERY_INFLATION)
            streak = 0
        return replace(s, x=s.x.copy(), P=P, rejected=s.rejected + 1,
                       _gate_streak=streak)
    K = (s.P @ H) / S_cov
    x_new = s.x + K * innov
    x_new[2] = wrap_angle(x_new[2])
    P_new = (np.eye(3) - np.outer(K, H)) @ s.P
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(P_new))):
        raise FilterFault("non-finite state after update", state=s)
    return replace(s, x=x_new, P=_condition(P_new), _gate_streak=0)
