"""Planar frame transforms and the continuous relative-motion model.

State and input layouts used throughout the package:

    X = [x_ij, y_ij, psi_ij]                      relative state of robot j
                                                  in robot i's horizontal frame
    U = [v_i_x, v_i_y, r_i, v_j_x, v_j_y, r_j]    horizontal-frame velocities
                                                  and yaw rates of the pair

Both are plain float64 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 90-degree rotation; shows up in the relative dynamics as the cross-coupling
# between own yaw rate and relative position.
SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])

_HALF_PI = np.pi / 2.0


def wrap_angle(psi):
    """Wrap an angle (or array of angles) to (-pi, pi]."""
    wrapped = np.mod(psi, 2.0 * np.pi)
    wrapped = np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)
    return float(wrapped) if np.isscalar(psi) else wrapped


@dataclass(frozen=True)
class Attitude:
    """Pitch/roll attitude in radians. Must stay clear of gimbal limits."""

    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.phi)):
            raise ValueError("attitude angles must be finite")
        if abs(self.theta) >= _HALF_PI or abs(self.phi) >= _HALF_PI:
            raise ValueError("attitude out of range: |theta|, |phi| must be < pi/2")


@dataclass(frozen=True)
class BodyRates:
    """Body-frame roll and yaw angular rates (rad/s) from the gyro."""

    p_bar: float
    r_bar: float

    def __post_init__(self):
        if not (np.isfinite(self.p_bar) and np.isfinite(self.r_bar)):
            raise ValueError("body rates must be finite")


def rotation(psi: float) -> np.ndarray:
    """2x2 rotation matrix for a yaw angle psi."""
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s], [s, c]])


def body_to_horizontal_velocity(v_body, att: Attitude) -> np.ndarray:
    """Project a 3-axis body-frame velocity into the horizontal frame.

    Applies the 2x3 X-Y rotation-sequence projection; returns [vx, vy].
    """
    v_body = np.asarray(v_body, dtype=float)
    if v_body.shape != (3,) or not np.all(np.isfinite(v_body)):
        raise ValueError("v_body must be a finite 3-vector")
    ct, st = np.cos(att.theta), np.sin(att.theta)
    cp, sp = np.cos(att.phi), np.sin(att.phi)
    m = np.array([
        [ct, 0.0, st],
        [sp * st, cp, -ct * sp],
    ])
    return m @ v_body


def body_to_horizontal_yaw_rate(rates: BodyRates, att: Attitude,
                                full_transform: bool = True) -> float:
    """Horizontal-frame yaw rate from body-frame gyro rates.

    With ``full_transform`` (default) applies the Euler-rate relation
    -sin(theta)/cos(phi) * p_bar + cos(theta)/cos(phi) * r_bar.  With
    ``full_transform=False`` the body yaw rate is passed through unchanged,
    which is adequate for small attitudes.
    """
    if not full_transform:
        return rates.r_bar
    cp = np.cos(att.phi)
    # Attitude invariant already keeps |phi| < pi/2, but guard the division.
    if abs(cp) < 1e-9:
        raise ValueError("cos(phi) too close to zero for yaw-rate transform")
    return (-np.sin(att.theta) * rates.p_bar + np.cos(att.theta) * rates.r_bar) / cp


def relative_dynamics(X, U) -> np.ndarray:
    """Continuous relative-motion model Xdot = f(X, U).

    Xdot_p = R(psi) v_j - v_i - S r_i p,  Xdot_psi = r_j - r_i.
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    p = X[:2]
    v_i, r_i = U[0:2], U[2]
    v_j, r_j = U[3:5], U[5]
    pdot = rotation(X[2]) @ v_j - v_i - SKEW @ p * r_i
    return np.array([pdot[0], pdot[1], r_j - r_i])


def integrate_step(X, U, dt: float) -> np.ndarray:
    """One forward-Euler step of the relative dynamics; psi re-wrapped."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    X = np.asarray(X, dtype=float)
    out = X + relative_dynamics(X, U) * dt
    out[2] = wrap_angle(out[2])
    return out
