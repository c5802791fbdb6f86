"""Local weak observability of the relative-localization system.

Builds the 3x3 matrix of zeroth/first/second-order Lie-derivative gradients
of the quadratic range observation h = p'p/2 along the relative dynamics,
evaluates its determinant (both numerically and in closed form), and
classifies flight regimes that make the relative pose unobservable.

Note the analyzer's h is the squared-range form; the EKF observes the
square root.  The regime classification does not depend on that choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import SKEW, rotation

DET_THRESHOLD = 1e-6

# Engineering thresholds for the regime flags; the underlying conditions are
# exact zeros.
BASELINE_EPS = 0.05    # m
SPEED_EPS = 0.01       # m/s
RATE_EPS = 0.01        # rad/s

ZERO_BASELINE = "ZeroBaseline"
TARGET_STATIONARY = "TargetStationary"
FORMATION_LOCK = "FormationLock"
OBSERVABLE = "Observable"


@dataclass(frozen=True)
class ObservabilityReport:
    O: np.ndarray                 # 3x3 Lie-gradient matrix
    det_matrix: float             # numeric determinant (authoritative)
    det_closed_form: float        # closed-form evaluation, for cross-checking
    rank: int                     # SVD rank at sigma_max * 1e-10
    regime_flags: frozenset


def lie_gradients(X, U):
    """Gradients of the order-0/1/2 Lie derivatives of h = p'p/2.

    Returns three 1x3 row vectors (as (3,) arrays) w.r.t. [x, y, psi].
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    p = X[:2]
    v_i, r_i = U[0:2], U[2]
    v_j, r_j = U[3:5], U[5]
    R = rotation(X[2])
    RSvj = R @ SKEW @ v_j            # d(R v_j)/dpsi
    w = R @ v_j - v_i                # relative velocity in frame i

    g0 = np.array([p[0], p[1], 0.0])
    g1 = np.array([w[0], w[1], p @ RSvj])
    # L2h = w'(w - S r_i p) + p'R S v_j (r_j - r_i); gradient simplifies to
    # the p-block r_i v_i'S + r_j v_j'S'R' and the psi scalar
    # -2 v_i'R S v_j - p'R v_j r_j.
    gp = r_i * (v_i @ SKEW) + r_j * (v_j @ SKEW.T) @ R.T
    gpsi = -2.0 * v_i @ RSvj - (p @ (R @ v_j)) * r_j
    g2 = np.array([gp[0], gp[1], gpsi])
    return g0, g1, g2


def observability_matrix(X, U) -> np.ndarray:
    """Stack the three Lie-derivative gradients into the 3x3 matrix O."""
    return np.vstack(lie_gradients(X, U))


def determinant(X, U):
    """Determinant of O, by matrix determinant and by the closed form.

    Returns (det_matrix, det_closed_form).  The matrix route is
    authoritative; the closed form exists for cross-checking and is reported
    alongside it rather than silently reconciled.
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    p = X[:2]
    v_i, r_i = U[0:2], U[2]
    v_j, r_j = U[3:5], U[5]
    R = rotation(X[2])
    Sp = SKEW @ p
    term1 = -(p @ (R @ SKEW @ v_j)) * \
        ((r_i * (v_i @ SKEW) + r_j * (v_j @ SKEW.T) @ R.T) @ Sp)
    term2 = -(2.0 * v_i @ (R @ SKEW @ v_j) + (p @ (R @ v_j)) * r_j) * \
        ((v_j @ R.T - v_i) @ Sp)
    det_closed = float(term1 + term2)
    det_mat = float(np.linalg.det(observability_matrix(X, U)))
    return det_mat, det_closed


def classify_regime(X, U, det_threshold: float = DET_THRESHOLD) -> frozenset:
    """Flags for the practically-relevant unobservable conditions.

    ZeroBaseline: relative position near zero.  TargetStationary: peer not
    moving, so its heading cannot be inferred.  FormationLock: relative
    velocity and both yaw rates near zero, the steady-formation regime.
    Observable is set whenever |det O| exceeds the threshold.
    """
    if det_threshold <= 0.0:
        raise ValueError("det_threshold must be positive")
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    p = X[:2]
    v_i, r_i = U[0:2], U[2]
    v_j, r_j = U[3:5], U[5]
    flags = set()
    if np.linalg.norm(p) < BASELINE_EPS:
        flags.add(ZERO_BASELINE)
    if np.linalg.norm(v_j) < SPEED_EPS:
        flags.add(TARGET_STATIONARY)
    rel_vel = rotation(X[2]) @ v_j - v_i
    if np.linalg.norm(rel_vel) < SPEED_EPS and abs(r_i) < RATE_EPS \
            and abs(r_j) < RATE_EPS:
        flags.add(FORMATION_LOCK)
    det_mat, _ = determinant(X, U)
    if abs(det_mat) > det_threshold:
        flags.add(OBSERVABLE)
    return frozenset(flags)


def analyze(X, U, det_threshold: float = DET_THRESHOLD) -> ObservabilityReport:
    """Full report: matrix, both determinant routes, SVD rank, regime flags."""
    O = observability_matrix(X, U)
    det_mat, det_closed = determinant(X, U)
    sv = np.linalg.svd(O, compute_uv=False)
    tol = sv[0] * 1e-10 if sv[0] > 0.0 else 0.0
    rank = int(np.sum(sv > tol))
    return ObservabilityReport(
        O=O,
        det_matrix=det_mat,
        det_closed_form=det_closed,
        rank=rank,
        regime_flags=classify_regime(X, U, det_threshold),
    )
