"""Convergence and accuracy metrics over estimate-error time series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one seeded trial.

    convergence_time is None when the criterion was never met; MAE values
    are computed over the post-convergence window (or None likewise).
    """

    seed: int
    convergence_time: Optional[float]
    mae_x: Optional[float]
    mae_y: Optional[float]
    mae_psi: Optional[float]

    @property
    def converged(self) -> bool:
        return self.convergence_time is not None


def convergence_time(ts, errors, pos_tol: float = 0.3, yaw_tol: float = 0.2,
                     hold: float = 5.0) -> Optional[float]:
    """First time after which the error stays within tolerance for ``hold`` s.

    ``errors`` is (n, 3) of (e_x, e_y, e_psi); the criterion is
    ||(e_x, e_y)|| < pos_tol and |e_psi| < yaw_tol, sustained.
    """
    ts = np.asarray(ts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    ok = (np.hypot(errors[:, 0], errors[:, 1]) < pos_tol) \
        & (np.abs(errors[:, 2]) < yaw_tol)
    start = None
    for k in range(len(ts)):
        if ok[k]:
            if start is None:
                start = k
            if ts[k] - ts[start] >= hold:
                return float(ts[start])
        else:
            start = None
    return None


def mean_abs_error(errors, axis_slice=slice(None)) -> np.ndarray:
    """Per-axis MAE over an (n, 3) error window."""
    errors = np.asarray(errors, dtype=float)
    return np.mean(np.abs(errors[axis_slice]), axis=0)
