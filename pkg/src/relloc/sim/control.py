"""Velocity commands: randomized start-up excitation and PID station keeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PidGains:
    k_p: float = 0.8
    k_d: float = 0.1
    k_i: float = 0.05

    def __post_init__(self):
        if self.k_p < 0.0 or self.k_d < 0.0 or self.k_i < 0.0:
            raise ValueError("gains must be non-negative")


def formation_control(e, e_dot, e_int, gains: PidGains,
                      v_max: float = 1.0) -> np.ndarray:
    """PID velocity command from a 2-axis position error, saturated at v_max."""
    e = np.asarray(e, dtype=float)
    e_dot = np.asarray(e_dot, dtype=float)
    e_int = np.asarray(e_int, dtype=float)
    v = gains.k_p * e + gains.k_d * e_dot + gains.k_i * e_int
    speed = np.linalg.norm(v)
    if speed > v_max:
        v = v * (v_max / speed)
    return v


class PidController:
    """Stateful wrapper around formation_control with anti-windup.

    The integral is clamped so its own contribution can never exceed the
    velocity cap.
    """

    def __init__(self, gains: PidGains = PidGains(), v_max: float = 1.0):
        self.gains = gains
        self.v_max = v_max
        self.reset()

    def reset(self):
        self._e_int = np.zeros(2)
        self._e_prev = None

    def update(self, e, dt: float) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        e_dot = np.zeros(2) if self._e_prev is None else (e - self._e_prev) / dt
        self._e_prev = e.copy()
        self._e_int = self._e_int + e * dt
        if self.gains.k_i > 0.0:
            lim = self.v_max / self.gains.k_i
            self._e_int = np.clip(self._e_int, -lim, lim)
        return formation_control(e, e_dot, self._e_int, self.gains, self.v_max)


class StartupManeuver:
    """Zero-net-displacement random excitation flown before coordination.

    Commands are piecewise constant over 2-second periods: a random velocity
    and yaw rate for the first half, their negation for the second half.
    Negating both makes the world-frame displacement of each period cancel
    exactly, keeping every robot near its start while still exciting the
    filter.  Commands are a pure function of (seed, robot, time), so streams
    are reproducible and random-access.
    """

    def __init__(self, seed: int, v_max: float = 1.0,
                 yaw_rate_max: float = 0.5, period: float = 2.0,
                 min_speed_frac: float = 0.7):
        self.seed = seed
        self.v_max = v_max
        self.yaw_rate_max = yaw_rate_max
        self.period = period
        self.min_speed_frac = min_speed_frac

    def command(self, robot: int, t: float):
        k = int(np.floor(t / self.period))
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(robot, k)))
        angle = rng.uniform(0.0, 2.0 * np.pi)
        speed = rng.uniform(self.min_speed_frac * self.v_max, self.v_max)
        yaw_rate = rng.uniform(-self.yaw_rate_max, self.yaw_rate_max)
        vel = speed * np.array([np.cos(angle), np.sin(angle)])
        if t - k * self.period >= self.period / 2.0:
            vel = -vel
            yaw_rate = -yaw_rate
        return vel, yaw_rate
