"""Deterministic world stepper: ground truth, noisy broadcasts, ranging loop.

The stepper owns everything the robots cannot know (global positions, true
yaws) and is careful about what crosses into the estimators: each pair
filter only ever sees communicated velocity/yaw-rate inputs, communicated
heights and processed range measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..estimator import EkfState, RangeObservation, initialize, predict, update
from ..kinematics import Attitude, rotation, wrap_angle
from ..ranging import (
    ChannelModel,
    DEFAULT_MEDIAN_WINDOW,
    DEFAULT_SLOT_TIME,
    RangePipeline,
    Schedule,
    simulate_exchange,
    simulation_channel,
)

_SUBSTEPS = 10  # truth integration runs at dt/10 to decouple it from the filter


@dataclass
class RobotTruth:
    """Ground truth of one robot; metrics only, never fed to estimators."""

    pos: np.ndarray                    # (2,) world frame, m
    yaw: float                         # rad
    height: float                      # m
    vel: np.ndarray = field(default_factory=lambda: np.zeros(2))  # own frame
    yaw_rate: float = 0.0
    attitude: Attitude = field(default_factory=Attitude)

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)
        if self.height <= 0.0:
            raise ValueError("height must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario parameters; defaults mirror the two-robot simulation study."""

    n_robots: int = 2
    dt: float = 0.01
    duration: float = 60.0
    v_max: float = 1.0
    sigma_v: float = 0.25          # noise on communicated velocity, m/s
    sigma_r: float = 0.01          # noise on communicated yaw rate, rad/s
    height_sigma: float = 0.01     # truth height jitter, m
    channel: ChannelModel = field(default_factory=simulation_channel)
    seed: int = 0
    slot_time: float = DEFAULT_SLOT_TIME
    median_window: int = DEFAULT_MEDIAN_WINDOW
    q_v: float = 0.25
    q_r: float = 0.4
    r_d: float = 0.1
    conv_pos_tol: float = 0.3      # m, convergence criterion
    conv_yaw_tol: float = 0.2      # rad
    conv_hold: float = 5.0         # s the criterion must hold
    phase_schedule: tuple = ()     # ((name, start_t), ...), time-ordered

    def __post_init__(self):
        if self.n_robots < 2:
            raise ValueError("need at least 2 robots")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        starts = [t for _, t in self.phase_schedule]
        if starts != sorted(starts):
            raise ValueError("phase_schedule must be time-ordered")


class World:
    """Single-threaded discrete-time engine for one scenario run.

    ``pairs`` lists the ordered (observer, target) estimates to maintain,
    0-based; by default every ordered pair gets a filter.
    """

    def __init__(self, config: ScenarioConfig, truths, pairs=None):
        if len(truths) != config.n_robots:
            raise ValueError("one RobotTruth per robot required")
        self.config = config
        self.truths = list(truths)
        self.rng = np.random.default_rng(config.seed)
        n = config.n_robots
        if pairs is None:
            pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        self.filters: dict = {
            (i, j): initialize(q_v=config.q_v, q_r=config.q_r, r_d=config.r_d)
            for i, j in pairs
        }
        self.schedule = Schedule(n)
        self._pipelines = {
            frozenset(p): RangePipeline(config.channel, config.median_window)
            for p in ((i - 1, j - 1) for i, j in self.schedule.pairs)
        }
        self.t = 0.0
        self._next_slot = config.slot_time
        self._heights = np.array([tr.height for tr in self.truths])

    # -- observables ------------------------------------------------------

    def true_relative(self, i: int, j: int) -> np.ndarray:
        """Ground-truth [x, y, psi] of robot j in robot i's frame."""
        ti, tj = self.truths[i], self.truths[j]
        p = rotation(-ti.yaw) @ (tj.pos - ti.pos)
        return np.array([p[0], p[1], wrap_angle(tj.yaw - ti.yaw)])

    def estimate(self, i: int, j: int) -> np.ndarray:
        return self.filters[(i, j)].x.copy()

    def estimate_error(self, i: int, j: int) -> np.ndarray:
        err = self.estimate(i, j) - self.true_relative(i, j)
        err[2] = wrap_angle(err[2])
        return err

    # -- stepping ---------------------------------------------------------

    def step(self, commands):
        """Advance the world by one dt given per-robot (vel, yaw_rate).

        Propagates truth at dt/10, broadcasts noisy inputs, runs one EKF
        predict per filter, then processes every ranging slot that falls
        inside the step in timestamp order.
        """
        cfg = self.config
        sub = cfg.dt / _SUBSTEPS
        for tr, (vel, yaw_rate) in zip(self.truths, commands):
            vel = np.asarray(vel, dtype=float)
            speed = np.linalg.norm(vel)
            if speed > cfg.v_max * (1.0 + 1e-9):
                vel = vel * (cfg.v_max / speed)
            tr.vel = vel
            tr.yaw_rate = float(yaw_rate)
            for _ in range(_SUBSTEPS):
                tr.pos = tr.pos + rotation(tr.yaw) @ tr.vel * sub
                tr.yaw = wrap_angle(tr.yaw + tr.yaw_rate * sub)
            if not (np.all(np.isfinite(tr.pos)) and np.isfinite(tr.yaw)):
                raise RuntimeError(
                    f"non-finite truth at t={self.t:.3f}: pos={tr.pos}, "
                    f"yaw={tr.yaw}")

        heights = self._heights + (
            self.rng.normal(0.0, cfg.height_sigma, cfg.n_robots)
            if cfg.height_sigma > 0.0 else 0.0)
        for tr, h in zip(self.truths, np.atleast_1d(heights)):
            tr.height = float(h)

        # Communicated inputs: truth plus sensing noise; actuation is exact.
        v_meas = [tr.vel + self.rng.normal(0.0, cfg.sigma_v, 2)
                  for tr in self.truths]
        r_meas = [tr.yaw_rate + self.rng.normal(0.0, cfg.sigma_r)
                  for tr in self.truths]
        # Robot-visible: controllers may use what was broadcast, never truth.
        self.last_broadcast = (v_meas, r_meas)

        for (i, j), s in self.filters.items():
            u = np.array([v_meas[i][0], v_meas[i][1], r_meas[i],
                          v_meas[j][0], v_meas[j][1], r_meas[j]])
            self.filters[(i, j)] = predict(s, u, cfg.dt)

        t_end = self.t + cfg.dt
        while self._next_slot <= t_end + 1e-12:
            self._process_slot(self._next_slot)
            self._next_slot += cfg.slot_time
        self.t = t_end

    def _process_slot(self, t_slot: float):
        a1, b1 = self.schedule.current_pair
        self.schedule.advance()
        a, b = a1 - 1, b1 - 1
        ta, tb = self.truths[a], self.truths[b]
        event = simulate_exchange(
            (a, b), self.config.channel,
            (ta.pos[0], ta.pos[1], ta.height),
            (tb.pos[0], tb.pos[1], tb.height),
            t_slot, self.rng,
            payload_i=(ta.vel[0], ta.vel[1], ta.yaw_rate, ta.height),
            payload_j=(tb.vel[0], tb.vel[1], tb.yaw_rate, tb.height))
        if event.dropped:
            return
        d_corr = self._pipelines[frozenset((a, b))].process(event.d_raw)
        for i, j in ((a, b), (b, a)):
            s = self.filters.get((i, j))
            if s is None:
                continue
            obs = RangeObservation(d=d_corr, h_i=self.truths[i].height,
                                   h_j=self.truths[j].height, t=t_slot)
            self.filters[(i, j)] = update(s, obs)

    def run(self, command_fn, duration: float, observer=None):
        """Step for ``duration`` seconds; commands come from
        ``command_fn(world) -> [(vel, yaw_rate), ...]``.  ``observer(world)``
        runs after every step."""
        n_steps = int(round(duration / self.config.dt))
        for _ in range(n_steps):
            self.step(command_fn(self))
            if observer is not None:
                observer(self)
