"""Multi-robot scenario engine: ground truth, maneuvers, control, studies."""

from .world import RobotTruth, ScenarioConfig, World
from .control import PidGains, PidController, StartupManeuver, formation_control
from .metrics import TrialResult, convergence_time, mean_abs_error
from .scenarios import (
    FormationSpec,
    convergence_study,
    formation_scenario,
    leader_follower_scenario,
    run_pair_trial,
    unobservable_study,
)

__all__ = [
    "RobotTruth", "ScenarioConfig", "World",
    "PidGains", "PidController", "StartupManeuver", "formation_control",
    "TrialResult", "convergence_time", "mean_abs_error",
    "FormationSpec", "convergence_study", "formation_scenario",
    "leader_follower_scenario", "run_pair_trial", "unobservable_study",
]
