"""Range-based relative localization for robot swarms.

Each robot fuses communicated velocity, yaw rate and height with pairwise
UWB range measurements through an EKF to estimate the relative pose of its
peers.  The package ships the filter, a Lie-derivative observability
analyzer, a token-loop ranging simulation and a multi-robot scenario
engine with a CLI.
"""

__version__ = "0.1.0"
