"""Quadruped gait-control toolkit.

Rhythm generation with coupled oscillators, pattern formation with adjustable
style, analytic leg kinematics, a two-tier simulator under joint PD control,
gait metrics, evolution-strategies policy search, a sweep harness, and a live
command/telemetry server.
"""

from .cpg import (
    CpgConfig,
    GaitMatrix,
    GAIT_NAMES,
    LEG_NAMES,
    ModulationCommand,
    OscillatorNetworkState,
    custom_gait,
    gait_library,
    initial_state,
    phase_error,
    step,
)
from .errors import (
    ConfigError,
    GaitkitError,
    NumericalDivergenceError,
    SchemaVersionError,
    UnknownGaitError,
)
from .kinematics import LegGeometry, fk, ik, jacobian
from .metrics import MetricsRecord, cost_of_transport, episode_metrics, reward_step
from .pattern import StyleParams, map_to_foot_targets, swing_flag, swing_flags
from .robot import RobotModel
from .scenario import ScenarioEvent, ScenarioScript
from .simulator import (
    OBSERVATION_DIM,
    RobotState,
    SimConfig,
    Simulation,
    pd_torques,
    randomize,
    run_episode,
    sample_style,
)
from .trajlog import TrajectoryLog

__version__ = "0.1.0"
