from .lanemap import Lane, LaneMap, LaneMapError, Obstacle, StopLine
from .scenarios import (
    BadScriptError,
    ScenarioSpec,
    UnknownScenarioError,
    build_simulator,
    get_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_from_file,
    scenario_names,
)
from .simulator import (
    ACCEL_LIMIT_MPS2,
    ARRIVE_EPS_M,
    DT,
    PATH_LANE_PREFER,
    PATH_STOP_DURATION,
    PATH_STOP_MARGIN,
    PATH_USE_FLAG,
    PATH_USE_OPPOSITE,
    SENSING_RANGE_M,
    SPEED_CAP_MPS,
    SPEED_SNAP_EPS,
    ParamTypeError,
    SimError,
    Simulator,
    UnknownParamPathError,
    WorldState,
)

__all__ = [
    "ACCEL_LIMIT_MPS2",
    "ARRIVE_EPS_M",
    "BadScriptError",
    "DT",
    "Lane",
    "LaneMap",
    "LaneMapError",
    "Obstacle",
    "PATH_LANE_PREFER",
    "PATH_STOP_DURATION",
    "PATH_STOP_MARGIN",
    "PATH_USE_FLAG",
    "PATH_USE_OPPOSITE",
    "ParamTypeError",
    "SENSING_RANGE_M",
    "SPEED_CAP_MPS",
    "SPEED_SNAP_EPS",
    "ScenarioSpec",
    "SimError",
    "Simulator",
    "StopLine",
    "UnknownParamPathError",
    "UnknownScenarioError",
    "WorldState",
    "build_simulator",
    "get_scenario",
    "load_scenario",
    "scenario_from_dict",
    "scenario_from_file",
    "scenario_names",
]
