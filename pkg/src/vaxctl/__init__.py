"""Optimal age-specific vaccination schedules for a two-group SVNUEIRP epidemic model."""

from vaxctl.adjoint import AdjointVec, adjoint_rhs, control_gradient, hamiltonian
from vaxctl.control import ControlBounds, ControlSchedule, effective_bounds, update_control
from vaxctl.errors import (
    DivergenceError,
    InfeasibleDemographicsError,
    InvalidParameterError,
    ScenarioParseError,
    VaxctlError,
)
from vaxctl.fbsm import OptimalSolution, SolveSettings, SummaryMetrics, objective, solve, summarize
from vaxctl.integrate import TimeGrid, Trajectory, integrate_backward, integrate_forward
from vaxctl.model import (
    AgeGroup,
    DemographicInput,
    EpiParams,
    HoldingTimes,
    R0Set,
    StateVec,
    build_initial_state,
    derive_betas,
    force_of_infection,
    state_rhs,
)
from vaxctl.scenario_io import Scenario, get_preset, load_scenario, write_outputs
from vaxctl.timeseries import DailySeries, load_timeseries

__version__ = "0.1.0"

__all__ = [
    "AdjointVec",
    "adjoint_rhs",
    "control_gradient",
    "hamiltonian",
    "ControlBounds",
    "ControlSchedule",
    "effective_bounds",
    "update_control",
    "DivergenceError",
    "InfeasibleDemographicsError",
    "InvalidParameterError",
    "ScenarioParseError",
    "VaxctlError",
    "OptimalSolution",
    "SolveSettings",
    "SummaryMetrics",
    "objective",
    "solve",
    "summarize",
    "TimeGrid",
    "Trajectory",
    "integrate_backward",
    "integrate_forward",
    "AgeGroup",
    "DemographicInput",
    "EpiParams",
    "HoldingTimes",
    "R0Set",
    "StateVec",
    "build_initial_state",
    "derive_betas",
    "force_of_infection",
    "state_rhs",
    "Scenario",
    "get_preset",
    "load_scenario",
    "write_outputs",
    "DailySeries",
    "load_timeseries",
]
