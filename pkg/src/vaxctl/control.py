"""Vaccination schedules, their bounds, and the pointwise optimal update."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vaxctl.errors import InvalidParameterError
from vaxctl.integrate import TimeGrid, Trajectory
from vaxctl.timeseries import DailySeries

CONSTANT = "constant"
SUPPLY = "supply"


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Per-node vaccination rates (fraction of S per day), shape (n+1, 2)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (self.grid.n_nodes, 2):
            raise InvalidParameterError(f"schedule shape {arr.shape} does not match grid ({self.grid.n_nodes}, 2)")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("schedule contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, grid: TimeGrid, u_O: float = 0.0, u_Y: float | None = None) -> "ControlSchedule":
        u_Y = u_O if u_Y is None else u_Y
        vals = np.empty((grid.n_nodes, 2))
        vals[:, 0] = u_O
        vals[:, 1] = u_Y
        return cls(grid, vals)

    @property
    def u_O(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def u_Y(self) -> np.ndarray:
        return self.values[:, 1]

    def as_array(self) -> np.ndarray:
        return self.values

    def blend(self, new: "ControlSchedule", c: float) -> "ControlSchedule":
        """Convex combination ``c * new + (1 - c) * self``."""
        return ControlSchedule(self.grid, c * new.values + (1.0 - c) * self.values)


@dataclass(frozen=True, eq=False)
class ControlBounds:
    """Admissible set for the vaccination rates.

    In ``constant`` mode every node uses ``[a, b]``. In ``supply`` mode the
    upper bound at a node follows the doses available that day:
    ``b_g = min(b, share_g * doses / S_g)`` with share ``split_O`` for the
    over-65 group and ``1 - split_O`` for the rest.
    """

    a: float = 0.0
    b: float = 0.3
    mode: str = CONSTANT
    supply: DailySeries | None = None
    split_O: float = 0.8

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and 0.0 <= self.a <= self.b):
            raise InvalidParameterError(f"bounds must satisfy 0 <= a <= b, got a={self.a}, b={self.b}")
        if not 0.0 <= self.split_O <= 1.0:
            raise InvalidParameterError(f"split_O must lie in [0, 1], got {self.split_O}")
        if self.mode not in (CONSTANT, SUPPLY):
            raise InvalidParameterError(f"unknown bounds mode {self.mode!r}")
        if self.mode == SUPPLY and self.supply is None:
            raise InvalidParameterError("supply mode needs a daily supply series")

    def dose_caps(self, grid: TimeGrid) -> "DoseCaps | None":
        if self.mode != SUPPLY:
            return None
        return DoseCaps.from_supply(self.supply, grid, self.split_O)

    def upper(self, grid: TimeGrid, states: np.ndarray) -> np.ndarray:
        """Upper bound per node and group, shape (n+1, 2)."""
        n = grid.n_nodes
        if self.mode == CONSTANT:
            return np.full((n, 2), self.b)
        caps = self.dose_caps(grid).node
        out = np.empty((n, 2))
        for k in range(n):
            out[k] = _supply_bound(caps[k], states[k, 0], states[k, 8], self.b)
        return out


@dataclass(frozen=True, eq=False)
class DoseCaps:
    """Daily doses available to each group, at nodes (n+1, 2) and within steps (n, 2)."""

    node: np.ndarray
    step: np.ndarray

    @classmethod
    def from_supply(cls, supply: DailySeries, grid: TimeGrid, split_O: float) -> "DoseCaps":
        span = grid.T - grid.t0
        if span > len(supply) + 1e-9:
            raise InvalidParameterError(
                f"supply series covers {len(supply)} days but the horizon is {span:g} days"
            )
        rel = grid.times - grid.t0
        mids = rel[:-1] + 0.5 * grid.dt
        share = np.array([split_O, 1.0 - split_O])
        node = np.array([supply.value_at(t) for t in rel])[:, None] * share
        step = np.array([supply.value_at(t) for t in mids])[:, None] * share
        return cls(node, step)


def _supply_bound(cap: np.ndarray, s_o: float, s_y: float, b_cap: float) -> tuple[float, float]:
    out = []
    for dose, s in zip(cap, (s_o, s_y)):
        out.append(0.0 if s <= 0.0 else min(b_cap, dose / s))
    return tuple(out)


def effective_bounds(supply: DailySeries, x_k, t: float, split_O: float, b_cap: float) -> tuple[float, float]:
    """Upper bounds ``(b_O, b_Y)`` at time ``t`` days after the supply series starts.

    ``b_g = min(b_cap, share_g * doses(t) / S_g)``; a group with no
    susceptibles left gets bound 0.
    """
    xv = x_k.values if hasattr(x_k, "values") else np.asarray(x_k, dtype=float)
    dose = supply.value_at(t)
    cap = np.array([split_O * dose, (1.0 - split_O) * dose])
    return _supply_bound(cap, xv[0], xv[8], b_cap)


def update_control(traj: Trajectory, W_O: float, W_Y: float, bounds: ControlBounds) -> ControlSchedule:
    """Project ``S_g (lambda_S_g - lambda_V_g) / W_g`` onto the admissible interval at each node."""
    for name, w in (("W_O", W_O), ("W_Y", W_Y)):
        if not (math.isfinite(w) and w > 0):
            raise InvalidParameterError(f"{name} must be > 0 for the control update, got {w}")
    if traj.adjoints is None:
        raise InvalidParameterError("trajectory has no costates; run the backward pass first")
    x, lam = traj.states, traj.adjoints
    raw = np.empty((traj.grid.n_nodes, 2))
    raw[:, 0] = x[:, 0] * (lam[:, 0] - lam[:, 1]) / W_O
    raw[:, 1] = x[:, 8] * (lam[:, 6] - lam[:, 7]) / W_Y
    upper = bounds.upper(traj.grid, x)
    return ControlSchedule(traj.grid, np.minimum(np.maximum(bounds.a, raw), upper))


def project(schedule: ControlSchedule, bounds: ControlBounds, states: np.ndarray) -> ControlSchedule:
    """Clamp an existing schedule into the admissible set for ``states``."""
    upper = bounds.upper(schedule.grid, states)
    return ControlSchedule(schedule.grid, np.minimum(np.maximum(bounds.a, schedule.values), upper))
