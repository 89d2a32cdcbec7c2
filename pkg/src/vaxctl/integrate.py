"""Fixed-step RK4 on a uniform grid: states forward, costates backward.

State, costate and control arrays all live on the same grid so the control
update can be applied node by node. Inputs frozen during a pass (controls
going forward, states going backward) are linearly interpolated at the
RK4 half-steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from vaxctl.adjoint import N_COSTATES, adjoint_rhs_array
from vaxctl.errors import DivergenceError, InvalidParameterError
from vaxctl.model import N_STATES, EpiParams, StateVec, rhs_extended


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.T) and self.T > self.t0):
            raise InvalidParameterError(f"horizon must satisfy T > t0, got t0={self.t0}, T={self.T}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1 or abs(self.n_steps * self.dt - (self.T - self.t0)) > 1e-9 * (self.T - self.t0):
            raise InvalidParameterError(
                f"horizon {self.T - self.t0} is not a whole number of steps of {self.dt}"
            )

    @classmethod
    def uniform(cls, T: float, dt: float = 0.1, t0: float = 0.0) -> "TimeGrid":
        if not (dt > 0) or not (T > t0):
            # defer to the invariant checks for the message
            return cls(t0, T, dt, 1)
        return cls(t0, T, dt, int(round((T - t0) / dt)))

    @property
    def times(self) -> np.ndarray:
        t = self.t0 + self.dt * np.arange(self.n_steps + 1)
        t[-1] = self.T
        return t

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on every grid node, plus optional costates and applied controls.

    ``states`` has shape (n+1, 16), ``cumulative_infections`` (n+1, 2) holds
    new infections since t0 per group, ``adjoints`` (n+1, 12) and
    ``controls`` (n+1, 2) are the costates and the vaccination rates that
    were actually applied at each node.
    """

    grid: TimeGrid
    states: np.ndarray
    cumulative_infections: np.ndarray
    adjoints: np.ndarray | None = None
    controls: np.ndarray | None = None

    def __post_init__(self):
        n = self.grid.n_nodes
        expected = {"states": N_STATES, "cumulative_infections": 2, "adjoints": N_COSTATES, "controls": 2}
        for name, width in expected.items():
            arr = getattr(self, name)
            if arr is None:
                continue
            if arr.shape != (n, width):
                raise InvalidParameterError(f"{name} has shape {arr.shape}, expected {(n, width)}")
            arr.setflags(write=False)

    def state(self, k: int) -> StateVec:
        return StateVec(self.states[k])

    def with_adjoints(self, adjoints: np.ndarray) -> "Trajectory":
        return replace(self, adjoints=adjoints)

    def conservation_drift(self, T_O: float, T_Y: float) -> float:
        """Largest relative deviation of a group sum from its total over all nodes."""
        drift_o = np.abs(self.states[:, :8].sum(axis=1) - T_O) / T_O
        drift_y = np.abs(self.states[:, 8:].sum(axis=1) - T_Y) / T_Y
        return float(max(drift_o.max(), drift_y.max()))


# Stage positions within a step, as fractions of the way from node i to i+1.
_FORWARD_STAGES = (0.0, 0.5, 0.5, 1.0)
_BACKWARD_STAGES = (1.0, 0.5, 0.5, 0.0)


def rk4_march(f: Callable[[int, float, np.ndarray], np.ndarray], y_start: np.ndarray, h: float, n: int,
              reverse: bool = False) -> np.ndarray:
    """Classical RK4 over ``n`` uniform steps of size ``h``.

    ``f(i, theta, y)`` evaluates the derivative inside step ``i`` (between
    nodes i and i+1) at fraction ``theta`` of the step. With ``reverse`` the
    march starts from node n and walks down to node 0. Returns an array of
    shape (n+1, len(y_start)) indexed by node.
    """
    y = np.array(y_start, dtype=float)
    out = np.empty((n + 1, y.size))
    if reverse:
        out[n] = y
        hs, stages, steps = -h, _BACKWARD_STAGES, range(n - 1, -1, -1)
    else:
        out[0] = y
        hs, stages, steps = h, _FORWARD_STAGES, range(n)
    half = 0.5 * hs
    sixth = hs / 6.0
    a, m, _, b = stages
    for i in steps:
        k1 = f(i, a, y)
        k2 = f(i, m, y + half * k1)
        k3 = f(i, m, y + half * k2)
        k4 = f(i, b, y + hs * k3)
        y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        out[i if reverse else i + 1] = y
    return out


def _first_bad_node(arr: np.ndarray) -> int | None:
    bad = ~np.isfinite(arr).all(axis=1)
    if bad.any():
        return int(np.flatnonzero(bad)[0])
    return None


def _as_control_array(controls, n_nodes: int) -> np.ndarray:
    u = controls.as_array() if hasattr(controls, "as_array") else np.asarray(controls, dtype=float)
    if u.shape != (n_nodes, 2):
        raise InvalidParameterError(f"controls must have shape {(n_nodes, 2)}, got {u.shape}")
    return u


def integrate_forward(x0: StateVec | np.ndarray, controls, p: EpiParams, grid: TimeGrid,
                      dose_caps=None) -> Trajectory:
    """Integrate the state system from ``x0`` across ``grid`` under ``controls``.

    ``controls`` is a ControlSchedule or an (n+1, 2) array of node values.
    ``dose_caps`` optionally limits the daily doses ``u_g * S_g`` (see
    :class:`vaxctl.control.DoseCaps`); the applied rate becomes
    ``min(u_g, cap_g / S_g)`` at every stage.
    """
    x0v = x0.values if isinstance(x0, StateVec) else np.asarray(x0, dtype=float)
    u = _as_control_array(controls, grid.n_nodes)
    u_mid = 0.5 * (u[:-1] + u[1:])

    if dose_caps is None:
        def f(i, theta, y):
            if theta == 0.0:
                return rhs_extended(y, u[i, 0], u[i, 1], p)
            if theta == 1.0:
                return rhs_extended(y, u[i + 1, 0], u[i + 1, 1], p)
            return rhs_extended(y, u_mid[i, 0], u_mid[i, 1], p)
    else:
        caps_node, caps_step = dose_caps.node, dose_caps.step

        def f(i, theta, y):
            if theta == 0.0:
                uo, uy, cap = u[i, 0], u[i, 1], caps_node[i]
            elif theta == 1.0:
                uo, uy, cap = u[i + 1, 0], u[i + 1, 1], caps_node[i + 1]
            else:
                uo, uy, cap = u_mid[i, 0], u_mid[i, 1], caps_step[i]
            return rhs_extended(y, _saturate(uo, cap[0], y[0]), _saturate(uy, cap[1], y[8]), p)

    y0 = np.concatenate([x0v, [0.0, 0.0]])
    with np.errstate(all="ignore"):
        ys = rk4_march(f, y0, grid.dt, grid.n_steps)
    bad = _first_bad_node(ys)
    if bad is not None:
        raise DivergenceError(f"state became non-finite at node {bad} (t={grid.times[bad]:g})", node=bad)

    states = ys[:, :N_STATES]
    applied = u.copy()
    if dose_caps is not None:
        for k in range(grid.n_nodes):
            applied[k, 0] = _saturate(u[k, 0], dose_caps.node[k, 0], states[k, 0])
            applied[k, 1] = _saturate(u[k, 1], dose_caps.node[k, 1], states[k, 8])
    return Trajectory(grid, states, ys[:, N_STATES:].copy(), controls=applied)


def _saturate(u: float, cap: float, s: float) -> float:
    if s <= 0.0:
        return u
    return min(u, cap / s)


def integrate_backward(traj: Trajectory, controls=None, p: EpiParams | None = None) -> Trajectory:
    """Solve the costate system from ``lambda(T) = 0`` back to ``t0``.

    Uses the controls recorded on ``traj`` when ``controls`` is omitted.
    Returns a copy of ``traj`` with ``adjoints`` filled.
    """
    if p is None:
        raise InvalidParameterError("integrate_backward needs epidemic parameters")
    grid = traj.grid
    if controls is None:
        if traj.controls is None:
            raise InvalidParameterError("no controls given and none recorded on the trajectory")
        u = traj.controls
    else:
        u = _as_control_array(controls, grid.n_nodes)
    x = traj.states
    x_mid = 0.5 * (x[:-1] + x[1:])
    u_mid = 0.5 * (u[:-1] + u[1:])

    def f(i, theta, lam):
        if theta == 1.0:
            return adjoint_rhs_array(lam, x[i + 1], u[i + 1, 0], u[i + 1, 1], p)
        if theta == 0.0:
            return adjoint_rhs_array(lam, x[i], u[i, 0], u[i, 1], p)
        return adjoint_rhs_array(lam, x_mid[i], u_mid[i, 0], u_mid[i, 1], p)

    with np.errstate(all="ignore"):
        lam = rk4_march(f, np.zeros(N_COSTATES), grid.dt, grid.n_steps, reverse=True)
    bad = _first_bad_node(lam[::-1])
    if bad is not None:
        node = grid.n_steps - bad
        raise DivergenceError(f"costate became non-finite at node {node} (t={grid.times[node]:g})", node=node)
    return traj.with_adjoints(lam)
