"""Forward-backward sweep for the optimal vaccination schedule."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from vaxctl.control import ControlSchedule, update_control
from vaxctl.errors import DivergenceError, InvalidParameterError
from vaxctl.integrate import Trajectory, integrate_backward, integrate_forward

log = logging.getLogger(__name__)

GROUP_LABELS = ("over65", "under65")


@dataclass(frozen=True)
class SolveSettings:
    delta: float = 1e-4
    max_iters: int = 500
    damping: float = 0.5
    u_init: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise InvalidParameterError(f"delta must be > 0, got {self.delta}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidParameterError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if not 0.0 < self.damping <= 1.0:
            raise InvalidParameterError(f"damping must lie in (0, 1], got {self.damping}")
        if not (math.isfinite(self.u_init) and self.u_init >= 0):
            raise InvalidParameterError(f"u_init must be >= 0, got {self.u_init}")


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    controls: ControlSchedule
    trajectory: Trajectory
    objective: float
    iterations: int
    final_error: float
    converged: bool
    errors: tuple[float, ...] = field(default=(), repr=False)


def relative_l1_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.abs(new - old).sum() / np.abs(old).sum())


def solve(scenario, settings: SolveSettings | None = None) -> OptimalSolution:
    """Iterate forward solve, backward solve and damped control update.

    Stops once the relative L1 change of the state trajectory between two
    sweeps drops below ``settings.delta``, or after ``settings.max_iters``
    sweeps (then ``converged`` is False). The returned trajectory carries
    costates recomputed for the final controls.
    """
    settings = settings or SolveSettings()
    p = scenario.params
    x0 = scenario.initial_state
    grid = scenario.grid
    bounds = scenario.bounds
    W_O, W_Y = scenario.W_O, scenario.W_Y
    caps = bounds.dose_caps(grid)

    u0 = min(max(settings.u_init, bounds.a), bounds.b)
    controls = ControlSchedule.constant(grid, u0)
    traj = integrate_forward(x0, controls, p, grid, caps)
    controls = ControlSchedule(grid, traj.controls)

    errors = []
    converged = False
    it = 0
    for it in range(1, settings.max_iters + 1):
        try:
            with_adj = integrate_backward(traj, None, p)
            candidate = update_control(with_adj, W_O, W_Y, bounds)
            blended = controls.blend(candidate, settings.damping)
            new = integrate_forward(x0, blended, p, grid, caps)
        except DivergenceError as exc:
            exc.iteration = it
            raise
        err = relative_l1_change(new.states, traj.states)
        errors.append(err)
        traj = new
        controls = ControlSchedule(grid, new.controls)
        log.debug("sweep %d: relative change %.3e", it, err)
        if err < settings.delta:
            converged = True
            break

    traj = integrate_backward(traj, None, p)
    J = objective(traj, controls, W_O, W_Y)
    if not converged:
        log.warning("no convergence after %d sweeps (last change %.3e)", it, errors[-1])
    return OptimalSolution(controls, traj, J, it, errors[-1], converged, tuple(errors))


def objective(traj: Trajectory, controls, W_O: float, W_Y: float) -> float:
    """Trapezoidal value of the integral of I_O + I_Y + W_O/2 u_O^2 + W_Y/2 u_Y^2."""
    u = controls.as_array() if hasattr(controls, "as_array") else np.asarray(controls, dtype=float)
    x = traj.states
    integrand = x[:, 5] + x[:, 13] + 0.5 * W_O * u[:, 0] ** 2 + 0.5 * W_Y * u[:, 1] ** 2
    return float(np.trapezoid(integrand, traj.grid.times))


@dataclass(frozen=True)
class GroupMetrics:
    total: float
    infections: float  # ever infected by the horizon, including those infected at t0
    infections_pct: float
    new_infections: float
    protected: float
    protected_pct: float
    peak_infectious: float
    peak_day: float
    doses: float


@dataclass(frozen=True)
class SummaryMetrics:
    over65: GroupMetrics
    under65: GroupMetrics
    population: float
    infections_total: float
    infections_pct_total: float
    protected_total: float
    protected_pct_total: float
    doses_total: float
    peak_infectious_total: float
    peak_day_total: float

    def as_dict(self) -> dict[str, float]:
        """Flat mapping with ``_over65`` / ``_under65`` suffixes on group fields."""
        out = {}
        for label in GROUP_LABELS:
            for key, value in asdict(getattr(self, label)).items():
                out[f"{key}_{label}"] = value
        for key, value in asdict(self).items():
            if key not in GROUP_LABELS:
                out[key] = value
        return out


def summarize(traj: Trajectory, controls=None) -> SummaryMetrics:
    """Attack rates, vaccine protection, peaks and doses for a finished run.

    Doses use the rates actually applied on ``traj`` when recorded, else
    ``controls``.
    """
    if traj.controls is not None:
        u = traj.controls
    elif controls is not None:
        u = controls.as_array() if hasattr(controls, "as_array") else np.asarray(controls, dtype=float)
    else:
        u = np.zeros((traj.grid.n_nodes, 2))
    t = traj.grid.times
    x = traj.states
    groups = []
    for g, off in enumerate((0, 8)):
        total = float(x[0, off:off + 8].sum())
        initially = float(x[0, off + 4] + x[0, off + 5] + x[0, off + 6])
        new = float(traj.cumulative_infections[-1, g])
        infected = initially + new
        prot = float(x[-1, off + 7])
        k = int(np.argmax(x[:, off + 5]))
        doses = float(np.trapezoid(u[:, g] * x[:, off], t))
        groups.append(GroupMetrics(
            total=total,
            infections=infected,
            infections_pct=100.0 * infected / total,
            new_infections=new,
            protected=prot,
            protected_pct=100.0 * prot / total,
            peak_infectious=float(x[k, off + 5]),
            peak_day=float(t[k]),
            doses=doses,
        ))
    o, y = groups
    pop = o.total + y.total
    both = x[:, 5] + x[:, 13]
    k = int(np.argmax(both))
    return SummaryMetrics(
        over65=o,
        under65=y,
        population=pop,
        infections_total=o.infections + y.infections,
        infections_pct_total=100.0 * (o.infections + y.infections) / pop,
        protected_total=o.protected + y.protected,
        protected_pct_total=100.0 * (o.protected + y.protected) / pop,
        doses_total=o.doses + y.doses,
        peak_infectious_total=float(both[k]),
        peak_day_total=float(t[k]),
    )
