"""Scenario definitions, built-in presets, and result files.

Scenario files are TOML. Every key is optional; missing values come from
the preset named by the top-level ``preset`` key (``case1`` by default)::

    name = "my-run"
    preset = "case1"
    alpha_V = 0.9
    r_O = 0.07
    r_Y = 0.21
    W_O = 1e11
    W_Y = 1e11
    beta_period = "E+I"

    [demographics]   # T_O, T_Y, E_O, E_Y, I_O, I_Y, R_O, R_Y
    [r0]             # R0_OO, R0_YY, R0_OY, R0_YO
    [holding_times]  # t_E, t_I, t_V
    [bounds]         # a, b, mode ("constant" | "supply"), split_O
    [grid]           # t0, T, dt
    [series]         # supply, real (CSV paths relative to the file), start_date

Output files written by :func:`write_outputs`:

``trajectory.csv``
    ``t, S_O, V_O, N_O, U_O, E_O, I_O, R_O, P_O, S_Y, ..., P_Y, C_O, C_Y``
``controls.csv``
    ``t, u_O, u_Y, doses_O, doses_Y`` (doses are persons per day)
``summary.json``
    the flattened summary metrics plus solver information
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from vaxctl.control import SUPPLY, ControlBounds
from vaxctl.errors import InvalidParameterError, ScenarioParseError, VaxctlError
from vaxctl.integrate import TimeGrid, Trajectory
from vaxctl.model import (
    STATE_NAMES,
    DemographicInput,
    EpiParams,
    HoldingTimes,
    R0Set,
    StateVec,
    build_initial_state,
)
from vaxctl.timeseries import DailySeries, load_timeseries

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "DailySeries",
    "PRESETS",
    "Scenario",
    "get_preset",
    "load_scenario",
    "load_timeseries",
    "parse_scenario",
    "read_controls_csv",
    "read_trajectory_csv",
    "write_comparison",
    "write_outputs",
]

TRAJECTORY_COLUMNS = ("t",) + STATE_NAMES + ("C_O", "C_Y")
CONTROL_COLUMNS = ("t", "u_O", "u_Y", "doses_O", "doses_Y")
COMPARISON_COLUMNS = ("t", "model_infectious", "real_infections", "model_daily_doses", "real_daily_doses")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed for one simulation or optimisation run."""

    name: str
    demographics: DemographicInput
    r0: R0Set
    holding_times: HoldingTimes
    alpha_V: float
    r_O: float
    r_Y: float
    bounds: ControlBounds
    W_O: float
    W_Y: float
    grid: TimeGrid
    beta_period: str = "E+I"
    supply_path: Path | None = None
    real_path: Path | None = None
    start_date: dt.date | None = None
    _params: EpiParams = field(init=False, repr=False)
    _x0: StateVec = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("W_O", "W_Y"):
            w = getattr(self, name)
            if not (math.isfinite(w) and w >= 0):
                raise InvalidParameterError(f"{name} must be >= 0, got {w}")
        d = self.demographics
        params = EpiParams.from_inputs(self.r0, self.holding_times, self.alpha_V, d.T_O, d.T_Y,
                                       self.r_O, self.r_Y, beta_period=self.beta_period)
        x0 = build_initial_state(d, self.r_O, self.r_Y)
        x0.check(d.T_O, d.T_Y)
        object.__setattr__(self, "_params", params)
        object.__setattr__(self, "_x0", x0)

    @property
    def params(self) -> EpiParams:
        return self._params

    @property
    def initial_state(self) -> StateVec:
        return self._x0

    def with_overrides(self, *, dt: float | None = None, horizon: float | None = None,
                       split_O: float | None = None, bounds: ControlBounds | None = None,
                       **changes) -> "Scenario":
        """Copy with a new grid, supply split or any other field replaced."""
        grid = self.grid
        if dt is not None or horizon is not None:
            T = grid.T if horizon is None else grid.t0 + horizon
            grid = TimeGrid.uniform(T, grid.dt if dt is None else dt, grid.t0)
        bounds = bounds or self.bounds
        if split_O is not None:
            bounds = replace(bounds, split_O=split_O)
        return replace(self, grid=grid, bounds=bounds, **changes)


BASE_DEMOGRAPHICS = DemographicInput(T_O=900_000, T_Y=4_000_000, E_O=200, E_Y=2000, I_O=200, I_Y=2000,
                          R_O=100_000, R_Y=200_000)
BASE_HOLDING_TIMES = HoldingTimes(t_E=6.6, t_I=7.4, t_V=14.0)
SAMPLE_SUPPLY = "sample_supply_synthetic.csv"
SAMPLE_REAL = "sample_infections_synthetic.csv"


def _base(name: str, r0: R0Set, horizon: float, compare: bool = False) -> Scenario:
    return Scenario(
        name=name,
        demographics=BASE_DEMOGRAPHICS,
        r0=r0,
        holding_times=BASE_HOLDING_TIMES,
        alpha_V=0.9,
        r_O=0.07,
        r_Y=0.21,
        bounds=ControlBounds(a=0.0, b=0.3, split_O=0.8),
        W_O=1e11,
        W_Y=1e11,
        grid=TimeGrid.uniform(horizon, 0.1),
        supply_path=_sample_path(SAMPLE_SUPPLY) if compare else None,
        real_path=_sample_path(SAMPLE_REAL) if compare else None,
    )


def _sample_path(filename: str) -> Path:
    return Path(str(resources.files("vaxctl") / "data" / filename))


PRESETS = {
    "case1": lambda: _base("case1", R0Set(R0_OO=1.2, R0_YY=1.2, R0_OY=0.9, R0_YO=0.9), 1000),
    "case2": lambda: _base("case2", R0Set(R0_OO=8, R0_YY=8, R0_OY=4, R0_YO=3), 1000),
    "compare-r0-1.3": lambda: _base("compare-r0-1.3", R0Set(1, 1, 0.3, 0.3), 100, compare=True),
    "compare-r0-1.9": lambda: _base("compare-r0-1.9", R0Set(1, 1, 0.9, 0.9), 100, compare=True),
    "compare-r0-1.5": lambda: _base("compare-r0-1.5", R0Set(1.2, 1.2, 0.3, 0.3), 100, compare=True),
}


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise InvalidParameterError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


_SECTIONS = {
    "demographics": DemographicInput,
    "r0": R0Set,
    "holding_times": HoldingTimes,
}
_TOP_LEVEL = {"name", "preset", "alpha_V", "r_O", "r_Y", "W_O", "W_Y", "beta_period"}
_BOUNDS_KEYS = {"a", "b", "mode", "split_O"}
_GRID_KEYS = {"t0", "T", "dt"}
_SERIES_KEYS = {"supply", "real", "start_date"}


def _number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"[{section}] {key}: expected a number, got {value!r}")
    return float(value)


def _check_keys(section: str, table, allowed: set[str]) -> None:
    if not isinstance(table, dict):
        raise ScenarioParseError(f"[{section}] must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ScenarioParseError(f"[{section}] unknown key(s): {', '.join(unknown)}")


def parse_scenario(text: str, source: str = "<string>", base_dir: Path | None = None) -> Scenario:
    """Build a validated Scenario from TOML text."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioParseError(f"{source}: {exc}") from None
    base_dir = base_dir or Path.cwd()
    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    _check_keys("top level", top, _TOP_LEVEL)
    tables = {k: v for k, v in doc.items() if isinstance(v, dict)}
    _check_keys("top level", tables, set(_SECTIONS) | {"bounds", "grid", "series"})

    base = get_preset(str(top.get("preset", "case1")))
    kw = {}
    try:
        for section, cls in _SECTIONS.items():
            table = tables.get(section, {})
            names = {f.name for f in fields(cls)}
            _check_keys(section, table, names)
            current = getattr(base, section)
            values = {n: getattr(current, n) for n in names}
            values.update({k: _number(section, k, v) for k, v in table.items()})
            kw[section] = cls(**values)

        for key in ("alpha_V", "r_O", "r_Y", "W_O", "W_Y"):
            kw[key] = _number("top level", key, top[key]) if key in top else getattr(base, key)
        kw["name"] = str(top.get("name", Path(source).stem if source != "<string>" else base.name))
        kw["beta_period"] = str(top.get("beta_period", base.beta_period))

        g = tables.get("grid", {})
        _check_keys("grid", g, _GRID_KEYS)
        t0 = _number("grid", "t0", g["t0"]) if "t0" in g else base.grid.t0
        T = _number("grid", "T", g["T"]) if "T" in g else t0 + (base.grid.T - base.grid.t0)
        step = _number("grid", "dt", g["dt"]) if "dt" in g else base.grid.dt
        kw["grid"] = TimeGrid.uniform(T, step, t0)

        s = tables.get("series", {})
        _check_keys("series", s, _SERIES_KEYS)
        kw["supply_path"] = (base_dir / s["supply"]) if "supply" in s else base.supply_path
        kw["real_path"] = (base_dir / s["real"]) if "real" in s else base.real_path
        start = s.get("start_date", base.start_date)
        if isinstance(start, str):
            try:
                start = dt.date.fromisoformat(start)
            except ValueError:
                raise ScenarioParseError(f"[series] start_date: bad ISO date {start!r}") from None
        kw["start_date"] = start

        b = tables.get("bounds", {})
        _check_keys("bounds", b, _BOUNDS_KEYS)
        a = _number("bounds", "a", b["a"]) if "a" in b else base.bounds.a
        upper = _number("bounds", "b", b["b"]) if "b" in b else base.bounds.b
        split = _number("bounds", "split_O", b["split_O"]) if "split_O" in b else base.bounds.split_O
        mode = str(b.get("mode", base.bounds.mode))
        supply = None
        if mode == SUPPLY:
            if kw["supply_path"] is None:
                raise ScenarioParseError("[bounds] mode = \"supply\" needs [series] supply = \"path.csv\"")
            supply = load_timeseries(kw["supply_path"], start)
        kw["bounds"] = ControlBounds(a=a, b=upper, mode=mode, supply=supply, split_O=split)
        return Scenario(**kw)
    except ScenarioParseError:
        raise
    except InvalidParameterError as exc:
        raise type(exc)(f"{source}: {exc}") from None


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario file, or a preset when ``path`` names one and no such file exists."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        return get_preset(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"{p}: {exc.strerror or exc}") from exc
    return parse_scenario(text, str(p), p.parent)


# ---------------------------------------------------------------- outputs

def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _write_csv(path: Path, header, rows) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise VaxctlError(f"could not write {path}: {exc.strerror or exc}") from exc


def _round_json(obj):
    if isinstance(obj, float):
        return float(_fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    return obj


def _write_json(path: Path, payload: dict) -> None:
    try:
        path.write_text(json.dumps(_round_json(payload), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise VaxctlError(f"could not write {path}: {exc.strerror or exc}") from exc


def _prepare_dir(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise VaxctlError(f"could not create {out}: {exc.strerror or exc}") from exc
    return out


def write_outputs(solution, metrics, out_dir, extra: dict | None = None) -> dict[str, Path]:
    """Write trajectory.csv, controls.csv and summary.json into ``out_dir``.

    ``solution`` is an OptimalSolution or a bare Trajectory (for uncontrolled
    runs). Returns the written paths keyed by file stem.
    """
    out = _prepare_dir(out_dir)
    if isinstance(solution, Trajectory):
        traj, info = solution, {}
    else:
        traj = solution.trajectory
        info = {
            "objective": solution.objective,
            "iterations": solution.iterations,
            "final_error": solution.final_error,
            "converged": solution.converged,
        }
    t = traj.grid.times
    u = traj.controls if traj.controls is not None else np.zeros((t.size, 2))
    x = traj.states

    paths = {"trajectory": out / "trajectory.csv", "controls": out / "controls.csv",
             "summary": out / "summary.json"}
    _write_csv(paths["trajectory"], TRAJECTORY_COLUMNS,
               np.column_stack([t, x, traj.cumulative_infections]))
    _write_csv(paths["controls"], CONTROL_COLUMNS,
               np.column_stack([t, u, u[:, 0] * x[:, 0], u[:, 1] * x[:, 8]]))
    payload = dict(extra or {})
    payload.update(info)
    payload.update(metrics.as_dict())
    _write_json(paths["summary"], payload)
    return paths


def write_comparison(traj: Trajectory, supply: DailySeries, real: DailySeries, out_dir,
                     summary: dict) -> dict[str, Path]:
    """Side-by-side model vs observed series (compare.csv) and compare_summary.json."""
    out = _prepare_dir(out_dir)
    t = traj.grid.times
    rel = t - traj.grid.t0
    x = traj.states
    u = traj.controls
    rows = np.column_stack([
        t,
        x[:, 5] + x[:, 13],
        [real.value_at(r) for r in rel],
        u[:, 0] * x[:, 0] + u[:, 1] * x[:, 8],
        [supply.value_at(r) for r in rel],
    ])
    paths = {"compare": out / "compare.csv", "compare_summary": out / "compare_summary.json"}
    _write_csv(paths["compare"], COMPARISON_COLUMNS, rows)
    _write_json(paths["compare_summary"], summary)
    return paths


def _read_csv(path, columns) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != tuple(columns):
            raise ScenarioParseError(f"{path}: unexpected header {header}")
        return np.array([[float(v) for v in row] for row in reader])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(t, states, cumulative_infections)`` from a trajectory.csv."""
    data = _read_csv(path, TRAJECTORY_COLUMNS)
    return data[:, 0], data[:, 1:17], data[:, 17:19]


def read_controls_csv(path) -> np.ndarray:
    return _read_csv(path, CONTROL_COLUMNS)
