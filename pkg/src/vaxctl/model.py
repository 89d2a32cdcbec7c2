"""Two-age-group SVNUEIRP vaccination model.

Each age group (over 65 ``O``, under 65 ``Y``) is split into eight
compartments:

    S  susceptible, willing, not yet vaccinated
    V  vaccinated, waiting for protection
    N  vaccinated, vaccine not effective
    U  susceptible, refusing or unable to vaccinate
    E  exposed (already infectious)
    I  infectious, symptomatic
    R  recovered or deceased
    P  protected by the vaccine

State arrays are laid out group-major: ``[S_O, V_O, ..., P_O, S_Y, ..., P_Y]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

import numpy as np

from vaxctl.errors import InfeasibleDemographicsError, InvalidParameterError

COMPARTMENTS = ("S", "V", "N", "U", "E", "I", "R", "P")
N_COMPARTMENTS = len(COMPARTMENTS)
N_STATES = 2 * N_COMPARTMENTS


class AgeGroup(enum.Enum):
    O = "O"  # over 65
    Y = "Y"  # under 65

    @property
    def offset(self) -> int:
        return 0 if self is AgeGroup.O else N_COMPARTMENTS


STATE_NAMES = tuple(f"{c}_{g.value}" for g in AgeGroup for c in COMPARTMENTS)


def state_index(compartment: str, group: AgeGroup | str) -> int:
    """Position of ``compartment`` of ``group`` in a 16-entry state array."""
    group = AgeGroup(group)
    return group.offset + COMPARTMENTS.index(compartment)


@dataclass(frozen=True)
class StateVec:
    """Immutable snapshot of the 16 compartment populations (persons)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (N_STATES,):
            raise InvalidParameterError(f"state must have {N_STATES} entries, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_compartments(cls, over65: dict, under65: dict) -> "StateVec":
        """Build from two ``{"S": ..., "V": ...}`` mappings; missing keys are zero."""
        vals = [float(over65.get(c, 0.0)) for c in COMPARTMENTS]
        vals += [float(under65.get(c, 0.0)) for c in COMPARTMENTS]
        return cls(np.array(vals))

    def __getitem__(self, name: str) -> float:
        return float(self.values[STATE_NAMES.index(name)])

    def group(self, g: AgeGroup | str) -> np.ndarray:
        g = AgeGroup(g)
        return self.values[g.offset:g.offset + N_COMPARTMENTS]

    def group_total(self, g: AgeGroup | str) -> float:
        return float(self.group(g).sum())

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(STATE_NAMES, self.values)}

    def check(self, T_O: float, T_Y: float, rtol: float = 1e-8) -> None:
        """Raise if the nonnegativity or per-group conservation invariant fails."""
        eps_neg = 1e-9 * (T_O + T_Y)
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("state contains non-finite entries")
        bad = np.flatnonzero(self.values < -eps_neg)
        if bad.size:
            raise InvalidParameterError(f"negative compartment {STATE_NAMES[bad[0]]}={self.values[bad[0]]}")
        for g, total in ((AgeGroup.O, T_O), (AgeGroup.Y, T_Y)):
            s = self.group_total(g)
            if abs(s - total) > rtol * total:
                raise InvalidParameterError(f"group {g.value} sums to {s}, expected {total}")


@dataclass(frozen=True)
class HoldingTimes:
    """Mean holding times in days for the E, I and V compartments."""

    t_E: float
    t_I: float
    t_V: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameterError(f"holding time {f.name} must be > 0, got {v}")


@dataclass(frozen=True)
class R0Set:
    """Mean secondary infections; ``R0_XY`` counts group-Y cases caused by one group-X case."""

    R0_OO: float
    R0_YY: float
    R0_OY: float
    R0_YO: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{f.name} must be >= 0, got {v}")


@dataclass(frozen=True)
class DemographicInput:
    """Census-style initial data, persons per group."""

    T_O: float
    T_Y: float
    E_O: float = 0.0
    E_Y: float = 0.0
    I_O: float = 0.0
    I_Y: float = 0.0
    R_O: float = 0.0
    R_Y: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{f.name} must be >= 0, got {v}")
        for g in "OY":
            total = getattr(self, f"T_{g}")
            if total <= 0:
                raise InvalidParameterError(f"T_{g} must be > 0, got {total}")
            used = getattr(self, f"E_{g}") + getattr(self, f"I_{g}") + getattr(self, f"R_{g}")
            if used > total:
                raise InfeasibleDemographicsError(
                    f"E_{g}+I_{g}+R_{g}={used:g} exceeds T_{g}={total:g}"
                )


@dataclass(frozen=True)
class EpiParams:
    beta_OO: float
    beta_YO: float
    beta_OY: float
    beta_YY: float
    gamma_E: float
    gamma_I: float
    gamma_V: float
    alpha_V: float
    T_O: float
    T_Y: float
    r_O: float = 0.0
    r_Y: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v < 0:
                raise InvalidParameterError(f"{f.name} must be finite and >= 0, got {v}")
        for name in ("alpha_V", "r_O", "r_Y"):
            if getattr(self, name) > 1:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.T_O <= 0 or self.T_Y <= 0:
            raise InvalidParameterError("group totals T_O, T_Y must be > 0")

    @classmethod
    def from_inputs(cls, r0: R0Set, ht: HoldingTimes, alpha_V: float, T_O: float, T_Y: float,
                    r_O: float = 0.0, r_Y: float = 0.0, beta_period: str = "E+I+V") -> "EpiParams":
        betas = derive_betas(r0, ht, period=beta_period)
        return cls(**betas, gamma_E=1.0 / ht.t_E, gamma_I=1.0 / ht.t_I, gamma_V=1.0 / ht.t_V,
                   alpha_V=alpha_V, T_O=T_O, T_Y=T_Y, r_O=r_O, r_Y=r_Y)

    def replace(self, **changes) -> "EpiParams":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return EpiParams(**kw)


# Which holding times make up the transmission period used to turn R0 into beta.
BETA_PERIODS = {
    "E+I+V": ("t_E", "t_I", "t_V"),
    "E+I": ("t_E", "t_I"),
}


def derive_betas(r0: R0Set, ht: HoldingTimes, period: str = "E+I+V") -> dict[str, float]:
    """Transmission rates ``beta_ij = R0_ij / (sum of holding times in period)``.

    ``period="E+I+V"`` divides by ``t_E + t_I + t_V``; ``period="E+I"`` divides
    by the infectious lifetime ``t_E + t_I`` only.
    """
    try:
        parts = BETA_PERIODS[period]
    except KeyError:
        raise InvalidParameterError(f"unknown beta period {period!r}; choose from {sorted(BETA_PERIODS)}") from None
    denom = sum(getattr(ht, p) for p in parts)
    if not denom > 0:
        raise InvalidParameterError(f"holding-time sum must be > 0, got {denom}")
    return {
        "beta_OO": r0.R0_OO / denom,
        "beta_YO": r0.R0_YO / denom,
        "beta_OY": r0.R0_OY / denom,
        "beta_YY": r0.R0_YY / denom,
    }


def build_initial_state(demo: DemographicInput, r_O: float, r_Y: float) -> StateVec:
    """Split each group's susceptibles ``T - (E + I + R)`` into willing S and refusing U."""
    for name, r in (("r_O", r_O), ("r_Y", r_Y)):
        if not 0.0 <= r <= 1.0:
            raise InvalidParameterError(f"{name} must lie in [0, 1], got {r}")
    groups = []
    for g, r in (("O", r_O), ("Y", r_Y)):
        total = getattr(demo, f"T_{g}")
        e, i, rec = getattr(demo, f"E_{g}"), getattr(demo, f"I_{g}"), getattr(demo, f"R_{g}")
        sigma = total - (e + i + rec)
        if sigma < 0:
            raise InfeasibleDemographicsError(f"E_{g}+I_{g}+R_{g} exceeds T_{g}")
        u = r * sigma
        # S is taken as the remainder so the group sums to T exactly
        s = sigma - u
        groups.append({"S": s, "U": u, "E": e, "I": i, "R": rec})
    return StateVec.from_compartments(*groups)


def _prevalence(x, p: EpiParams) -> tuple[float, float]:
    return (x[4] + x[5]) / p.T_O, (x[12] + x[13]) / p.T_Y


def _forces(x, p: EpiParams) -> tuple[float, float]:
    prev_o, prev_y = _prevalence(x, p)
    return (p.beta_OO * prev_o + p.beta_YO * prev_y,
            p.beta_OY * prev_o + p.beta_YY * prev_y)


def force_of_infection(x: StateVec | np.ndarray, p: EpiParams, g: AgeGroup | str) -> float:
    """Per-capita daily infection rate ``B_g`` acting on group ``g`` susceptibles."""
    vals = x.values if isinstance(x, StateVec) else x
    b_o, b_y = _forces(vals, p)
    return float(b_o if AgeGroup(g) is AgeGroup.O else b_y)


def rhs_extended(x: np.ndarray, u_o: float, u_y: float, p: EpiParams) -> np.ndarray:
    """State derivative plus the two cumulative-infection rates (18 entries).

    Only the first 16 entries of ``x`` are read.
    """
    b_o, b_y = _forces(x, p)
    gv, av = p.gamma_V, p.alpha_V
    ge, gi = p.gamma_E, p.gamma_I
    out = np.empty(N_STATES + 2)
    for off, b, u, c in ((0, b_o, u_o, 16), (8, b_y, u_y, 17)):
        s, v, n, un, e, i = x[off], x[off + 1], x[off + 2], x[off + 3], x[off + 4], x[off + 5]
        vac = u * s
        inflow = b * (s + v + n + un)
        out[off] = -b * s - vac
        out[off + 1] = vac - b * v - (1.0 - av) * gv * v - av * gv * v
        out[off + 2] = (1.0 - av) * gv * v - b * n
        out[off + 3] = -b * un
        out[off + 4] = inflow - ge * e
        out[off + 5] = ge * e - gi * i
        out[off + 6] = gi * i
        out[off + 7] = av * gv * v
        out[c] = inflow
    return out


def state_rhs(x: StateVec | np.ndarray, u_O: float, u_Y: float, p: EpiParams) -> np.ndarray:
    """Time derivative of the 16 compartments under vaccination rates ``u_O``, ``u_Y``."""
    vals = x.values if isinstance(x, StateVec) else np.asarray(x, dtype=float)
    return rhs_extended(vals, u_O, u_Y, p)[:N_STATES]
