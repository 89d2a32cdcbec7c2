"""Hamiltonian and costate dynamics for the vaccination control problem.

Costates exist for S, V, N, U, E and I of each group. R and P never feed
back into the dynamics or the running cost, so their costates are
identically zero and are not stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vaxctl.errors import InvalidParameterError
from vaxctl.model import AgeGroup, EpiParams, _forces, state_rhs

COSTATE_COMPARTMENTS = ("S", "V", "N", "U", "E", "I")
N_COSTATES = 2 * len(COSTATE_COMPARTMENTS)
COSTATE_NAMES = tuple(f"lambda_{c}_{g.value}" for g in AgeGroup for c in COSTATE_COMPARTMENTS)
# positions of the costate-bearing compartments in a 16-entry state array
COSTATE_STATE_INDEX = np.array([0, 1, 2, 3, 4, 5, 8, 9, 10, 11, 12, 13])


@dataclass(frozen=True)
class AdjointVec:
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (N_COSTATES,):
            raise InvalidParameterError(f"costate must have {N_COSTATES} entries, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls) -> "AdjointVec":
        return cls(np.zeros(N_COSTATES))

    def __getitem__(self, name: str) -> float:
        if not name.startswith("lambda_"):
            name = "lambda_" + name
        return float(self.values[COSTATE_NAMES.index(name)])


def _vals(obj):
    return obj.values if hasattr(obj, "values") else np.asarray(obj, dtype=float)


def hamiltonian(x, u_O: float, u_Y: float, lam, p: EpiParams, W_O: float, W_Y: float) -> float:
    """Running cost plus costate-weighted dynamics at one instant."""
    if W_O < 0 or W_Y < 0:
        raise InvalidParameterError("weights must be >= 0")
    xv = _vals(x)
    lv = _vals(lam)
    running = xv[5] + xv[13] + 0.5 * W_O * u_O ** 2 + 0.5 * W_Y * u_Y ** 2
    dx = state_rhs(xv, u_O, u_Y, p)
    return float(running + np.dot(lv, dx[COSTATE_STATE_INDEX]))


def adjoint_rhs_array(lam: np.ndarray, x: np.ndarray, u_o: float, u_y: float, p: EpiParams) -> np.ndarray:
    """``-dH/dx`` on raw arrays; the hot path of the backward sweep."""
    b_o, b_y = _forces(x, p)
    gv, av, ge, gi = p.gamma_V, p.alpha_V, p.gamma_E, p.gamma_I

    # dH/dB_g: each susceptible-type member moves from its compartment into E
    h_o = (x[0] * (lam[4] - lam[0]) + x[1] * (lam[4] - lam[1])
           + x[2] * (lam[4] - lam[2]) + x[3] * (lam[4] - lam[3]))
    h_y = (x[8] * (lam[10] - lam[6]) + x[9] * (lam[10] - lam[7])
           + x[10] * (lam[10] - lam[8]) + x[11] * (lam[10] - lam[9]))
    # E_g and I_g enter both forces identically
    k_o = (p.beta_OO * h_o + p.beta_OY * h_y) / p.T_O
    k_y = (p.beta_YO * h_o + p.beta_YY * h_y) / p.T_Y

    out = np.empty(N_COSTATES)
    for off, b, u, k in ((0, b_o, u_o, k_o), (6, b_y, u_y, k_y)):
        ls, lv, ln, lu, le, li = lam[off], lam[off + 1], lam[off + 2], lam[off + 3], lam[off + 4], lam[off + 5]
        out[off] = -(b * (le - ls) + u * (lv - ls))
        out[off + 1] = -(b * (le - lv) + (1.0 - av) * gv * ln - gv * lv)
        out[off + 2] = -b * (le - ln)
        out[off + 3] = -b * (le - lu)
        out[off + 4] = -(k + ge * (li - le))
        out[off + 5] = -(1.0 + k - gi * li)
    return out


def adjoint_rhs(lam, x, u_O: float, u_Y: float, p: EpiParams) -> np.ndarray:
    """Costate derivative ``-dH/dx`` for the 12 costate-bearing compartments."""
    return adjoint_rhs_array(_vals(lam), _vals(x), u_O, u_Y, p)


def control_gradient(x, lam, u_O: float, u_Y: float, W_O: float, W_Y: float) -> tuple[float, float]:
    """``dH/du_g = W_g u_g - S_g (lambda_S_g - lambda_V_g)``."""
    xv, lv = _vals(x), _vals(lam)
    return (W_O * u_O - xv[0] * (lv[0] - lv[1]),
            W_Y * u_Y - xv[8] * (lv[6] - lv[7]))
