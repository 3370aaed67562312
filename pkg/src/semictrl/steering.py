"""Steering the semilinear system from 0 to a target state at time tau.

The correction scheme is u_{k+1} = u_k + R (x* - S_tau(u_k)), where R is
the minimal-norm right inverse of either the LTI controllability map
(``frozen``) or the linearization about the current trajectory
(``full_newton``). It starts from the minimal-norm control of the linear
part.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import SemictrlError, Stall
from .linearized import gramian, lti_controllability_map, materialize_L, min_norm_control
from .mild import PicardConfig, solution_map
from .model import ControlSignal, SemilinearSystem, as_state
from .semigroup import SemigroupModel

logger = logging.getLogger(__name__)

MODES = ("frozen", "full_newton")
STALL_WINDOW = 3


@dataclass
class SteeringResult:
    success: bool
    control: ControlSignal
    final_state: np.ndarray
    residual_history: List[float]
    contraction_estimate: float
    iterations: int
    mode: str = "frozen"

    @property
    def residual(self) -> float:
        return self.residual_history[-1]


def contraction_estimate(residuals: Sequence[float]) -> float:
    """Geometric mean of successive residual ratios; 0 with fewer than two residuals."""
    if len(residuals) < 2 or residuals[0] == 0:
        return 0.0
    return float((residuals[-1] / residuals[0]) ** (1.0 / (len(residuals) - 1)))


def _stalled(residuals) -> bool:
    if len(residuals) <= STALL_WINDOW:
        return False
    tail = residuals[-STALL_WINDOW - 1 :]
    return all(b >= a for a, b in zip(tail, tail[1:]))


def steer(
    sys: SemilinearSystem,
    sg: SemigroupModel,
    x_target,
    mode: str = "frozen",
    tol: float = 1e-10,
    max_iter: int = 50,
    cfg: PicardConfig = PicardConfig(),
) -> SteeringResult:
    """Drive x(0) = 0 to ``x_target`` at tau.

    Raises SingularGramian before iterating if the linear part is not
    exactly controllable on the grid, BlowUp if a solve escapes and Stall
    after three non-decreasing residuals.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    x_target = as_state(x_target, sys.state_dim)
    if not np.all(np.isfinite(x_target)):
        raise ValueError("target must be finite")
    L_lti = lti_controllability_map(sys, sg)
    W_lti = gramian(L_lti)
    S = solution_map(sys, sg, cfg)

    u = min_norm_control(L_lti, W_lti, x_target)
    residuals: List[float] = []
    while True:
        traj = S(u)
        defect = x_target - traj.final_state
        residuals.append(float(np.linalg.norm(defect)))
        logger.debug("steer[%s] iteration %d residual %.3e", mode, len(residuals), residuals[-1])
        result = SteeringResult(
            success=residuals[-1] <= tol,
            control=u,
            final_state=traj.final_state.copy(),
            residual_history=list(residuals),
            contraction_estimate=contraction_estimate(residuals),
            iterations=len(residuals),
            mode=mode,
        )
        if result.success or len(residuals) >= max_iter:
            return result
        if _stalled(residuals):
            raise Stall(f"residual did not decrease over {STALL_WINDOW} corrections", result)
        if mode == "frozen":
            u = u + min_norm_control(L_lti, W_lti, defect)
        else:
            L_k = materialize_L(sys, sg, traj)
            u = u + min_norm_control(L_k, gramian(L_k), defect)


@dataclass
class ProbeCell:
    direction: int
    radius: float
    success: bool
    contraction_estimate: float
    residual: float = float("nan")
    iterations: int = 0
    error: str = ""
    residual_history: List[float] = field(default_factory=list)


def reachable_radius_probe(
    sys: SemilinearSystem,
    sg: SemigroupModel,
    directions,
    radii,
    tol: float = 1e-10,
    max_iter: int = 50,
    cfg: PicardConfig = PicardConfig(),
) -> List[ProbeCell]:
    """Frozen-mode steering to ``radius * direction`` for every pair.

    Failures are recorded in the table, never raised.
    """
    directions = [as_state(d, sys.state_dim) for d in directions]
    for i, d in enumerate(directions):
        if abs(np.linalg.norm(d) - 1.0) > 1e-10:
            raise ValueError(f"direction {i} is not unit-norm")
    cells = [(i, float(r)) for i in range(len(directions)) for r in radii]

    def run(cell):
        i, r = cell
        try:
            res = steer(sys, sg, r * directions[i], "frozen", tol, max_iter, cfg)
        except SemictrlError as exc:
            partial = getattr(exc, "result", None)
            return ProbeCell(
                i,
                r,
                False,
                partial.contraction_estimate if partial else float("nan"),
                partial.residual if partial else float("nan"),
                partial.iterations if partial else 0,
                f"{type(exc).__name__}: {exc}",
                partial.residual_history if partial else [],
            )
        return ProbeCell(
            i, r, res.success, res.contraction_estimate, res.residual, res.iterations, "", res.residual_history
        )

    return parallel_map(run, cells)
