"""Mild solutions of x' = A x + f(x) + B u by Picard iteration.

The discretized variation-of-constants equation

    x_k = T(t_k) x0 + sum_j w_kj T(t_k - t_j) (f(x_j) + B u_j)

(trapezoid weights w_kj) is solved as a fixed point, starting from the
solution of the linear part. When the iteration fails on a window the
window is halved and the second half is restarted from the endpoint of the
first.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, NoConvergence
from .model import ControlSignal, SemilinearSystem, Trajectory, as_state
from .semigroup import SemigroupModel

logger = logging.getLogger(__name__)

_ROUNDOFF = 256 * np.finfo(float).eps


@dataclass(frozen=True)
class PicardConfig:
    tol: float = 1e-12
    max_iterations: int = 200
    blowup_threshold: float = 1e6
    max_subinterval_halvings: int = 12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.max_subinterval_halvings < 0:
            raise ValueError("max_subinterval_halvings must be nonnegative")


class _WindowFailure(Exception):
    def __init__(self, blowup, iterations):
        self.blowup = blowup
        self.iterations = iterations


def _picard_window(sys, sg, forcing, x_start, cfg):
    """Fixed point on one window; ``forcing`` holds B u at the window nodes."""
    n_k = forcing.shape[0]
    f = sys.nonlinearity
    linear = sg.apply_all(x_start)[:n_k] + sg.convolve(forcing)
    x = linear
    if f.is_zero:
        return x, 1
    for it in range(1, cfg.max_iterations + 1):
        new = linear + sg.convolve(f(x))
        norms = np.linalg.norm(new, axis=1)
        if not np.all(np.isfinite(norms)) or norms.max() > cfg.blowup_threshold:
            raise _WindowFailure(True, it)
        diff = np.max(np.linalg.norm(new - x, axis=1))
        x = new
        if diff <= max(cfg.tol, _ROUNDOFF * norms.max()):
            return x, it
    raise _WindowFailure(False, cfg.max_iterations)


def solve_mild(sys: SemilinearSystem, sg: SemigroupModel, u: ControlSignal, x0, cfg: PicardConfig = PicardConfig()) -> Trajectory:
    """Mild solution on the semigroup grid; raises BlowUp or NoConvergence."""
    if u.grid != sg.grid:
        raise ValueError("control and semigroup use different grids")
    if u.input_dim != sys.input_dim:
        raise ValueError(f"control has {u.input_dim} channels, system has {sys.input_dim}")
    x0 = as_state(x0, sys.state_dim)
    forcing = u.values @ sys.B.T
    total = 0

    def solve_range(a, b, x_start, depth):
        nonlocal total
        try:
            x, its = _picard_window(sys, sg, forcing[a : b + 1], x_start, cfg)
            total += its
            return x
        except _WindowFailure as fail:
            total += fail.iterations
            if depth >= cfg.max_subinterval_halvings or b - a < 2:
                t = sg.grid.times
                window = f"[{t[a]:.6g}, {t[b]:.6g}]"
                if fail.blowup:
                    raise BlowUp(f"iterate exceeded {cfg.blowup_threshold:g} on {window}") from None
                raise NoConvergence(f"no convergence to tol {cfg.tol:g} on {window}") from None
        mid = (a + b) // 2
        logger.debug("halving window [%d, %d] at depth %d", a, b, depth)
        left = solve_range(a, mid, x_start, depth + 1)
        right = solve_range(mid, b, left[-1], depth + 1)
        return np.concatenate([left, right[1:]])

    states = solve_range(0, sg.grid.n_steps, x0, 0)
    return Trajectory(sg.grid, states, converged=True, picard_iterations=total)


def solution_map(sys: SemilinearSystem, sg: SemigroupModel, cfg: PicardConfig = PicardConfig()):
    """u -> S_t(u), the mild solution from the zero initial state."""
    x0 = np.zeros(sys.state_dim)

    def S(u: ControlSignal) -> Trajectory:
        return solve_mild(sys, sg, u, x0, cfg)

    return S
