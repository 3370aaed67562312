"""Linearization along a trajectory, the controllability map and its Gramian.

Controls are flattened node-major: entry ``k * m + i`` is channel ``i`` at
node ``k``. The input space carries the trapezoid inner product
<u, v> = sum_k w_k u_k . v_k, so the adjoint of a matrix L is
Wq^{-1} L^T with Wq the diagonal of weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularGramian
from .model import ControlSignal, SemilinearSystem, TimeGrid, Trajectory
from .semigroup import SemigroupModel

ZERO_TRAJECTORY = "zero"

GRAMIAN_RTOL = 1e-12


def flat_weights(grid: TimeGrid, input_dim: int) -> np.ndarray:
    return np.repeat(grid.weights(), input_dim)


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """Matrix sending a flattened input to the state reached at tau."""

    grid: TimeGrid
    matrix: np.ndarray
    input_dim: int
    base_trajectory_id: str = ZERO_TRAJECTORY

    @property
    def state_dim(self):
        return self.matrix.shape[0]

    def apply(self, du: ControlSignal) -> np.ndarray:
        return self.matrix @ du.flatten()

    def adjoint(self, x) -> ControlSignal:
        w = flat_weights(self.grid, self.input_dim)
        return ControlSignal.from_flat(self.grid, (self.matrix.T @ x) / w, self.input_dim)

    def normal_matrix(self) -> np.ndarray:
        w = flat_weights(self.grid, self.input_dim)
        w_mat = (self.matrix / w) @ self.matrix.T
        return 0.5 * (w_mat + w_mat.T)

    def operator_norm(self) -> float:
        """Norm from the trapezoid L2 space into X."""
        return operator_norm(self.matrix, flat_weights(self.grid, self.input_dim))


def operator_norm(matrix, weights) -> float:
    w_mat = (matrix / weights) @ matrix.T
    lam = np.linalg.eigvalsh(0.5 * (w_mat + w_mat.T))
    return float(np.sqrt(max(lam[-1], 0.0)))


@dataclass(frozen=True, eq=False)
class Gramian:
    matrix: np.ndarray
    tau: float
    regularization: float = GRAMIAN_RTOL
    eigenvalues: np.ndarray = field(init=False)
    _eigvecs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lam, vec = np.linalg.eigh(self.matrix)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "_eigvecs", vec)

    @property
    def threshold(self) -> float:
        return self.regularization * max(self.eigenvalues[-1], 0.0)

    @property
    def is_positive_definite(self) -> bool:
        return bool(self.eigenvalues[-1] > 0 and self.eigenvalues[0] > self.threshold)

    @property
    def condition_number(self) -> float:
        if not self.is_positive_definite:
            return float("inf")
        return float(self.eigenvalues[-1] / self.eigenvalues[0])

    def solve(self, x) -> np.ndarray:
        if not self.is_positive_definite:
            raise SingularGramian(
                f"Gramian min eigenvalue {self.eigenvalues[0]:.3e} <= threshold {self.threshold:.3e}"
            )
        v = self._eigvecs
        return v @ ((v.T @ x) / self.eigenvalues)


def lti_controllability_map(sys: SemilinearSystem, sg: SemigroupModel) -> LinearizedOperator:
    """Trapezoid discretization of u -> int_0^tau T(tau - s) B u(s) ds."""
    grid = sg.grid
    tb = sg.apply_all(sys.B)[::-1]  # block k holds T(tau - t_k) B
    blocks = grid.weights()[:, None, None] * tb
    n, m = sys.state_dim, sys.input_dim
    matrix = blocks.transpose(1, 0, 2).reshape(n, grid.n_nodes * m)
    return LinearizedOperator(grid, matrix, m, ZERO_TRAJECTORY)


def _jacobians(sys, base: Trajectory):
    if sys.nonlinearity.is_zero or base.is_zero:
        # Df(0) = 0 is a standing assumption
        return None
    return sys.nonlinearity.jacobian(base.states)


def _step(sg, v):
    if sg.is_diagonal:
        d = sg.step_operator.diagonal()
        return d * v if v.ndim == 1 else d[:, None] * v
    return sg.step_operator @ v


def forward_blocks(sys: SemilinearSystem, sg: SemigroupModel, base: Trajectory, forcing=None):
    """Causal forward accumulation of the linearized integral equation.

    Yields ``(k, dx_k)`` for every node. With ``forcing`` (samples of
    B du, shape ``(n_nodes, n)``) the states are vectors; without it the
    columns are the responses to all unit inputs, i.e. dx_k is the matrix
    of L_{t_k}. The implicit trapezoid term at s = t_k is solved exactly.
    """
    grid = sg.grid
    if base.grid != grid:
        raise ValueError("base trajectory and semigroup use different grids")
    n, m = sys.state_dim, sys.input_dim
    dt = grid.dt
    jac = _jacobians(sys, base)
    B = sys.B
    eye = np.eye(n)
    if forcing is None:
        shape = (n, grid.n_nodes * m)

        def add_input(v, k, scale):
            v[:, k * m : (k + 1) * m] += scale * B
            return v

    else:
        forcing = np.asarray(forcing, dtype=float)
        if forcing.shape != (grid.n_nodes, n):
            raise ValueError(f"forcing must have shape {(grid.n_nodes, n)}, got {forcing.shape}")
        shape = (n,)

        def add_input(v, k, scale):
            v += scale * forcing[k]
            return v

    dx = np.zeros(shape)
    acc = np.zeros(shape)
    yield 0, dx
    for k in range(1, grid.n_nodes):
        w_prev = 0.5 * dt if k == 1 else dt
        g = jac[k - 1] @ dx if jac is not None else np.zeros(shape)
        g = add_input(g, k - 1, 1.0)
        acc = _step(sg, acc + w_prev * g)
        rhs = add_input(acc.copy(), k, 0.5 * dt)
        if jac is not None:
            dx = np.linalg.solve(eye - 0.5 * dt * jac[k], rhs)
        else:
            dx = rhs
        yield k, dx


def solve_linearized(
    sys: SemilinearSystem,
    sg: SemigroupModel,
    base: Trajectory,
    du: ControlSignal,
    method: str = "forward",
    tol: float = 1e-15,
    max_iterations: int = 1000,
) -> Trajectory:
    """Solution of dx' = (A + Df(S_t(u_bar))) dx + B du with dx(0) = 0."""
    if du.grid != sg.grid or du.input_dim != sys.input_dim:
        raise ValueError("control does not match the system and grid")
    forcing = du.values @ sys.B.T
    if method == "forward":
        states = np.array([dx for _, dx in forward_blocks(sys, sg, base, forcing)])
        return Trajectory(sg.grid, states, picard_iterations=0)
    if method != "picard":
        raise ValueError(f"unknown method {method!r}")
    jac = _jacobians(sys, base)
    linear = sg.convolve(forcing)
    dx = linear
    if jac is None:
        return Trajectory(sg.grid, dx, picard_iterations=1)
    for it in range(1, max_iterations + 1):
        new = linear + sg.convolve(np.einsum("kij,kj->ki", jac, dx))
        diff = np.max(np.abs(new - dx))
        dx = new
        if diff <= tol * max(1.0, np.max(np.abs(dx))):
            return Trajectory(sg.grid, dx, picard_iterations=it)
    return Trajectory(sg.grid, dx, converged=False, picard_iterations=max_iterations)


def materialize_L(sys: SemilinearSystem, sg: SemigroupModel, base: Trajectory, base_id: str = "") -> LinearizedOperator:
    """Dense matrix of L_tau, the derivative of S_tau along ``base``."""
    dx = None
    for _, dx in forward_blocks(sys, sg, base):
        pass
    if not base_id:
        base_id = ZERO_TRAJECTORY if base.is_zero else f"trajectory@{id(base):x}"
    return LinearizedOperator(sg.grid, dx, sys.input_dim, base_id)


def gramian(Lop: LinearizedOperator, regularization: float = GRAMIAN_RTOL) -> Gramian:
    """W = L L*, the trapezoid rule for int_0^tau T(tau-s) B B* T*(tau-s) ds in the LTI case."""
    return Gramian(Lop.normal_matrix(), Lop.grid.tau, regularization)


def min_norm_control(Lop: LinearizedOperator, W: Gramian, target) -> ControlSignal:
    """u = L* W^{-1} target; for the LTI map u(s) = B* T*(tau - s) W^{-1} target."""
    target = np.atleast_1d(np.asarray(target, dtype=float))
    return Lop.adjoint(W.solve(target))
