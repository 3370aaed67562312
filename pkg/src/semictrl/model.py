"""Domain types shared by every module.

The state space X and the input space U are finite Euclidean spaces; an
input trajectory in L2([0, tau]; U) is stored by its samples on a uniform
time grid and integrated with the composite trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[t_start, t_end]`` with ``n_steps`` cells."""

    t_end: float
    n_steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not np.isfinite(self.t_end) or not self.t_end > self.t_start:
            raise ValueError(f"t_end must exceed t_start, got [{self.t_start}, {self.t_end}]")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "t_start", float(self.t_start))

    @property
    def tau(self) -> float:
        return self.t_end - self.t_start

    @property
    def dt(self) -> float:
        return self.tau / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        t = self.t_start + self.dt * np.arange(self.n_nodes)
        t[-1] = self.t_end
        return t

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights over the whole grid."""
        w = np.full(self.n_nodes, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def refined(self, factor=2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor, self.t_start)


# -- generators ---------------------------------------------------------------


class GeneratorSpec:
    """Discretized generator A of the semigroup T(t)."""

    dim: int

    def matrix(self) -> np.ndarray:
        raise NotImplementedError

    def diagonal(self) -> Optional[np.ndarray]:
        """Eigenvalues if A is diagonal in the state coordinates, else None."""
        return None


@dataclass(frozen=True)
class DiagonalSpectral(GeneratorSpec):
    eigenvalues: tuple

    def __post_init__(self):
        ev = tuple(float(v) for v in np.ravel(self.eigenvalues))
        if len(ev) < 1:
            raise ValueError("DiagonalSpectral needs at least one eigenvalue")
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def dim(self):
        return len(self.eigenvalues)

    def matrix(self):
        return np.diag(self.eigenvalues)

    def diagonal(self):
        return np.array(self.eigenvalues)


@dataclass(frozen=True)
class DenseMatrix(GeneratorSpec):
    entries: tuple

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.entries, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"DenseMatrix must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", tuple(map(tuple, a.tolist())))

    @property
    def dim(self):
        return len(self.entries)

    def matrix(self):
        return np.array(self.entries)

    def diagonal(self):
        a = self.matrix()
        if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
            return np.diag(a).copy()
        return None


def dirichlet_laplacian(n_modes, length=1.0, diffusivity=1.0) -> DiagonalSpectral:
    """First ``n_modes`` eigenvalues of ``diffusivity * d^2/dz^2`` on (0, length)."""
    k = np.arange(1, n_modes + 1)
    return DiagonalSpectral(tuple(-diffusivity * (k * np.pi / length) ** 2))


# -- nonlinear maps -------------------------------------------------------------


class NonlinearMap:
    """Nonlinear term f with f(0) = 0 and Df(0) = 0.

    All methods accept stacked states: the last axis is the state.
    """

    dim: int

    def __call__(self, x):
        raise NotImplementedError

    def jvp(self, x, h):
        """Action Df(x) h."""
        raise NotImplementedError

    def jacobian(self, x):
        """Df(x) as a matrix, shape ``x.shape + (dim,)``."""
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.dim)
        cols = [self.jvp(x, np.broadcast_to(e, x.shape)) for e in eye]
        return np.stack(cols, axis=-1)

    def derivative_bound(self, radius) -> Optional[float]:
        """sup of ||Df(x)|| over the ball ||x|| <= radius when known in closed form."""
        return None

    @property
    def is_zero(self):
        return False


@dataclass(frozen=True)
class ZeroMap(NonlinearMap):
    dim: int

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def jvp(self, x, h):
        return np.zeros_like(np.asarray(h, dtype=float))

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim,))

    def derivative_bound(self, radius):
        return 0.0

    @property
    def is_zero(self):
        return True


@dataclass(frozen=True)
class PointwisePolynomial(NonlinearMap):
    """p(s) = c2 s^2 + c3 s^3 + ... applied componentwise.

    With ``basis="sine"`` the state holds the coefficients of the
    L2-orthonormal Dirichlet modes sqrt(2) sin(k pi z) on (0, 1). The
    polynomial acts on the function values at the ``dim`` interior
    collocation points z_i = i / (dim + 1), obtained with the orthonormal
    DST-I, and the result is projected back with the same transform. No
    constant or linear term is representable, so f(0) = 0 and Df(0) = 0
    hold by construction.
    """

    coefficients: tuple
    dim: int
    basis: str = "identity"
    _transform: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        c = tuple(float(v) for v in np.ravel(self.coefficients))
        object.__setattr__(self, "coefficients", c)
        if self.basis not in ("identity", "sine"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.basis == "sine":
            s = scipy.fft.dst(np.eye(self.dim), type=1, norm="ortho", axis=0)
            object.__setattr__(self, "_transform", _frozen(s))

    @property
    def degree(self):
        return len(self.coefficients) + 1

    def _p(self, s, order=0):
        out = np.zeros_like(s)
        for d, c in enumerate(self.coefficients, start=2):
            if d < order:
                continue
            fac = np.prod(np.arange(d - order + 1, d + 1)) if order else 1.0
            out = out + c * fac * s ** (d - order)
        return out

    @property
    def _point_scale(self):
        # point value u(z_i) = sqrt(dim + 1) * (S x)_i for the orthonormal DST-I S
        return 1.0 if self._transform is None else float(np.sqrt(self.dim + 1))

    def _to_points(self, x):
        return x if self._transform is None else (x @ self._transform) * self._point_scale

    def _from_points(self, y):
        return y if self._transform is None else (y @ self._transform) / self._point_scale

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self._from_points(self._p(self._to_points(x)))

    def jvp(self, x, h):
        x = np.asarray(x, dtype=float)
        h = np.asarray(h, dtype=float)
        return self._from_points(self._p(self._to_points(x), 1) * self._to_points(h))

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        d = self._p(self._to_points(x), 1)
        jac = d[..., :, None] * np.eye(self.dim)
        if self._transform is not None:
            s = self._transform
            jac = s @ jac @ s
        return jac

    def derivative_bound(self, radius):
        # The transform is orthogonal and Df is diagonal in point values, so
        # ||Df(x)|| = max_i |p'(u_i)| with every |u_i| <= point_scale * ||x||.
        r = radius * self._point_scale
        s = np.linspace(-r, r, 4001)
        return float(np.max(np.abs(self._p(s, 1))))


@dataclass(frozen=True)
class CustomMap(NonlinearMap):
    """User-supplied f and Df(x) h acting on single state vectors."""

    dim: int
    func: Callable = field(compare=False)
    jvp_func: Callable = field(compare=False)

    def _rowwise(self, fn, *arrays):
        arrays = [np.asarray(a, dtype=float) for a in arrays]
        lead = np.broadcast_shapes(*(a.shape[:-1] for a in arrays))
        arrays = [np.broadcast_to(a, lead + (self.dim,)).reshape(-1, self.dim) for a in arrays]
        out = np.array([fn(*row) for row in zip(*arrays)], dtype=float)
        return out.reshape(lead + (self.dim,))

    def __call__(self, x):
        return self._rowwise(self.func, x)

    def jvp(self, x, h):
        return self._rowwise(self.jvp_func, x, h)


def check_directional_derivative(f: NonlinearMap, x, h, eps=(1e-2, 1e-3, 1e-4, 1e-5)):
    """Ratios ||f(x + e h) - f(x) - e Df(x) h|| / e for the given step sizes."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    fx = f(x)
    dfh = f.jvp(x, h)
    return np.array([np.linalg.norm(f(x + e * h) - fx - e * dfh) / e for e in eps])


# -- the semilinear system --------------------------------------------------------


@dataclass(frozen=True)
class SemilinearSystem:
    """x'(t) = A x(t) + f(x(t)) + B u(t)."""

    generator: GeneratorSpec
    input_matrix: tuple
    nonlinearity: NonlinearMap

    def __post_init__(self):
        b = np.atleast_2d(np.array(self.input_matrix, dtype=float))
        n = self.generator.dim
        if b.shape[0] != n:
            raise ValueError(f"B has {b.shape[0]} rows, state dimension is {n}")
        if self.nonlinearity.dim != n:
            raise ValueError(f"f acts on dimension {self.nonlinearity.dim}, state dimension is {n}")
        object.__setattr__(self, "input_matrix", tuple(map(tuple, b.tolist())))

    @property
    def state_dim(self) -> int:
        return self.generator.dim

    @property
    def input_dim(self) -> int:
        return len(self.input_matrix[0])

    @property
    def B(self) -> np.ndarray:
        return np.array(self.input_matrix)

    def with_nonlinearity(self, f: NonlinearMap) -> "SemilinearSystem":
        return SemilinearSystem(self.generator, self.input_matrix, f)


# -- signals and trajectories --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Input samples at every grid node, shape ``(n_nodes, input_dim)``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_nodes:
            raise ValueError(f"control needs {self.grid.n_nodes} samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid, input_dim=1):
        return cls(grid, np.zeros((grid.n_nodes, input_dim)))

    @classmethod
    def constant(cls, grid, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.n_nodes, 1)))

    @classmethod
    def from_function(cls, grid, fn: Callable):
        return cls(grid, np.array([np.atleast_1d(fn(t)) for t in grid.times]))

    @classmethod
    def from_flat(cls, grid, flat, input_dim):
        return cls(grid, np.asarray(flat, dtype=float).reshape(grid.n_nodes, input_dim))

    @property
    def input_dim(self):
        return self.values.shape[1]

    def flatten(self) -> np.ndarray:
        return self.values.reshape(-1)

    def l2_norm(self) -> float:
        return l2_norm(self)

    def _combine(self, other, op):
        if isinstance(other, ControlSignal):
            if other.grid != self.grid:
                raise ValueError("controls live on different grids")
            other = other.values
        return ControlSignal(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, a):
        return ControlSignal(self.grid, self.values * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State samples at every grid node, shape ``(n_nodes, state_dim)``."""

    grid: TimeGrid
    states: np.ndarray
    converged: bool = True
    picard_iterations: int = 0

    def __post_init__(self):
        s = np.array(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.shape[0] != self.grid.n_nodes:
            raise ValueError(f"trajectory needs {self.grid.n_nodes} states, got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @classmethod
    def zeros(cls, grid, state_dim):
        return cls(grid, np.zeros((grid.n_nodes, state_dim)))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.states)

    def sup_norm(self) -> float:
        return sup_norm(self)


def l2_norm(u: ControlSignal) -> float:
    """Trapezoid approximation of the L2([0, tau]; U) norm."""
    sq = np.einsum("ij,ij->i", u.values, u.values)
    return float(np.sqrt(np.dot(u.grid.weights(), sq)))


def sup_norm(x: Trajectory) -> float:
    """Largest Euclidean state norm over the grid nodes."""
    return float(np.max(np.linalg.norm(x.states, axis=1)))


def as_state(x, dim) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise ValueError(f"expected a state vector of length {dim}, got shape {x.shape}")
    return x


def uniform_in_ball(rng, n_samples, dim, radius) -> np.ndarray:
    """Points uniformly distributed in the Euclidean ball."""
    g = rng.standard_normal((n_samples, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n_samples) ** (1.0 / dim)
    return g * r[:, None]


def random_control(rng, grid, input_dim, radius) -> ControlSignal:
    """Gaussian node samples rescaled onto the L2 sphere of ``radius``."""
    u = ControlSignal(grid, rng.standard_normal((grid.n_nodes, input_dim)))
    return u * (radius / u.l2_norm())

