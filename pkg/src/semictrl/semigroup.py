"""Discretized semigroup T(t) = exp(A t) on a uniform grid."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.signal

from .errors import SemigroupError
from .model import GeneratorSpec, TimeGrid


class SemigroupModel:
    """T(k dt) for every grid node k, plus M = max_k ||T(k dt)||.

    Powers are cached eagerly. Diagonal generators keep only the
    exponentials of the eigenvalues; dense generators keep the full stack
    ``(n_nodes, n, n)`` built by repeated multiplication with T(dt).
    """

    def __init__(self, generator: GeneratorSpec, grid: TimeGrid):
        a = generator.matrix()
        if not np.all(np.isfinite(a)):
            raise SemigroupError("generator has non-finite entries")
        self.generator = generator
        self.grid = grid
        self.dim = generator.dim
        self.eigenvalues = generator.diagonal()
        t = grid.times - grid.t_start
        if self.eigenvalues is not None:
            self._diag = np.exp(np.outer(t, self.eigenvalues))
            self._diag.setflags(write=False)
            self._powers = None
            self.step_operator = np.diag(self._diag[1])
            self.bound_M = float(np.max(np.abs(self._diag)))
        else:
            step = scipy.linalg.expm(a * grid.dt)
            if not np.all(np.isfinite(step)):
                raise SemigroupError("matrix exponential overflowed")
            powers = np.empty((grid.n_nodes, self.dim, self.dim))
            powers[0] = np.eye(self.dim)
            for k in range(1, grid.n_nodes):
                powers[k] = step @ powers[k - 1]
            if not np.all(np.isfinite(powers)):
                raise SemigroupError("semigroup overflowed on the grid")
            powers.setflags(write=False)
            self._diag = None
            self._powers = powers
            self.step_operator = step
            self.bound_M = float(np.max(np.linalg.norm(powers, ord=2, axis=(1, 2))))
        self.step_operator.setflags(write=False)

    @property
    def is_diagonal(self) -> bool:
        return self._diag is not None

    @property
    def cached_powers(self) -> np.ndarray:
        if self._powers is None:
            eye = np.eye(self.dim)
            self._powers = self._diag[:, :, None] * eye
            self._powers.setflags(write=False)
        return self._powers

    def power(self, k) -> np.ndarray:
        self._check_index(k)
        if self._diag is not None:
            return np.diag(self._diag[k])
        return self._powers[k]

    def _check_index(self, k):
        if not 0 <= k <= self.grid.n_steps:
            raise IndexError(f"grid index {k} outside [0, {self.grid.n_steps}]")

    def apply(self, k, x) -> np.ndarray:
        """T(k dt) x for a vector ``(n,)`` or a block ``(n, p)``."""
        self._check_index(k)
        x = np.asarray(x, dtype=float)
        if self._diag is not None:
            d = self._diag[k]
            return d * x if x.ndim == 1 else d[:, None] * x
        return self._powers[k] @ x

    def apply_all(self, x) -> np.ndarray:
        """Stack of T(k dt) x over all nodes, shape ``(n_nodes,) + x.shape``."""
        x = np.asarray(x, dtype=float)
        if self._diag is not None:
            d = self._diag if x.ndim == 1 else self._diag[:, :, None]
            return d * x
        return np.einsum("kij,j...->ki...", self._powers, x)

    def convolve(self, g) -> np.ndarray:
        """Trapezoid quadrature of int_0^{t_k} T(t_k - s) g(s) ds at every node.

        ``g`` holds samples at nodes ``0..K`` (``K <= n_steps``), shape
        ``(K+1, n)`` or ``(K+1, n, p)``. The running rectangle sum
        F_k = T(dt) F_{k-1} + g_k is corrected at both ends to the trapezoid
        weights; node 0 is exactly zero.
        """
        g = np.asarray(g, dtype=float)
        n_k = g.shape[0]
        if n_k > self.grid.n_nodes:
            raise ValueError("signal longer than the semigroup grid")
        dt = self.grid.dt
        if self._diag is not None:
            step = self._diag[1]
            full = np.empty_like(g)
            for i, a in enumerate(step):
                full[:, i] = scipy.signal.lfilter([1.0], [1.0, -a], g[:, i], axis=0)
            head = self._diag[:n_k] if g.ndim == 2 else self._diag[:n_k, :, None]
            head = head * g[0]
        else:
            step = self.step_operator
            full = np.empty_like(g)
            full[0] = g[0]
            for k in range(1, n_k):
                full[k] = step @ full[k - 1] + g[k]
            head = np.einsum("kij,j...->ki...", self._powers[:n_k], g[0])
        out = dt * full - 0.5 * dt * (head + g)
        out[0] = 0.0
        return out

    def convolve_direct(self, g) -> np.ndarray:
        """Same quadrature summed term by term from the cached powers; O(K^2)."""
        g = np.asarray(g, dtype=float)
        powers = self.cached_powers
        dt = self.grid.dt
        out = np.zeros_like(g)
        for k in range(1, g.shape[0]):
            w = np.full(k + 1, dt)
            w[0] = w[-1] = 0.5 * dt
            terms = np.einsum("jab,jb...->ja...", powers[k::-1], g[: k + 1])
            out[k] = np.tensordot(w, terms, axes=(0, 0))
        return out


def build_semigroup(gen: GeneratorSpec, grid: TimeGrid) -> SemigroupModel:
    return SemigroupModel(gen, grid)


def apply_semigroup(model: SemigroupModel, k: int, x) -> np.ndarray:
    return model.apply(k, x)


def semigroup_bound(model: SemigroupModel) -> float:
    """M = max over grid nodes of the operator 2-norm of T(k dt)."""
    return model.bound_M
