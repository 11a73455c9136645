"""Solvers for the shifted implicit-Euler systems ``(I + dt*A - sigma*I) x = b``.

Every forward and adjoint step solves one of these with ``sigma = dt * d(s)``.
Three backends share one call contract:

* ``SpectralSolver`` diagonalises ``A`` with the type-I sine transform. Exact,
  but only valid for a spatially uniform diffusivity.
* ``DirectSolver`` factorises the sparse matrix for each distinct shift.
* ``CGSolver`` runs Jacobi-preconditioned conjugate gradients.
"""

from __future__ import annotations

import os
from collections import OrderedDict

import numpy as np
import scipy.sparse as sp
from scipy.fft import dstn
from scipy.sparse.linalg import splu

from .model import Grid


THREADS_ENV = "TUMOR_CONTROL_THREADS"


class SolverError(RuntimeError):
    """Linear solve failed to meet its residual contract."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


def pcg(A, b, x0=None, M_diag=None, rtol=1e-10, maxiter=None):
    """Preconditioned conjugate gradients for SPD ``A``.

    Returns ``(x, residual_history)`` with residuals relative to ``||b||``.
    Raises ``SolverError`` if ``rtol`` is not reached within ``maxiter``.
    """
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), [0.0]
    inv_diag = np.ones(n) if M_diag is None else 1.0 / M_diag
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    history = [np.linalg.norm(r) / bnorm]
    for _ in range(maxiter):
        if history[-1] <= rtol:
            return x, history
        Ad = A @ d
        alpha = rz / (d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
        history.append(np.linalg.norm(r) / bnorm)
    if history[-1] <= rtol:
        return x, history
    raise SolverError(f"CG stalled at relative residual {history[-1]:.3e} > {rtol:.1e}", history)


class ShiftedSolver:
    """Base class; ``solve(rhs, sigma)`` acts on fields of shape ``(nx, ny)``."""

    name = "base"

    def __init__(self, A: sp.csr_matrix, grid: Grid, dt: float):
        self.A = A
        self.grid = grid
        self.dt = dt
        self.shape = (grid.nx, grid.ny)

    def matrix(self, sigma: float) -> sp.csr_matrix:
        n = self.A.shape[0]
        return (sp.identity(n, format="csr") * (1.0 - sigma) + self.dt * self.A).tocsr()

    def apply(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """Multiply by the step matrix (used for residual checks)."""
        flat = x.reshape(-1)
        return ((1.0 - sigma) * flat + self.dt * (self.A @ flat)).reshape(self.shape)

    def solve(self, rhs: np.ndarray, sigma: float) -> np.ndarray:
        raise NotImplementedError


class SpectralSolver(ShiftedSolver):
    name = "spectral"

    def __init__(self, A, grid, dt):
        if not grid.uniform_k:
            raise ValueError("spectral solver requires a uniform diffusion coefficient")
        super().__init__(A, grid, dt)
        self.eigenvalues = discrete_eigenvalues(grid)
        self.workers = int(os.environ.get(THREADS_ENV, "1"))

    def solve(self, rhs, sigma):
        coef = dstn(rhs, type=1, norm="ortho", workers=self.workers)
        coef /= 1.0 - sigma + self.dt * self.eigenvalues
        return dstn(coef, type=1, norm="ortho", workers=self.workers)


class DirectSolver(ShiftedSolver):
    name = "direct"

    def __init__(self, A, grid, dt, cache_size=8):
        super().__init__(A, grid, dt)
        self._cache: OrderedDict[float, object] = OrderedDict()
        self._cache_size = cache_size

    def _factor(self, sigma):
        lu = self._cache.get(sigma)
        if lu is None:
            lu = splu(self.matrix(sigma).tocsc())
            self._cache[sigma] = lu
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(sigma)
        return lu

    def solve(self, rhs, sigma):
        return self._factor(sigma).solve(rhs.reshape(-1)).reshape(self.shape)


class CGSolver(ShiftedSolver):
    name = "cg"

    def __init__(self, A, grid, dt, rtol=1e-10):
        super().__init__(A, grid, dt)
        self.rtol = rtol
        self._diag = A.diagonal()

    def solve(self, rhs, sigma):
        M = self.matrix(sigma)
        b = rhs.reshape(-1)
        x, _ = pcg(M, b, x0=b.copy(), M_diag=1.0 - sigma + self.dt * self._diag, rtol=self.rtol)
        return x.reshape(self.shape)


def discrete_eigenvalues(grid: Grid) -> np.ndarray:
    """Eigenvalues of the 5-point operator for uniform ``k``, shape ``(nx, ny)``."""
    k = float(grid.k_field.flat[0])
    i = np.arange(1, grid.nx + 1)
    j = np.arange(1, grid.ny + 1)
    lx = 4.0 / grid.hx**2 * np.sin(0.5 * np.pi * i / (grid.nx + 1)) ** 2
    ly = 4.0 / grid.hy**2 * np.sin(0.5 * np.pi * j / (grid.ny + 1)) ** 2
    return k * (lx[:, None] + ly[None, :])


def make_solver(A, grid: Grid, dt: float, backend: str = "auto", rtol: float = 1e-10) -> ShiftedSolver:
    if backend == "auto":
        backend = "spectral" if grid.uniform_k else "direct"
    if backend == "spectral":
        return SpectralSolver(A, grid, dt)
    if backend == "direct":
        return DirectSolver(A, grid, dt)
    if backend == "cg":
        return CGSolver(A, grid, dt, rtol=rtol)
    raise ValueError(f"unknown solver backend {backend!r}")
