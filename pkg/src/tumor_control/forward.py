"""Forward solve of the tumour density equation ``y' + A y = d(s) y``.

Finite differences in flux form on the interior nodes of a uniform grid,
homogeneous Dirichlet boundary, implicit Euler in time with the reaction
coefficient taken at the new time node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .drug import solve_s
from .linsolve import ShiftedSolver, make_solver
from .model import Grid, GrowthLaw, ModelParams, TimeMesh


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def assemble_A(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of ``-div(k grad .)`` on the interior nodes.

    Face diffusivities are harmonic means of the two adjacent node values; a
    face touching the boundary uses the interior node's value.
    """
    k = grid.k_field
    if np.any(k <= 0):
        raise ValueError("diffusion coefficient must be positive")
    nx, ny = grid.nx, grid.ny
    idx = np.arange(nx * ny).reshape(nx, ny)
    cx, cy = 1.0 / grid.hx**2, 1.0 / grid.hy**2

    # face coefficients including the two boundary faces on each line
    kx = np.empty((nx + 1, ny))
    kx[1:-1] = _harmonic(k[:-1], k[1:])
    kx[0], kx[-1] = k[0], k[-1]
    ky = np.empty((nx, ny + 1))
    ky[:, 1:-1] = _harmonic(k[:, :-1], k[:, 1:])
    ky[:, 0], ky[:, -1] = k[:, 0], k[:, -1]

    diag = cx * (kx[:-1] + kx[1:]) + cy * (ky[:, :-1] + ky[:, 1:])
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    if nx > 1:
        w = -cx * kx[1:-1]
        rows += [idx[:-1].ravel(), idx[1:].ravel()]
        cols += [idx[1:].ravel(), idx[:-1].ravel()]
        vals += [w.ravel(), w.ravel()]
    if ny > 1:
        w = -cy * ky[:, 1:-1]
        rows += [idx[:, :-1].ravel(), idx[:, 1:].ravel()]
        cols += [idx[:, 1:].ravel(), idx[:, :-1].ravel()]
        vals += [w.ravel(), w.ravel()]
    n = nx * ny
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def initial_condition(grid: Grid, diameter: float = 1.0, center=None, edge_width: float = 0.0) -> np.ndarray:
    """Indicator of a disc (default: diameter 1 cm, centred in the square).

    With ``edge_width > 0`` the edge is smoothed by a half cosine over a band
    of that width straddling the circle.
    """
    cx, cy = (0.5 * grid.L, 0.5 * grid.L) if center is None else center
    radius = 0.5 * diameter
    if radius + 0.5 * edge_width > min(cx, cy, grid.L - cx, grid.L - cy):
        raise ValueError("tumour disc does not fit inside the domain")
    r = np.hypot(grid.x[:, None] - cx, grid.y[None, :] - cy)
    if edge_width <= 0:
        return (r <= radius).astype(float)
    z = np.clip((r - (radius - 0.5 * edge_width)) / edge_width, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * z))


def step_y(y: np.ndarray, s_new: float, solver: ShiftedSolver, law: GrowthLaw) -> np.ndarray:
    """One implicit Euler step: ``(I + dt A - dt d(s_new) I) y_new = y``."""
    return solver.solve(y, solver.dt * float(law(s_new)))


@dataclass
class StateTrajectory:
    """Tumour density at every time node, shape ``(nt + 1, nx, ny)``."""

    y: np.ndarray
    grid: Grid
    mesh: TimeMesh

    def __len__(self):
        return self.y.shape[0]

    def norms(self) -> np.ndarray:
        return np.sqrt(self.grid.cell_area * np.einsum("nij,nij->n", self.y, self.y))

    def at(self, t: float) -> np.ndarray:
        return self.y[self.mesh.node_index(t)]

    def thinned(self, stride: int) -> np.ndarray:
        return self.y[::stride]


class ForwardProblem:
    """Operator, solver and initial state shared by forward and adjoint sweeps."""

    def __init__(self, p: ModelParams, grid: Grid, mesh: TimeMesh, y0: np.ndarray,
                 backend: str = "auto", law: GrowthLaw | None = None):
        self.p = p
        self.grid = grid
        self.mesh = mesh
        self.law = p.law if law is None else law
        self.y0 = np.asarray(y0, dtype=float)
        if self.y0.shape != (grid.nx, grid.ny):
            raise ValueError(f"initial condition shape {self.y0.shape} != {(grid.nx, grid.ny)}")
        self.A = assemble_A(grid)
        self.solver = make_solver(self.A, grid, mesh.dt, backend)

    def solve(self, u) -> tuple[StateTrajectory, np.ndarray]:
        return solve_forward(u, self)


def solve_forward(u, problem: ForwardProblem) -> tuple[StateTrajectory, np.ndarray]:
    """Drug level at the nodes, then the tumour density stepped through time."""
    mesh = problem.mesh
    s = solve_s(u, problem.p, mesh)
    shifts = mesh.dt * np.asarray(problem.law(s[1:]), dtype=float)
    if np.max(shifts) >= 1.0:
        n = int(np.argmax(shifts))
        raise FloatingPointError(
            f"implicit step loses positivity: dt*d(s)={shifts[n]:.3g} >= 1 at t={mesh.times[n + 1]:.4g} (s={s[n + 1]:.4g})")
    y = np.empty((mesh.nt + 1,) + problem.y0.shape)
    y[0] = problem.y0
    for n in range(mesh.nt):
        y[n + 1] = problem.solver.solve(y[n], shifts[n])
    if not np.all(np.isfinite(y[-1])):
        raise FloatingPointError("forward solve produced non-finite values")
    return StateTrajectory(y, problem.grid, mesh), s


def max_stable_dt(law: GrowthLaw, s_low: float = 0.0) -> float:
    """Largest ``dt`` with ``1 - dt*d(s) > 0`` for ``s >= s_low`` (positivity)."""
    # d > 0 only below s_m, so the supremum sits on [s_low, s_m]
    d_max = float(np.max(law(np.linspace(s_low, max(s_low, law.s_m), 401))))
    return math.inf if d_max <= 0 else 1.0 / d_max
