"""Reduced control problem: control in, objective and gradient out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory, reduced_gradient, solve_adjoint
from .drug import l2_norm_control
from .forward import ForwardProblem, StateTrajectory, solve_forward
from .model import Grid, ModelParams, TimeMesh
from .objective import Objective, constraint_violations, eval_Jeps


@dataclass
class Evaluation:
    u: np.ndarray
    s: np.ndarray
    state: StateTrajectory
    objective: Objective
    adjoint: AdjointTrajectory | None = None
    gradient: np.ndarray | None = None


class ControlProblem:
    """Forward solve, penalized objective and adjoint gradient for one scenario."""

    def __init__(self, p: ModelParams, grid: Grid, mesh: TimeMesh, y0: np.ndarray,
                 mask=None, backend: str = "auto"):
        if p.T != mesh.T:
            raise ValueError(f"time mesh horizon {mesh.T} != model horizon {p.T}")
        self.p = p
        self.grid = grid
        self.mesh = mesh
        self.mask = None if mask is None else np.asarray(mask, dtype=float)
        self.forward = ForwardProblem(p, grid, mesh, y0, backend=backend)

    def evaluate(self, u, with_gradient: bool = True) -> Evaluation:
        u = np.asarray(u, dtype=float)
        state, s = solve_forward(u, self.forward)
        obj = eval_Jeps(state, s, u, self.p, self.grid, self.mesh, self.mask)
        ev = Evaluation(u=u, s=s, state=state, objective=obj)
        if with_gradient:
            ev.adjoint = solve_adjoint(state, s, self.p, self.forward, self.mask)
            ev.gradient = reduced_gradient(u, ev.adjoint.p2, self.p.lam)
        return ev

    def J_eps(self, u) -> float:
        return self.evaluate(u, with_gradient=False).objective.J_eps

    def gradient(self, u) -> np.ndarray:
        return self.evaluate(u).gradient

    def inner(self, a, b) -> float:
        """L2(0,T) inner product of two piecewise-constant controls."""
        return self.mesh.dt * float(np.dot(a, b))

    def norm(self, a) -> float:
        return l2_norm_control(a, self.mesh)

    def violations(self, s) -> tuple[float, float]:
        return constraint_violations(s, self.p, self.mesh)


@dataclass(frozen=True)
class GradientCheck:
    directional: np.ndarray
    finite_difference: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.directional), np.abs(self.finite_difference))
        diff = np.abs(self.directional - self.finite_difference)
        return np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0


def gradient_check(problem: ControlProblem, u, n_directions: int = 5, h: float = 1e-5,
                   seed: int = 0) -> GradientCheck:
    """Compare ``<grad, v>`` with central differences along random unit directions."""
    rng = np.random.default_rng(seed)
    u = np.asarray(u, dtype=float)
    g = problem.gradient(u)
    dirs, fds = [], []
    for _ in range(n_directions):
        v = rng.standard_normal(u.size)
        v /= problem.norm(v)
        fd = (problem.J_eps(u + h * v) - problem.J_eps(u - h * v)) / (2 * h)
        dirs.append(problem.inner(g, v))
        fds.append(fd)
    return GradientCheck(np.array(dirs), np.array(fds))
