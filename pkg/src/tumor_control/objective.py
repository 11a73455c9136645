"""Tracking objective and its penalized variant, by quadrature on the meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Grid, ModelParams, TimeMesh, penalty_f1, penalty_f2


def _states(ytraj) -> np.ndarray:
    return np.asarray(getattr(ytraj, "y", ytraj), dtype=float)


def tracking_density(y: np.ndarray, grid: Grid, mask=None) -> np.ndarray:
    """``||y(t_n)||^2`` over the tracked region at every node."""
    y2 = y * y if mask is None else y * y * mask
    return grid.cell_area * y2.reshape(y.shape[0], -1).sum(axis=1)


def eval_J(ytraj, u, lam: float, grid: Grid, mesh: TimeMesh, mask=None) -> float:
    """``0.5 ||y||^2_{L2(Q)} + 0.5 lam ||u||^2_{L2(0,T)}``.

    Trapezoid rule in time for the state term, exact sum for the piecewise
    constant control. ``mask`` restricts the state term to a subdomain.
    """
    y = _states(ytraj)
    u = np.asarray(u, dtype=float)
    state = 0.5 * float(mesh.trapezoid_weights() @ tracking_density(y, grid, mask))
    return state + 0.5 * lam * mesh.dt * float(u @ u)


@dataclass(frozen=True)
class Objective:
    J: float
    penalty1: float
    penalty2: float
    int_f1: float
    int_f2: float

    @property
    def J_eps(self) -> float:
        return self.J + self.penalty1 + self.penalty2

    @property
    def violation_integral(self) -> float:
        return self.int_f1 + self.int_f2


def penalty_integrals(s, p: ModelParams, mesh: TimeMesh) -> tuple[float, float]:
    """Trapezoid integrals of ``f1(s)`` over ``[0, T]`` and ``f2(s)`` over ``[t0, T]``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (mesh.nt + 1,):
        raise ValueError(f"drug trajectory has shape {s.shape}, mesh expects ({mesh.nt + 1},)")
    n0 = mesh.node_index(p.t0)
    i1 = float(mesh.trapezoid_weights() @ penalty_f1(s, p.s_plus))
    i2 = float(mesh.trapezoid_weights(n0) @ penalty_f2(s, p.s_minus))
    return i1, i2


def eval_Jeps(ytraj, s, u, p: ModelParams, grid: Grid, mesh: TimeMesh, mask=None) -> Objective:
    J = eval_J(ytraj, u, p.lam, grid, mesh, mask)
    i1, i2 = penalty_integrals(s, p, mesh)
    return Objective(J=J, penalty1=i1 / p.eps, penalty2=i2 / p.eps, int_f1=i1, int_f2=i2)


def constraint_violations(s, p: ModelParams, mesh: TimeMesh) -> tuple[float, float]:
    """Largest excursion above ``s_plus`` and below ``s_minus`` (after ``t0``)."""
    s = np.asarray(s, dtype=float)
    n0 = mesh.node_index(p.t0)
    upper = max(0.0, float(np.max(s)) - p.s_plus)
    lower = max(0.0, p.s_minus - float(np.min(s[n0:])))
    return upper, lower
