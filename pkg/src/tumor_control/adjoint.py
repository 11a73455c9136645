"""Backward (dual) sweeps and the reduced gradient of the penalized objective.

The discrete scheme is built so that the dual recursions are the exact
transpose of the forward map: ``A`` is symmetric, both directions use implicit
Euler with the same reaction shift, and the sources carry the same trapezoid
weights as the objective. Central differences of the discrete objective then
agree with the adjoint gradient to rounding level.

Indexing: the step that produces ``y[n]`` from ``y[n-1]`` is paired with
``p1[n-1]``, so ``p1[nt] = 0`` is the terminal value and ``p1[n-1]`` solves

    (I + dt A - dt d(s[n]) I) p1[n-1] = p1[n] - w[n] y[n]

with ``w`` the trapezoid weights in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .drug import exp_coefficients
from .forward import ForwardProblem
from .model import ModelParams, TimeMesh, penalty_f1_prime, penalty_f2_prime


@dataclass
class AdjointTrajectory:
    p1: np.ndarray  # (nt + 1, nx, ny)
    p2: np.ndarray  # (nt + 1,)


def solve_p1(ytraj, s, problem: ForwardProblem, mask=None) -> np.ndarray:
    y = np.asarray(getattr(ytraj, "y", ytraj))
    mesh, solver = problem.mesh, problem.solver
    shifts = mesh.dt * np.asarray(problem.law(np.asarray(s)[1:]), dtype=float)
    w = mesh.trapezoid_weights()
    p1 = np.empty_like(y)
    p1[-1] = 0.0
    for n in range(mesh.nt, 0, -1):
        source = y[n] if mask is None else mask * y[n]
        p1[n - 1] = solver.solve(p1[n] - w[n] * source, shifts[n - 1])
    return p1


def p2_source(s, ytraj, p1, p: ModelParams, problem: ForwardProblem) -> np.ndarray:
    """Source ``g`` of the drug dual equation at nodes ``1..nt``.

    ``g = d'(s) (y, p1) - (f1'(s) + chi(s, t)) / eps`` with the penalty terms
    scaled by the fractional trapezoid weight of each node.
    """
    mesh, grid = problem.mesh, problem.grid
    s = np.asarray(s, dtype=float)
    y = np.asarray(getattr(ytraj, "y", ytraj))
    coupling = grid.cell_area * np.einsum("nij,nij->n", y[1:], p1[:-1])
    frac_upper = mesh.trapezoid_weights()[1:] / mesh.dt
    frac_lower = mesh.trapezoid_weights(mesh.node_index(p.t0))[1:] / mesh.dt
    penalty = frac_upper * penalty_f1_prime(s[1:], p.s_plus) + frac_lower * penalty_f2_prime(s[1:], p.s_minus)
    return np.asarray(problem.law.prime(s[1:])) * coupling - penalty / p.eps


def backward_exponential(g, M0: float, mesh: TimeMesh) -> np.ndarray:
    """Solve ``-q' + M0 q = g``, ``q(T) = 0`` with ``g`` constant on each interval.

    ``g[n]`` (length ``nt``) is the value on ``[t_n, t_{n+1}]``.
    """
    a, b = exp_coefficients(M0, mesh.dt)
    q = np.zeros(mesh.nt + 1)
    q[-2::-1] = lfilter([b], [1.0, -a], np.asarray(g, dtype=float)[::-1])
    return q


def solve_p2(s, ytraj, p1, p: ModelParams, problem: ForwardProblem) -> np.ndarray:
    """Dual drug variable at the nodes, ``p2[nt] = 0``.

    Each interval uses the source sampled at its right node, which is exactly
    where the forward step evaluates the reaction and penalty terms.
    """
    return backward_exponential(p2_source(s, ytraj, p1, p, problem), p.M0, problem.mesh)


def reduced_gradient(u, p2, lam: float) -> np.ndarray:
    """L2(0,T) gradient ``lam*u - p2`` on the control intervals.

    Interval ``n`` takes ``p2`` at its left node; that value already integrates
    the source over everything after ``t_n``.
    """
    u = np.asarray(u, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p2.shape != (u.size + 1,):
        raise ValueError("p2 must live on the nt + 1 mesh nodes")
    return lam * u - p2[:-1]


def solve_adjoint(ytraj, s, p: ModelParams, problem: ForwardProblem, mask=None) -> AdjointTrajectory:
    p1 = solve_p1(ytraj, s, problem, mask)
    return AdjointTrajectory(p1=p1, p2=solve_p2(s, ytraj, p1, p, problem))
