"""Drug concentration ODE ``s' + M0 s = u``, ``s(0) = 0``.

The control is piecewise constant on the time mesh, so each interval is
integrated exactly with the exponential update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .model import ModelParams, TimeMesh


class BoundViolation(ValueError):
    """An a-priori estimate on the drug concentration failed."""


def _check_control(u, mesh: TimeMesh) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.nt,):
        raise ValueError(f"control has shape {u.shape}, mesh expects ({mesh.nt},)")
    return u


def exp_coefficients(M0: float, dt: float) -> tuple[float, float]:
    """Return ``(exp(-M0 dt), (1 - exp(-M0 dt)) / M0)``."""
    return math.exp(-M0 * dt), -math.expm1(-M0 * dt) / M0


def solve_s(u, p: ModelParams, mesh: TimeMesh) -> np.ndarray:
    """Drug concentration at the ``nt + 1`` mesh nodes."""
    u = _check_control(u, mesh)
    a, b = exp_coefficients(p.M0, mesh.dt)
    s = np.zeros(mesh.nt + 1)
    s[1:] = lfilter([b], [1.0, -a], u)
    return s


def convolution_oracle(u, p: ModelParams, mesh: TimeMesh, t: float) -> float:
    """Evaluate ``int_0^t exp(-M0 (t - tau)) u(tau) dtau`` interval by interval."""
    u = _check_control(u, mesh)
    if not (0.0 <= t <= mesh.T * (1 + 1e-14)):
        raise ValueError(f"t={t} outside [0, {mesh.T}]")
    left = mesh.dt * np.arange(mesh.nt)
    right = np.minimum(left + mesh.dt, t)
    active = left < t
    lo, hi, uu = left[active], right[active], u[active]
    # exp(-M0 (t - hi)) - exp(-M0 (t - lo)), written to avoid cancellation
    vals = np.exp(-p.M0 * (t - hi)) * -np.expm1(-p.M0 * (hi - lo))
    return float(np.sum(uu * vals) / p.M0)


def l2_norm_control(u, mesh: TimeMesh) -> float:
    u = np.asarray(u, dtype=float)
    return math.sqrt(mesh.dt * float(np.dot(u, u)))


def l2_norm_nodes(v, mesh: TimeMesh) -> float:
    v = np.asarray(v, dtype=float)
    return math.sqrt(float(np.dot(mesh.trapezoid_weights(), v * v)))


@dataclass(frozen=True)
class BoundsReport:
    pointwise_slack: float
    l2_slack: float
    derivative_slack: float

    @property
    def ok(self) -> bool:
        return min(self.pointwise_slack, self.l2_slack, self.derivative_slack) >= 0.0


def verify_bounds(u, s, p: ModelParams, mesh: TimeMesh, rtol: float = 1e-12) -> BoundsReport:
    """Check the three a-priori estimates of ``s`` in terms of ``||u||``.

    Raises ``BoundViolation`` naming the first failed estimate; the slacks in the
    report are ``rhs - lhs`` (a pointwise minimum for the first bound).
    """
    u = _check_control(u, mesh)
    s = np.asarray(s, dtype=float)
    unorm = l2_norm_control(u, mesh)

    t = mesh.times
    rhs_point = np.sqrt(t) * unorm
    point_slack = float(np.min(rhs_point - np.abs(s)))
    if np.any(np.abs(s) > rhs_point * (1 + rtol)):
        n = int(np.argmax(np.abs(s) - rhs_point))
        raise BoundViolation(f"|s(t)| <= sqrt(t)*||u|| fails at t={t[n]}: {abs(s[n])} > {rhs_point[n]}")

    snorm = l2_norm_nodes(s, mesh)
    if snorm > mesh.T * unorm * (1 + rtol):
        raise BoundViolation(f"||s|| <= T*||u|| fails: {snorm} > {mesh.T * unorm}")

    # s' = u - M0 s is discontinuous at the nodes; integrate each interval separately
    left = u - p.M0 * s[:-1]
    right = u - p.M0 * s[1:]
    dnorm = math.sqrt(0.5 * mesh.dt * float(np.dot(left, left) + np.dot(right, right)))
    dbound = (1 + p.M0 * mesh.T) * unorm
    if dnorm > dbound * (1 + rtol):
        raise BoundViolation(f"||s'|| <= (1+M0*T)*||u|| fails: {dnorm} > {dbound}")

    return BoundsReport(point_slack, mesh.T * unorm - snorm, dbound - dnorm)
