"""Fixed-step gradient descent on the penalized objective."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .model import TimeMesh
from .problem import ControlProblem, Evaluation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterateRecord:
    k: int
    J: float
    J_eps: float
    penalty1: float
    penalty2: float
    grad_norm: float
    max_violation_upper: float
    max_violation_lower: float

    FIELDS = ("k", "J", "J_eps", "penalty1", "penalty2", "grad_norm",
              "max_violation_upper", "max_violation_lower")

    def as_dict(self) -> dict:
        return asdict(self)


class DivergenceError(RuntimeError):
    """The penalized objective rose on several consecutive iterations."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass
class OptimizationResult:
    u: np.ndarray
    best: Evaluation
    records: list[IterateRecord]
    best_k: int
    stop_reason: str
    final: Evaluation = field(repr=False, default=None)

    @property
    def J_eps(self) -> np.ndarray:
        return np.array([r.J_eps for r in self.records])


def _record(k: int, problem: ControlProblem, ev: Evaluation) -> IterateRecord:
    obj = ev.objective
    upper, lower = problem.violations(ev.s)
    return IterateRecord(k=k, J=obj.J, J_eps=obj.J_eps, penalty1=obj.penalty1, penalty2=obj.penalty2,
                         grad_norm=problem.norm(ev.gradient),
                         max_violation_upper=upper, max_violation_lower=lower)


def run(problem: ControlProblem, u0, delta: float | None = None, N: int | None = None,
        tol: float | None = None, grad_tol: float = 0.0, clamp_nonnegative: bool = False,
        max_increases: int = 3, callback: Callable[[IterateRecord], None] | None = None) -> OptimizationResult:
    """Iterate ``u <- u - delta (lam u - p2)`` until ``N`` steps or stagnation.

    The loop stops when the decrease of ``J_eps`` between two iterates is
    non-negative and below ``tol * J_eps(u0)``, or when the gradient norm is at
    most ``grad_tol``. ``delta``, ``N`` and ``tol`` default to the model
    parameters. The lowest-``J_eps`` iterate is returned.
    """
    p = problem.p
    delta = p.step if delta is None else delta
    N = p.N if N is None else N
    tol = p.tol if tol is None else tol

    u = np.array(u0, dtype=float)
    if clamp_nonnegative:
        u = np.maximum(u, 0.0)
    records: list[IterateRecord] = []
    best, best_k, prev = None, 0, None
    increases = 0
    abs_tol = None
    stop_reason = "max_iterations"
    for k in range(N + 1):
        try:
            ev = problem.evaluate(u)
        except FloatingPointError as exc:
            raise DivergenceError(f"iterate {k} is not computable ({exc}); try a smaller delta than {delta:g}",
                                  records) from exc
        rec = _record(k, problem, ev)
        records.append(rec)
        if callback is not None:
            callback(rec)
        log.info("iter %d J_eps=%.10g J=%.10g |grad|=%.3e", k, rec.J_eps, rec.J, rec.grad_norm)
        if best is None or rec.J_eps < best.objective.J_eps:
            best, best_k = ev, k
        if abs_tol is None:
            abs_tol = tol * rec.J_eps

        if prev is not None:
            decrease = prev.J_eps - rec.J_eps
            if decrease < 0:
                increases += 1
                if increases >= max_increases:
                    raise DivergenceError(
                        f"J_eps increased on {increases} consecutive iterations "
                        f"(last {prev.J_eps:.6g} -> {rec.J_eps:.6g}); try a smaller delta than {delta:g}",
                        records)
            else:
                increases = 0
                if decrease < abs_tol:
                    stop_reason = "stagnation"
                    break
        if rec.grad_norm <= grad_tol:
            stop_reason = "gradient"
            break
        if k == N:
            break
        prev = rec
        u = u - delta * ev.gradient
        if clamp_nonnegative:
            u = np.maximum(u, 0.0)

    return OptimizationResult(u=best.u, best=best, records=records, best_k=best_k,
                              stop_reason=stop_reason, final=ev)


def dosing_init(mesh: TimeMesh, dose_rate: float, window: float, period: float,
                rtol: float = 1e-9) -> np.ndarray:
    """``dose_rate`` during the first ``window`` of every ``period``, else zero."""
    if not (0 < window <= period):
        raise ValueError("need 0 < window <= period")
    dt = mesh.dt
    n_window, n_period = window / dt, period / dt
    if abs(n_window - round(n_window)) > rtol * n_window or round(n_window) < 1:
        raise ValueError(f"dosing window {window} is not a multiple of dt={dt}; use a finer nt")
    if abs(n_period - round(n_period)) > rtol * n_period:
        raise ValueError(f"dosing period {period} is not a multiple of dt={dt}")
    n_window, n_period = int(round(n_window)), int(round(n_period))
    if mesh.nt % n_period:
        raise ValueError("dosing period must divide the horizon")
    phase = np.arange(mesh.nt) % n_period
    return np.where(phase < n_window, float(dose_rate), 0.0)
