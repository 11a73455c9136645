"""Model constants, growth law, penalty terms and mesh types.

All quantities are in days and centimetres. Unit conversion from per-second
inputs happens once, when a configuration is read (see ``tumor_control.config``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class GrowthLaw:
    """Reaction rate ``d(s)`` of the tumour density as a function of drug level.

    ``kind="linear"`` gives ``d(s) = rho * (1 - s / s_m)``. ``kind="table"``
    interpolates the knots ``table_s``/``table_d`` piecewise linearly and
    extrapolates with the end slopes.
    """

    kind: str = "linear"
    rho: float = 0.1
    s_m: float = 0.2
    table_s: tuple[float, ...] = ()
    table_d: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "linear":
            if not (self.rho > 0 and self.s_m > 0):
                raise ValueError("linear growth law needs rho > 0 and s_m > 0")
        elif self.kind == "table":
            s = np.asarray(self.table_s, dtype=float)
            d = np.asarray(self.table_d, dtype=float)
            if s.ndim != 1 or s.shape != d.shape or s.size < 2:
                raise ValueError("table growth law needs two equal-length knot lists (>= 2 knots)")
            if np.any(np.diff(s) <= 0):
                raise ValueError("table knots must be strictly increasing in s")
            self._validate_sign()
        else:
            raise ValueError(f"unknown growth law kind {self.kind!r}")

    @classmethod
    def from_table(cls, s_knots, d_knots, s_m: float) -> "GrowthLaw":
        return cls(kind="table", rho=float(np.max(np.abs(d_knots))), s_m=float(s_m),
                   table_s=tuple(float(v) for v in s_knots),
                   table_d=tuple(float(v) for v in d_knots))

    def _validate_sign(self):
        s = np.asarray(self.table_s)
        lo, hi = min(s[0], self.s_m) - 2.0, max(s[-1], self.s_m) + 2.0
        probe = np.concatenate([s, 0.5 * (s[1:] + s[:-1]), np.linspace(lo, hi, 2001)])
        probe = probe[np.abs(probe - self.s_m) > 1e-12]
        if np.any(self(probe) * (probe - self.s_m) >= 0):
            raise ValueError("growth law violates d(s)(s - s_m) < 0 for s != s_m")

    def _slopes(self):
        s = np.asarray(self.table_s)
        d = np.asarray(self.table_d)
        return np.diff(d) / np.diff(s)

    def __call__(self, s):
        if self.kind == "linear":
            return self.rho * (1.0 - np.asarray(s, dtype=float) / self.s_m)
        s_knots = np.asarray(self.table_s)
        d_knots = np.asarray(self.table_d)
        slopes = self._slopes()
        x = np.asarray(s, dtype=float)
        out = np.interp(x, s_knots, d_knots)
        out = np.where(x < s_knots[0], d_knots[0] + slopes[0] * (x - s_knots[0]), out)
        out = np.where(x > s_knots[-1], d_knots[-1] + slopes[-1] * (x - s_knots[-1]), out)
        return out if out.ndim else float(out)

    def prime(self, s):
        """Derivative ``d'(s)``; raises at table knots where it does not exist."""
        if self.kind == "linear":
            x = np.asarray(s, dtype=float)
            out = np.full(x.shape, -self.rho / self.s_m)
            return out if out.ndim else float(out)
        x = np.asarray(s, dtype=float)
        knots = np.asarray(self.table_s)
        slopes = self._slopes()
        # end knots are smooth: extrapolation continues the end segments
        kinks = knots[1:-1][np.diff(slopes) != 0]
        if kinks.size and np.isclose(x[..., None], kinks, rtol=0.0, atol=1e-14).any():
            raise ValueError("growth law is not differentiable at a table knot")
        idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, slopes.size - 1)
        out = slopes[idx]
        return out if out.ndim else float(out)

    def lipschitz(self, a: float | None = None) -> float:
        """Lipschitz constant of ``d`` on ``|s| <= a`` (global for both kinds)."""
        if self.kind == "linear":
            return self.rho / self.s_m
        return float(np.max(np.abs(self._slopes())))


def d_eval(law: GrowthLaw, s):
    return law(s)


def d_prime(law: GrowthLaw, s):
    return law.prime(s)


def penalty_f1(s, s_plus):
    """Upper-bound violation ``(s - s_plus)^2`` where ``s > s_plus``."""
    excess = np.maximum(np.asarray(s, dtype=float) - s_plus, 0.0)
    return excess * excess


def penalty_f2(s, s_minus):
    """Lower-bound violation ``(s - s_minus)^2`` where ``s < s_minus``."""
    deficit = np.minimum(np.asarray(s, dtype=float) - s_minus, 0.0)
    return deficit * deficit


def penalty_f1_prime(s, s_plus):
    return 2.0 * np.maximum(np.asarray(s, dtype=float) - s_plus, 0.0)


def penalty_f2_prime(s, s_minus):
    return 2.0 * np.minimum(np.asarray(s, dtype=float) - s_minus, 0.0)


def chi_eval(s, t, t0, s_minus):
    """``f2'(s)`` once the lower constraint is active (``t >= t0``), else 0."""
    return np.where(np.asarray(t) >= t0, penalty_f2_prime(s, s_minus), 0.0)


@dataclass(frozen=True)
class ModelParams:
    """Scalar constants of the control problem.

    ``tol`` is relative: the optimizer stops once the decrease of the penalized
    objective falls below ``tol * J_eps(u0)``. ``delta=None`` means ``0.03 / lam``.
    """

    M0: float = 0.5
    lam: float = 2.0
    eps: float = 0.2
    s_minus: float = 0.4
    s_plus: float = 0.8
    s_m: float = 0.2
    t0: float = 7.0
    T: float = 28.0
    rho: float = 0.1
    delta: float | None = None
    N: int = 10
    tol: float = 1e-6
    growth: str = "linear"
    growth_table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not (0 < self.s_minus < self.s_plus):
            raise ValueError(f"need 0 < s_minus < s_plus, got {self.s_minus}, {self.s_plus}")
        if not (0 < self.t0 <= self.T):
            raise ValueError(f"need 0 < t0 <= T, got t0={self.t0}, T={self.T}")
        for name in ("eps", "lam", "M0", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if self.growth == "table" and not self.growth_table:
            raise ValueError("growth='table' needs growth_table knots")

    @property
    def step(self) -> float:
        return self.delta if self.delta is not None else 0.03 / self.lam

    @property
    def law(self) -> GrowthLaw:
        if self.growth == "table":
            s, d = zip(*self.growth_table)
            return GrowthLaw.from_table(s, d, self.s_m)
        return GrowthLaw(kind="linear", rho=self.rho, s_m=self.s_m)

    @property
    def feasible(self) -> bool:
        return check_feasibility(self).feasible


@dataclass(frozen=True)
class FeasibilityReport:
    lhs: float
    rhs: float

    @property
    def feasible(self) -> bool:
        return self.lhs <= self.rhs

    def __str__(self):
        verdict = "feasible" if self.feasible else "infeasible"
        return (f"(1-exp(-M0*T))/(1-exp(-M0*t0)) * s_minus = {self.lhs:.10g} "
                f"{'<=' if self.feasible else '>'} s_plus = {self.rhs:.10g}: {verdict}")


def check_feasibility(p: ModelParams) -> FeasibilityReport:
    """Test whether a constant dose can keep ``s`` inside the drug window."""
    ratio = math.expm1(-p.M0 * p.T) / math.expm1(-p.M0 * p.t0)
    return FeasibilityReport(lhs=ratio * p.s_minus, rhs=p.s_plus)


def reference_constant_control(p: ModelParams, mesh: "TimeMesh") -> np.ndarray:
    """Constant dose rate whose drug level reaches ``s_minus`` exactly at ``t0``."""
    report = check_feasibility(p)
    if not report.feasible:
        raise ValueError(f"no admissible constant control: {report}")
    rate = -p.M0 * p.s_minus / math.expm1(-p.M0 * p.t0)
    return np.full(mesh.nt, rate)


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on ``[0, L]^2``; only interior nodes carry unknowns.

    ``k_field`` holds the diffusivity (cm^2/day) at each interior node, shape
    ``(nx, ny)``. Boundary values of the tumour density are zero.
    """

    nx: int
    ny: int
    L: float
    k_field: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or not self.L > 0:
            raise ValueError("grid needs nx, ny >= 1 and L > 0")
        k = np.asarray(self.k_field, dtype=float)
        if k.ndim == 0:
            k = np.full((self.nx, self.ny), float(k))
        if k.shape != (self.nx, self.ny):
            raise ValueError(f"k_field shape {k.shape} != {(self.nx, self.ny)}")
        if not np.all(np.isfinite(k)) or np.any(k <= 0):
            raise ValueError("diffusion coefficient must be positive everywhere")
        k.setflags(write=False)
        object.__setattr__(self, "k_field", k)

    @classmethod
    def uniform(cls, n: int, L: float, k: float, ny: int | None = None) -> "Grid":
        return cls(nx=n, ny=n if ny is None else ny, L=L, k_field=np.asarray(k, dtype=float))

    @property
    def hx(self) -> float:
        return self.L / (self.nx + 1)

    @property
    def hy(self) -> float:
        return self.L / (self.ny + 1)

    @property
    def h(self) -> float:
        return self.hx

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def k0(self) -> float:
        return float(self.k_field.min())

    @property
    def k1(self) -> float:
        return float(self.k_field.max())

    @property
    def uniform_k(self) -> bool:
        return self.k0 == self.k1

    @property
    def x(self) -> np.ndarray:
        return self.hx * np.arange(1, self.nx + 1)

    @property
    def y(self) -> np.ndarray:
        return self.hy * np.arange(1, self.ny + 1)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Cell-sum quadrature of the L2(Omega) inner product."""
        return self.cell_area * float(np.vdot(a, b))

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(self.inner(a, a))


@dataclass(frozen=True)
class TimeMesh:
    """Uniform partition of ``[0, T]`` into ``nt`` steps."""

    T: float
    nt: int

    def __post_init__(self):
        if self.nt < 1 or not self.T > 0:
            raise ValueError("time mesh needs nt >= 1 and T > 0")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    def node_index(self, t: float) -> int:
        """Nearest mesh node to ``t``; always within ``dt/2``."""
        if not (0.0 <= t <= self.T):
            raise ValueError(f"time {t} outside [0, {self.T}]")
        return int(round(t / self.dt))

    def trapezoid_weights(self, start: int = 0) -> np.ndarray:
        """Node weights of the composite trapezoid rule on ``[t_start, T]``."""
        w = np.zeros(self.nt + 1)
        if start >= self.nt:
            return w
        w[start:] = self.dt
        w[start] *= 0.5
        w[-1] *= 0.5
        return w
