"""Scenario configuration: defaults, presets, file parsing and unit conversion.

Config files are either JSON (flat, or nested one level deep by section) or
plain ``key = value`` lines with ``#`` comments. Values on ``key = value``
lines are read as JSON when possible, otherwise as bare strings.

Keys with a unit suffix are converted to days/cm on ingestion:

    k_cm2_per_s        -> k (cm^2/day)
    dose_rate_per_s    -> dose_rate (1/day)
    dose_window_hours  -> dose_window (day)
    dose_period_hours  -> dose_period (day)
    s_c                -> s_m
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .model import SECONDS_PER_DAY, Grid, ModelParams, TimeMesh, reference_constant_control
from .forward import initial_condition, max_stable_dt

SEED_CONTROLS = ("zero", "dosing", "constant-feasible")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    # model constants
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
    grad_tol: float = 0.0
    growth: str = "linear"
    growth_table: tuple = ()
    # geometry and discretization
    nx: int = 61
    ny: int | None = None
    L: float = 3.0
    k: float = 2.5e-9 * SECONDS_PER_DAY
    nt: int = 2688
    backend: str = "auto"
    tumor_diameter: float = 1.0
    edge_width: float = 0.0
    track_box: tuple | None = None
    # initial control
    seed_control: str = "dosing"
    dose_rate: float = 0.00014 * SECONDS_PER_DAY
    dose_window: float = 1.0 / 24.0
    dose_period: float = 1.0
    clamp_nonnegative: bool = False
    # output
    snapshot_times: tuple = (0.0, 7.0, 14.0, 21.0, 28.0)

    def __post_init__(self):
        for name in ("growth_table", "snapshot_times"):
            v = getattr(self, name)
            object.__setattr__(self, name, tuple(tuple(x) if isinstance(x, list) else x for x in v))
        if self.track_box is not None:
            object.__setattr__(self, "track_box", tuple(float(x) for x in self.track_box))
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg} (got {getattr(self, key)!r})")

        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for key in ("nx", "nt"):
            if int(getattr(self, key)) < 1:
                bad(key, "must be a positive integer")
        if self.ny is not None and self.ny < 1:
            bad("ny", "must be a positive integer")
        for key in ("L", "k", "tumor_diameter", "dose_window", "dose_period"):
            if not getattr(self, key) > 0:
                bad(key, "must be positive")
        if self.tumor_diameter + self.edge_width > self.L:
            bad("tumor_diameter", "tumour disc does not fit in the domain")
        if self.seed_control not in SEED_CONTROLS:
            bad("seed_control", f"must be one of {SEED_CONTROLS}")
        if self.backend not in ("auto", "spectral", "direct", "cg"):
            bad("backend", "must be auto, spectral, direct or cg")
        if self.track_box is not None and len(self.track_box) != 4:
            bad("track_box", "expects [x_min, x_max, y_min, y_max]")
        for t in self.snapshot_times:
            if not 0 <= t <= self.T:
                bad("snapshot_times", f"time {t} outside [0, T]")
        if self.T / self.nt >= max_stable_dt(self.params().law):
            bad("nt", "time step too large: dt * sup d(s) must stay below 1")

    # -- derived objects -------------------------------------------------

    def params(self) -> ModelParams:
        return ModelParams(M0=self.M0, lam=self.lam, eps=self.eps, s_minus=self.s_minus,
                           s_plus=self.s_plus, s_m=self.s_m, t0=self.t0, T=self.T, rho=self.rho,
                           delta=self.delta, N=self.N, tol=self.tol, growth=self.growth,
                           growth_table=self.growth_table)

    def grid(self) -> Grid:
        return Grid.uniform(self.nx, self.L, self.k, ny=self.ny)

    def mesh(self) -> TimeMesh:
        return TimeMesh(self.T, self.nt)

    def y0(self, grid: Grid | None = None) -> np.ndarray:
        return initial_condition(grid or self.grid(), self.tumor_diameter, edge_width=self.edge_width)

    def mask(self, grid: Grid | None = None):
        if self.track_box is None:
            return None
        grid = grid or self.grid()
        x0, x1, y0, y1 = self.track_box
        mx = (grid.x >= x0) & (grid.x <= x1)
        my = (grid.y >= y0) & (grid.y <= y1)
        return (mx[:, None] & my[None, :]).astype(float)

    def initial_control(self, kind: str | None = None) -> np.ndarray:
        from .optimizer import dosing_init

        kind = kind or self.seed_control
        mesh = self.mesh()
        if kind == "zero":
            return np.zeros(mesh.nt)
        if kind == "dosing":
            return dosing_init(mesh, self.dose_rate, self.dose_window, self.dose_period)
        if kind == "constant-feasible":
            return reference_constant_control(self.params(), mesh)
        raise ConfigError(f"seed_control: unknown kind {kind!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["growth_table"] = [list(r) for r in self.growth_table]
        d["snapshot_times"] = list(self.snapshot_times)
        d["track_box"] = None if self.track_box is None else list(self.track_box)
        return d

    def with_updates(self, **kw) -> "Scenario":
        return replace(self, **normalize_keys(kw))


PRESETS = {
    "reference": {},
    "zero-control": {"seed_control": "zero"},
    "coarse": {"nx": 31, "nt": 672},
}

PRESET_ALIASES = {"paper-sec6": "reference"}

_UNIT_KEYS = {
    "k_cm2_per_s": ("k", SECONDS_PER_DAY),
    "dose_rate_per_s": ("dose_rate", SECONDS_PER_DAY),
    "dose_window_hours": ("dose_window", 1.0 / 24.0),
    "dose_period_hours": ("dose_period", 1.0 / 24.0),
}
_ALIASES = {"s_c": "s_m", "lambda": "lam", "n": "nx"}
_FIELDS = {f.name for f in fields(Scenario)}


def normalize_keys(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if key in _UNIT_KEYS:
            name, factor = _UNIT_KEYS[key]
            out[name] = float(value) * factor
            continue
        key = _ALIASES.get(key, key)
        if key not in _FIELDS:
            raise ConfigError(f"{key}: unknown configuration key")
        out[key] = value
    return out


def _flatten(data: dict) -> dict:
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def parse_text(text: str) -> dict:
    """Parse ``key = value`` lines or a JSON document into a flat dict."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return _flatten(json.loads(stripped))
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value.strip("\"'")
    return out


def load_scenario(path: str | Path | None = None, preset: str | None = None, **overrides) -> Scenario:
    values = {}
    if preset is not None:
        preset = PRESET_ALIASES.get(preset, preset)
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        values.update(normalize_keys(parse_text(Path(path).read_text())))
    values.update(normalize_keys(overrides))
    try:
        return Scenario(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_scenario(sc: Scenario) -> str:
    return json.dumps(sc.to_dict(), indent=2, sort_keys=True) + "\n"
