"""Scenario runners that turn the library into reproducible data tables.

Every runner takes a :class:`ScenarioConfig` and returns plain data
(:class:`SweepResult`, :class:`~openstirap.propagator.Trajectory`) that can be
written as CSV or JSON with the full configuration echoed in a header.
Sweep points are independent, so they are dispatched through
:func:`parallel_map`, which returns results in axis order regardless of
worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import golden

from .appendix import PRINTED, compiled_affine
from .propagator import IntegratorConfig, Trajectory, evolve_bloch, random_pure_state
from .spectral import BranchTrack, EPRecord, ep_scan, track_branches
from .stirap import CASES, ConstantCouplings, PulseSchedule, StirapGenerator, dark_bloch

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "SweepResult",
    "PointResult",
    "AOptResult",
    "PRESETS",
    "default_a_grid",
    "preset",
    "load_config",
    "parallel_map",
    "final_population",
    "dephasing_estimate",
    "run_closed_stirap",
    "run_evolve",
    "run_spectrum_scan",
    "run_imbalance_map",
    "run_open_sweep",
    "find_a_opt",
    "run_emission_assist",
    "run_coherent_decay_variant",
]

FORMATS = ("csv", "json")
SOURCES = ("compiled", "printed")
P3_RESOLUTION = 1e-4


class ConfigError(ValueError):
    """Invalid scenario configuration (reported as a usage error by the CLI)."""


def default_a_grid(n: int = 40, lo: float = 0.05, hi: float = 2.0) -> tuple[float, ...]:
    return tuple(float(x) for x in np.geomspace(lo, hi, n))


def _grid(values: Any) -> tuple[float, ...]:
    if np.ndim(values) == 0:
        return (float(values),)
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a runner needs; all fields have standard-run defaults.

    ``gamma`` and ``a`` are sorted grids (a single value is a grid of one).
    ``trajectory_a`` is the adiabaticity used for single-trajectory output.
    """

    case: str = "closed"
    g0: float = 1.0
    tau: float = 10.0
    sigma: float = 10.0
    delta: float = 0.0
    gamma: tuple[float, ...] = (0.0,)
    gamma2: float | None = None
    a: tuple[float, ...] = (1.0,)
    trajectory_a: float = 1.0
    t_span: tuple[float, float] = (-100.0, 100.0)
    samples: int = 1001
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    method: str = "DOP853"
    seed: int = 0
    source: str = "compiled"
    workers: int = 1
    out: str | None = None
    format: str = "csv"

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", _grid(self.gamma))
        object.__setattr__(self, "a", _grid(self.a))
        object.__setattr__(self, "t_span", tuple(float(t) for t in self.t_span))
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        for name in ("gamma", "a"):
            g = np.asarray(getattr(self, name))
            if g.size == 0:
                raise ConfigError(f"{name} grid is empty")
            if np.any(np.diff(g) <= 0):
                raise ConfigError(f"{name} grid must be strictly increasing")
        if min(self.gamma) < 0 or (self.gamma2 is not None and self.gamma2 < 0):
            raise ConfigError("loss rates must be non-negative")
        if min(self.a) <= 0 or self.trajectory_a <= 0:
            raise ConfigError("adiabaticity parameters must be positive")
        if len(self.t_span) != 2 or not self.t_span[0] < self.t_span[1]:
            raise ConfigError(f"t_span must be increasing, got {self.t_span}")
        if self.g0 <= 0 or self.sigma <= 0 or self.tau < 0:
            raise ConfigError("need g0 > 0, sigma > 0, tau >= 0")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.samples < 2 or self.workers < 1:
            raise ConfigError("samples must be >= 2 and workers >= 1")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}")

    def replace(self, **changes: Any) -> ScenarioConfig:
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def schedule(self, a: float) -> PulseSchedule:
        return PulseSchedule(self.g0, a, self.tau, self.sigma, self.delta)

    def integrator(self, a: float | None = None) -> IntegratorConfig:
        """Integrator settings; with ``a`` given, ``max_step`` is capped at a quarter pulse width.

        Without the cap an adaptive stepper can step clean over narrow pulses
        while the couplings are still negligible.
        """
        cfg = IntegratorConfig(self.rel_tol, self.abs_tol, method=self.method)
        return cfg if a is None else cfg.with_max_step(a * self.sigma / 4.0)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["gamma"] = list(self.gamma)
        d["a"] = list(self.a)
        d["t_span"] = list(self.t_span)
        return d


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(ScenarioConfig)}


def parse_grid(text: str) -> tuple[float, ...]:
    """Grid syntax: ``v1,v2,...``, ``lin:lo:hi:n`` or ``log:lo:hi:n``."""
    text = text.strip()
    try:
        if text.startswith(("lin:", "log:")):
            kind, lo, hi, n = text.split(":")
            space = np.linspace if kind == "lin" else np.geomspace
            return tuple(float(x) for x in space(float(lo), float(hi), int(n)))
        return tuple(float(_number(v)) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


def _number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def parse_setting(key: str, value: str) -> Any:
    """Convert a textual ``key = value`` pair into a config field value."""
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    kind = types[key]
    value = value.strip()
    try:
        if key in ("gamma", "a"):
            return parse_grid(value)
        if key == "t_span":
            lo, hi = (float(v) for v in value.split(","))
            return (lo, hi)
        if kind.startswith("float | None"):
            return None if value.lower() in ("", "none") else _number(value)
        if kind == "float":
            return _number(value)
        if kind == "int":
            return int(value)
        if kind.startswith("str | None"):
            return None if value.lower() in ("", "none") else value
        return value
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def load_config(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    changes = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        changes[key.replace("-", "_")] = parse_setting(key.replace("-", "_"), value)
    return (base or ScenarioConfig()).replace(**changes)


FIG7_GAMMAS = (0.0, 0.25, 0.5, 1.0, 2.0)

PRESETS: dict[str, dict[str, Any]] = {
    "fig2": {"case": "closed", "gamma": (0.0,), "a": default_a_grid(), "trajectory_a": 1.0},
    "fig4": {"case": "dephasing", "gamma": tuple(np.linspace(0.0, 20.0, 401))},
    "fig5": {"case": "emission", "gamma": tuple(np.linspace(0.0, 20.0, 401))},
    "fig6": {
        "case": "dephasing",
        "gamma": tuple(np.geomspace(0.01, 10.0, 31)),
        "t_span": (0.0, 20.0),
        "samples": 401,
    },
    "fig7": {"case": "dephasing", "gamma": FIG7_GAMMAS, "a": default_a_grid()},
    "fig8": {"case": "emission", "gamma": FIG7_GAMMAS, "a": default_a_grid()},
}


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ScenarioConfig(**PRESETS[name])


# --------------------------------------------------------------------------
# results and output


@dataclass(frozen=True)
class SweepResult:
    """A table: named columns, one row per axis point, plus metadata."""

    columns: tuple[str, ...]
    rows: list[tuple]
    metadata: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def select(self, **where: Any) -> SweepResult:
        idx = {k: self.columns.index(k) for k in where}
        rows = [r for r in self.rows if all(r[idx[k]] == v for k, v in where.items())]
        return SweepResult(self.columns, rows, self.metadata)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key} = {json.dumps(_jsonable(value))}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "metadata": _jsonable(self.metadata),
                "columns": list(self.columns),
                "rows": [dict(zip(self.columns, _jsonable(list(r)))) for r in self.rows],
            },
            indent=1,
        )

    def dump(self, fmt: str = "csv") -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def trajectory_table(traj: Trajectory, metadata: dict[str, Any]) -> SweepResult:
    return SweepResult(tuple(traj.columns()), [tuple(r) for r in traj.rows()], metadata)


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Ordered map, serial for ``workers == 1`` and a process pool otherwise."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# --------------------------------------------------------------------------
# single STIRAP run


@dataclass(frozen=True)
class PointResult:
    P3: float
    min_eigenvalue: float
    max_purity: float
    converged: bool


def final_population(
    cfg: ScenarioConfig,
    case: str,
    gamma: float,
    a: float,
    jump: np.ndarray | None = None,
) -> PointResult:
    """Final target population for one ``(case, gamma, a)``, starting in ``|1>``."""
    gen = StirapGenerator(case, gamma, cfg.schedule(a), gamma2=cfg.gamma2, jump=jump)
    n = max(2, int(round(cfg.t_span[1] - cfg.t_span[0])) + 1)
    traj = evolve_bloch(gen, dark_bloch(0.0), cfg.t_span, cfg.integrator(a), samples=n)
    return PointResult(
        float(traj.P3[-1]),
        float(traj.min_eigenvalues.min()),
        float(traj.purity.max()),
        traj.converged(),
    )


def _point_task(args: tuple) -> PointResult:
    return final_population(*args)


def _sweep(cfg: ScenarioConfig, case: str, gammas: Iterable[float], a_grid: Iterable[float], jump=None):
    tasks = [(cfg, case, float(g), float(a), jump) for g in gammas for a in a_grid]
    return tasks, parallel_map(_point_task, tasks, cfg.workers)


def dephasing_estimate(gamma: float, a: float, T: float, tau: float) -> float:
    """Weak-dephasing estimate ``1/3 + 2/3 exp(-3 gamma a T^2 / (4 tau))``."""
    return 1.0 / 3.0 + 2.0 / 3.0 * math.exp(-3.0 * gamma * a * T**2 / (4.0 * tau))


POINT_COLUMNS = ("case", "gamma", "a", "P3", "min_eigenvalue", "max_purity", "converged")


def _point_rows(tasks, results) -> list[tuple]:
    return [
        (case, g, a, r.P3, r.min_eigenvalue, r.max_purity, r.converged)
        for (_, case, g, a, _), r in zip(tasks, results)
    ]


# --------------------------------------------------------------------------
# runners


def run_closed_stirap(cfg: ScenarioConfig) -> tuple[Trajectory, SweepResult]:
    """Populations over time at ``trajectory_a`` and ``P3`` against the ``a`` grid."""
    if cfg.case != "closed":
        raise ConfigError("run_closed_stirap needs case = closed")
    traj = run_evolve(cfg.replace(gamma=(0.0,)))
    tasks, results = _sweep(cfg, "closed", (0.0,), cfg.a)
    return traj, SweepResult(POINT_COLUMNS, _point_rows(tasks, results), cfg.to_dict())


def run_evolve(cfg: ScenarioConfig) -> Trajectory:
    """One pulsed trajectory at ``trajectory_a`` and the first ``gamma``."""
    a = cfg.trajectory_a
    gen = StirapGenerator(cfg.case, cfg.gamma[0], cfg.schedule(a), gamma2=cfg.gamma2)
    traj = evolve_bloch(gen, dark_bloch(0.0), cfg.t_span, cfg.integrator(a), cfg.samples)
    traj.meta.update({"case": cfg.case, "gamma": cfg.gamma[0], "a": a})
    return traj


def _spectrum_builder(cfg: ScenarioConfig) -> Callable[[float], Any]:
    G = cfg.g0
    if cfg.source == "printed":
        if cfg.case not in PRINTED:
            raise ConfigError(f"no printed generator for case {cfg.case!r}")
        printed = PRINTED[cfg.case]
        return lambda g: printed(G, G, cfg.delta, g)
    return lambda g: compiled_affine(cfg.case, G, G, cfg.delta, g)


def run_spectrum_scan(cfg: ScenarioConfig) -> tuple[SweepResult, list[EPRecord], BranchTrack]:
    """Branch-tracked spectrum of the constant-coupling generator over the ``gamma`` grid.

    Couplings are ``G1 = G2 = g0``. The ``gamma`` grid should span more than
    one point. EP records are also placed in the table metadata.
    """
    if cfg.case not in ("dephasing", "emission"):
        raise ConfigError("spectrum scans need case = dephasing or emission")
    if len(cfg.gamma) < 2:
        raise ConfigError("spectrum scans need a gamma grid")
    builder = _spectrum_builder(cfg)
    track = track_branches(builder, cfg.gamma)
    eps = ep_scan(builder, cfg.gamma)
    meta = cfg.to_dict()
    meta["exceptional_points"] = [
        {
            "gamma": e.gamma_star,
            "kind": e.kind,
            "mu": e.mu_star,
            "overlap": e.overlap,
            "confirmed": e.confirmed,
        }
        for e in eps
    ]
    meta["ambiguous_intervals"] = track.ambiguous
    cols = ("gamma", "index", "re_mu", "im_mu", "condition", "physical_flag")
    return SweepResult(cols, list(track.rows()), meta), eps, track


def run_imbalance_map(cfg: ScenarioConfig) -> SweepResult:
    """``Z(t, gamma)`` for constant ``G1 = G2 = g0`` from a seeded random pure state."""
    if cfg.case != "dephasing":
        raise ConfigError("the imbalance map needs case = dephasing")
    R0 = random_pure_state(cfg.seed)
    sched = ConstantCouplings(cfg.g0, cfg.g0, cfg.delta)
    trajs = parallel_map(
        _imbalance_task, [(cfg, g, sched, R0) for g in cfg.gamma], cfg.workers
    )
    rows = [(g, float(t), float(z)) for g, tr in zip(cfg.gamma, trajs) for t, z in zip(tr.times, tr.Z)]
    zf = np.array([tr.Z[-1] for tr in trajs])
    meta = cfg.to_dict()
    meta["initial_state"] = R0
    meta["min_eigenvalue"] = min(float(tr.min_eigenvalues.min()) for tr in trajs)
    meta["final_Z"] = zf
    return SweepResult(("gamma", "t", "Z"), rows, meta)


def _imbalance_task(args) -> Trajectory:
    cfg, g, sched, R0 = args
    gen = StirapGenerator("dephasing", g, sched)
    return evolve_bloch(gen, R0, cfg.t_span, cfg.integrator(), cfg.samples)


def run_open_sweep(cfg: ScenarioConfig) -> SweepResult:
    """``P3(a; gamma)`` for every grid point.

    For dephasing, the weak-coupling estimate is added under both readings of
    its undefined time scale ``T``: the pulse width ``sigma`` and the pulse
    separation ``2 tau``.
    """
    if cfg.case not in ("dephasing", "emission", "closed"):
        raise ConfigError("open sweeps need case = dephasing or emission")
    tasks, results = _sweep(cfg, cfg.case, cfg.gamma, cfg.a)
    rows = _point_rows(tasks, results)
    cols = POINT_COLUMNS
    if cfg.case == "dephasing":
        cols = cols + ("estimate_T_sigma", "estimate_T_2tau")
        rows = [
            r
            + (
                dephasing_estimate(r[1], r[2], cfg.sigma, cfg.tau),
                dephasing_estimate(r[1], r[2], 2.0 * cfg.tau, cfg.tau),
            )
            for r in rows
        ]
    return SweepResult(cols, rows, cfg.to_dict())


@dataclass(frozen=True)
class AOptResult:
    gamma: float
    a_opt: float
    P3_opt: float
    clear_maximum: bool
    grid: tuple[float, ...]
    grid_P3: tuple[float, ...]


def find_a_opt(cfg: ScenarioConfig, gamma: float, resolution: float = P3_RESOLUTION) -> AOptResult:
    """Adiabaticity that maximizes the final ``P3`` under dephasing.

    A scan over ``cfg.a`` locates the best grid point; golden-section search
    in ``log a`` then refines it within the neighbouring grid bracket. When the
    best value does not beat both grid ends by ``resolution``, or sits on an
    end, ``clear_maximum`` is False and the best grid point is returned.
    """
    if cfg.case != "dephasing":
        raise ConfigError("find_a_opt needs case = dephasing")
    if len(cfg.a) < 3:
        raise ConfigError("find_a_opt needs an a grid of at least three points")
    tasks, results = _sweep(cfg, "dephasing", (gamma,), cfg.a)
    p3 = np.array([r.P3 for r in results])
    k = int(np.argmax(p3))
    grid = tuple(cfg.a)
    interior = 0 < k < len(p3) - 1
    if not interior or p3[k] - max(p3[0], p3[-1]) < resolution:
        return AOptResult(gamma, grid[k], float(p3[k]), False, grid, tuple(p3))

    def neg(log_a: float) -> float:
        return -final_population(cfg, "dephasing", gamma, math.exp(log_a)).P3

    brack = (math.log(grid[k - 1]), math.log(grid[k]), math.log(grid[k + 1]))
    x, fx, _ = golden(neg, brack=brack, tol=1e-3, full_output=True)
    a_opt, best = math.exp(x), -fx
    if best < p3[k]:
        a_opt, best = grid[k], float(p3[k])
    return AOptResult(gamma, a_opt, best, True, grid, tuple(p3))


def a_opt_table(cfg: ScenarioConfig) -> SweepResult:
    rows = []
    for g in cfg.gamma:
        r = find_a_opt(cfg, g)
        rows.append((g, r.a_opt, r.P3_opt, r.clear_maximum))
    return SweepResult(("gamma", "a_opt", "P3_opt", "clear_maximum"), rows, cfg.to_dict())


def run_emission_assist(cfg: ScenarioConfig) -> SweepResult:
    """``P3(a; gamma)`` under emission with the gain over the lossless run at the same ``a``."""
    if cfg.case != "emission":
        raise ConfigError("run_emission_assist needs case = emission")
    gammas = tuple(sorted(set(cfg.gamma) | {0.0}))
    tasks, results = _sweep(cfg, "emission", gammas, cfg.a)
    ref = {t[3]: r.P3 for t, r in zip(tasks, results) if t[2] == 0.0}
    rows = [row + (row[3] - ref[row[2]],) for row in _point_rows(tasks, results)]
    return SweepResult(POINT_COLUMNS + ("gain",), rows, cfg.to_dict())


def run_coherent_decay_variant(cfg: ScenarioConfig, jump: np.ndarray | None = None) -> SweepResult:
    """The emission comparison with a single coherent jump instead of two incoherent ones.

    Each row holds ``P3`` for the coherent jump, the incoherent pair and the
    lossless system at the same ``(gamma, a)``.
    """
    if jump is not None and np.shape(jump) != (3, 3):
        raise ValueError(f"jump operator must be 3x3, got shape {np.shape(jump)}")
    tasks, coh = _sweep(cfg, "coherent", cfg.gamma, cfg.a, jump)
    _, inc = _sweep(cfg, "emission", cfg.gamma, cfg.a)
    _, closed = _sweep(cfg, "closed", (0.0,), cfg.a)
    ref = {a: r.P3 for a, r in zip(cfg.a, closed)}
    rows = [
        (t[2], t[3], c.P3, i.P3, ref[t[3]], c.min_eigenvalue, c.converged)
        for t, c, i in zip(tasks, coh, inc)
    ]
    cols = ("gamma", "a", "P3_coherent", "P3_incoherent", "P3_closed", "min_eigenvalue", "converged")
    meta = cfg.to_dict()
    meta["jump"] = "default |1><2| + |3><2|" if jump is None else np.asarray(jump).tolist()
    return SweepResult(cols, rows, meta)
