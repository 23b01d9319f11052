"""Time integration of Bloch and density-matrix dynamics.

:func:`evolve_bloch` integrates ``dR/dt = M(t) R + b(t)``; :func:`evolve_density`
integrates the master equation for ``rho`` directly and is used as an
independent check of the Bloch route. Both use scipy's adaptive embedded
Runge-Kutta integrators with dense output at the requested sample times.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .bloch import _project, dimension_from_length, from_bloch, gellmann_basis, purity, to_bloch
from .liouvillian import LindbladModel, LiouvillianAffine, superoperator_apply
from .spectral import eigendecompose, liouvillian_gap

__all__ = [
    "IntegrationError",
    "StiffnessError",
    "IntegratorConfig",
    "Observables",
    "Trajectory",
    "observables",
    "evolve_bloch",
    "evolve_density",
    "random_pure_state",
]


class IntegrationError(RuntimeError):
    pass


class StiffnessError(IntegrationError):
    """Step size collapsed; carries the failure time and the local gap."""

    def __init__(self, t: float, gap: float, spectral_radius: float, message: str = "") -> None:
        self.t = t
        self.gap = gap
        self.spectral_radius = spectral_radius
        super().__init__(
            f"step size underflow at t={t:.6g} (Liouvillian gap {gap:.3g}, "
            f"spectral radius {spectral_radius:.3g}); the problem is likely stiff. {message}"
        )


@dataclass(frozen=True)
class IntegratorConfig:
    # Tight defaults: near-pure states sit on the Bloch-ball boundary, and looser
    # tolerances let purity overshoot 1 by ~1e-6 over a full pulse sequence.
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float = np.inf
    initial_step: float | None = None
    method: str = "DOP853"

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")

    def with_max_step(self, max_step: float) -> IntegratorConfig:
        return IntegratorConfig(
            self.rel_tol, self.abs_tol, min(self.max_step, max_step), self.initial_step, self.method
        )

    def solver_kwargs(self) -> dict[str, Any]:
        kw: dict[str, Any] = {
            "method": self.method,
            "rtol": self.rel_tol,
            "atol": self.abs_tol,
            "max_step": self.max_step,
        }
        if self.initial_step is not None:
            kw["first_step"] = self.initial_step
        return kw


class Observables(NamedTuple):
    P1: float
    P2: float
    P3: float
    Z: float
    purity: float


def observables(R: np.ndarray) -> Observables:
    """Bare-state populations, imbalance ``P1 - P3`` and purity."""
    p = np.real(np.diag(from_bloch(R)))
    return Observables(float(p[0]), float(p[1]), float(p[2]), float(p[0] - p[2]), purity(R))


TRAJECTORY_COLUMNS = ("P1", "P2", "P3", "Z", "purity")


@dataclass(frozen=True)
class Trajectory:
    """Sampled Bloch trajectory. ``states`` has shape ``(len(times), D**2 - 1)``."""

    times: np.ndarray
    states: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    @functools.cached_property
    def _densities(self) -> np.ndarray:
        basis = gellmann_basis(dimension_from_length(self.states.shape[1]))
        return np.array([from_bloch(R, basis) for R in self.states])

    @functools.cached_property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("kii->ki", self._densities))

    @property
    def P1(self) -> np.ndarray:
        return self.populations[:, 0]

    @property
    def P2(self) -> np.ndarray:
        return self.populations[:, 1]

    @property
    def P3(self) -> np.ndarray:
        return self.populations[:, 2]

    @property
    def Z(self) -> np.ndarray:
        return self.P1 - self.P3

    @property
    def purity(self) -> np.ndarray:
        D = self._densities.shape[1]
        return 1.0 / D + (D - 1) / D * np.einsum("ki,ki->k", self.states, self.states)

    @functools.cached_property
    def min_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._densities)[:, 0]

    @property
    def final(self) -> Observables:
        return observables(self.states[-1])

    def converged(self, window: float = 10.0, tol: float = 1e-6) -> bool:
        """``|P3(t_f) - P3(t_f - window)| < tol``."""
        k = int(np.searchsorted(self.times, self.times[-1] - window))
        k = min(k, len(self.times) - 1)
        return bool(abs(self.P3[-1] - self.P3[k]) < tol)

    def columns(self) -> list[str]:
        n = self.states.shape[1]
        return ["t", *(f"r{i + 1}" for i in range(n)), *TRAJECTORY_COLUMNS]

    def rows(self):
        obs = np.column_stack([self.P1, self.P2, self.P3, self.Z, self.purity])
        for t, R, o in zip(self.times, self.states, obs):
            yield [float(t), *map(float, R), *map(float, o)]

    def to_csv(self, fh: io.TextIOBase | None = None) -> str | None:
        own = fh is None
        fh = io.StringIO() if own else fh
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.columns())
        for row in self.rows():
            writer.writerow([repr(x) for x in row])
        return fh.getvalue() if own else None


def _sample_times(t_span: tuple[float, float], samples: int | np.ndarray) -> np.ndarray:
    t0, t1 = map(float, t_span)
    if not t0 < t1:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    if np.ndim(samples) == 0:
        return np.linspace(t0, t1, int(samples))
    t_eval = np.asarray(samples, dtype=float)
    if t_eval[0] < t0 or t_eval[-1] > t1 or np.any(np.diff(t_eval) <= 0):
        raise ValueError("sample times must be increasing and inside t_span")
    return t_eval


def _solve(rhs, t_span, y0, t_eval, cfg: IntegratorConfig):
    last = [float(t_span[0])]

    def f(t, y):
        last[0] = t
        return rhs(t, y)

    # DOP853's error norm evaluates 0/0 when the derivative vanishes exactly
    # (e.g. pulse tails that underflow); scipy then just rejects the step.
    with np.errstate(invalid="ignore"):
        sol = solve_ivp(f, (float(t_span[0]), float(t_span[1])), y0, t_eval=t_eval, **cfg.solver_kwargs())
    sol.t_last = last[0]
    return sol


def _raise_failure(sol, gen_at: Callable[[float], LiouvillianAffine] | None) -> None:
    t_fail = float(sol.t_last)
    if "step size" in sol.message.lower():
        gap, radius = float("nan"), float("nan")
        if gen_at is not None and np.isfinite(t_fail):
            dec = eigendecompose(gen_at(t_fail).M)
            gap = liouvillian_gap(dec)
            radius = float(np.abs(dec.eigenvalues).max())
        raise StiffnessError(t_fail, gap, radius, sol.message)
    raise IntegrationError(sol.message)


def evolve_bloch(
    gen: Callable[[float], LiouvillianAffine],
    R0: np.ndarray,
    t_span: tuple[float, float] = (-100.0, 100.0),
    cfg: IntegratorConfig | None = None,
    samples: int | np.ndarray = 1001,
) -> Trajectory:
    """Integrate ``dR/dt = M(t) R + b(t)`` from ``R0``.

    ``gen`` may expose ``matrices(t) -> (M, b)`` (as
    :class:`~openstirap.stirap.StirapGenerator` does) to skip building a
    :class:`LiouvillianAffine` on every right-hand-side call.

    Raises
    ------
    StiffnessError
        If the step size underflows.
    """
    cfg = cfg or IntegratorConfig()
    t_eval = _sample_times(t_span, samples)
    R0 = np.asarray(R0, dtype=float)
    fast = getattr(gen, "matrices", None)
    if fast is not None:

        def rhs(t, R):
            M, b = fast(t)
            return M @ R + b

    else:

        def rhs(t, R):
            g = gen(t)
            return g.M @ R + g.b

    sol = _solve(rhs, t_span, R0, t_eval, cfg)
    if not sol.success:
        _raise_failure(sol, gen)
    return Trajectory(sol.t, sol.y.T.copy(), {"nfev": int(sol.nfev), "route": "bloch"})


def evolve_density(
    model: LindbladModel,
    rho0: np.ndarray,
    t_span: tuple[float, float] = (-100.0, 100.0),
    cfg: IntegratorConfig | None = None,
    samples: int | np.ndarray = 1001,
) -> Trajectory:
    """Integrate the master equation for ``rho`` and return Bloch samples.

    The complex ``D x D`` matrix is integrated as a real vector of length
    ``2 D**2``. ``meta["trace_drift"]`` is the largest ``|Tr rho - 1|`` seen at
    the sample times.
    """
    cfg = cfg or IntegratorConfig()
    t_eval = _sample_times(t_span, samples)
    rho0 = np.asarray(rho0, dtype=complex)
    D = model.dimension
    basis = gellmann_basis(D)
    to_bloch(rho0, basis)  # validates trace and shape

    def rhs(t, y):
        rho = (y[: D * D] + 1j * y[D * D :]).reshape(D, D)
        d = superoperator_apply(model, rho, t).ravel()
        return np.concatenate([d.real, d.imag])

    y0 = np.concatenate([rho0.real.ravel(), rho0.imag.ravel()])
    sol = _solve(rhs, t_span, y0, t_eval, cfg)
    if not sol.success:
        _raise_failure(sol, None)
    rhos = (sol.y[: D * D] + 1j * sol.y[D * D :]).T.reshape(-1, D, D)
    drift = float(np.max(np.abs(np.trace(rhos, axis1=1, axis2=2) - 1.0)))
    states = np.array([_project(r, basis) for r in rhos])
    return Trajectory(sol.t, states, {"nfev": int(sol.nfev), "route": "density", "trace_drift": drift})


def random_pure_state(seed: int, D: int = 3) -> np.ndarray:
    """Bloch vector of a Haar-random pure state, deterministic per ``seed``."""
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=D) + 1j * rng.normal(size=D)
    psi /= np.linalg.norm(psi)
    return to_bloch(np.outer(psi, psi.conj()))
