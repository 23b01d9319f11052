"""Three-level Lambda-system STIRAP: pulses, Hamiltonian, adiabatic frame and loss cases.

Units follow hbar = 1; all couplings and rates are dimensionless. Loss rates
``gamma`` are quoted on the scale for which the dephasing generator has
``M[3, 3] = -2 gamma`` (equivalently ``gamma (L rho L^+ - {L^+ L, rho}/2)``
per channel), so each channel enters :class:`~openstirap.liouvillian.LindbladModel`
with rate ``gamma / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .bloch import to_bloch
from .liouvillian import (
    Channel,
    InvalidRateError,
    LindbladModel,
    LiouvillianAffine,
    compile_affine,
)

__all__ = [
    "DegenerateFrameError",
    "CouplingSchedule",
    "PulseSchedule",
    "ConstantCouplings",
    "AdiabaticFrame",
    "CASES",
    "pulses",
    "hamiltonian",
    "adiabatic_frame",
    "adiabaticity_measure",
    "adiabaticity_profile",
    "dark_state",
    "dark_bloch",
    "projector",
    "case_channels",
    "stirap_model",
    "StirapGenerator",
    "bloch_of_state",
]

CASES = ("closed", "dephasing", "emission", "coherent")


class DegenerateFrameError(ValueError):
    """Raised when both couplings vanish and the mixing angle is undefined."""


class CouplingSchedule(Protocol):
    Delta: float

    def couplings(self, t: float) -> tuple[float, float]: ...


@dataclass(frozen=True)
class PulseSchedule:
    """Counterintuitively ordered Gaussian pulse pair.

    ``G1`` is centred at ``+a*tau`` and ``G2`` at ``-a*tau``, both with width
    ``a*sigma``; the Stokes-type pulse ``G2`` therefore arrives first.
    """

    g0: float = 1.0
    a: float = 1.0
    tau: float = 10.0
    sigma: float = 10.0
    Delta: float = 0.0

    def __post_init__(self) -> None:
        if not (self.g0 > 0 and self.a > 0 and self.sigma > 0 and self.tau >= 0):
            raise ValueError(f"invalid pulse schedule {self}")

    @property
    def width(self) -> float:
        return self.a * self.sigma

    def log_couplings(self, t: float) -> tuple[float, float]:
        w2 = 2.0 * self.width**2
        lg = math.log(self.g0)
        at = self.a * self.tau
        return lg - (t - at) ** 2 / w2, lg - (t + at) ** 2 / w2

    def couplings(self, t: float) -> tuple[float, float]:
        l1, l2 = self.log_couplings(t)
        return math.exp(l1), math.exp(l2)


@dataclass(frozen=True)
class ConstantCouplings:
    G1: float = 1.0
    G2: float = 1.0
    Delta: float = 0.0

    def couplings(self, t: float) -> tuple[float, float]:
        return self.G1, self.G2


def pulses(t: float, sched: PulseSchedule) -> tuple[float, float]:
    """``(G1(t), G2(t))`` for a Gaussian schedule."""
    return sched.couplings(t)


def hamiltonian(G1: float, G2: float, Delta: float = 0.0) -> np.ndarray:
    """Diabatic RWA Hamiltonian in the bare basis ``|1>, |2>, |3>``."""
    return np.array([[0.0, G1, 0.0], [G1, Delta, G2], [0.0, G2, 0.0]])


@dataclass(frozen=True)
class AdiabaticFrame:
    """Mixing angles, adiabatic states and energies.

    The columns of ``U`` are ``|phi_+>, |phi_0>, |phi_->`` in the bare basis,
    so ``U.T @ H @ U == diag(E_+, 0, E_-)``.
    """

    theta: float
    phi: float
    U: np.ndarray
    energies: tuple[float, float, float]

    @property
    def dark(self) -> np.ndarray:
        return self.U[:, 1]


def adiabatic_frame(G1: float, G2: float, Delta: float = 0.0) -> AdiabaticFrame:
    if G1 == 0 and G2 == 0:
        raise DegenerateFrameError("mixing angle undefined for G1 = G2 = 0")
    G0 = math.hypot(G1, G2)
    theta = math.atan2(G1, G2)
    phi = 0.5 * math.atan2(2.0 * G0, Delta)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    # The third column's middle entry must be -sin(phi) for U to be orthogonal.
    U = np.array(
        [
            [sp * st, ct, cp * st],
            [cp, 0.0, -sp],
            [sp * ct, -st, cp * ct],
        ]
    )
    root = math.hypot(Delta, 2.0 * G0)
    # E+ E- = -G0^2; take the non-cancelling root first.
    if Delta >= 0:
        Ep = (Delta + root) / 2.0
        Em = -G0 * (G0 / Ep)
    else:
        Em = (Delta - root) / 2.0
        Ep = G0 * (G0 / -Em)
    energies = (Ep, 0.0, Em)
    return AdiabaticFrame(theta, phi, U, energies)


def _measure_from_logs(l1: float, l2: float, sched: PulseSchedule) -> float:
    # G1 G2 / G0^3 evaluated in log space so far tails do not underflow to 0/0.
    lg0 = 0.5 * np.logaddexp(2.0 * l1, 2.0 * l2)
    # Far in the tails G0 shrinks faster than the overlap and the measure grows
    # without bound.
    x = l1 + l2 - 3.0 * lg0 + math.log(sched.a * sched.tau / sched.width**2) if sched.tau > 0 else -math.inf
    return math.exp(x) if x < 700.0 else math.inf


def adiabaticity_measure(t: float, sched: PulseSchedule) -> float:
    """Non-adiabatic coupling ``G1 G2 / G0^3 * a tau / (a sigma)^2`` at time ``t``.

    Returns ``inf`` when ``G0`` vanishes, which only happens for pluggable
    schedules, or when the value overflows in the far pulse tails. Gaussian
    pulses are handled in log space.
    """
    if isinstance(sched, PulseSchedule):
        return _measure_from_logs(*sched.log_couplings(t), sched)
    G1, G2 = sched.couplings(t)
    G0 = math.hypot(G1, G2)
    if G0 == 0.0:
        return math.inf
    return G1 * G2 / G0**3 * sched.a * sched.tau / (sched.a * sched.sigma) ** 2


def adiabaticity_profile(times: np.ndarray, sched) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized measure plus a mask of times where ``G0`` vanished."""
    times = np.asarray(times, dtype=float)
    values = np.array([adiabaticity_measure(float(t), sched) for t in times])
    if isinstance(sched, PulseSchedule):
        return values, np.zeros(times.shape, dtype=bool)
    return values, np.array([math.hypot(*sched.couplings(float(t))) == 0.0 for t in times])


def dark_state(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), 0.0, -math.sin(theta)])


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def dark_bloch(theta: float) -> np.ndarray:
    """Bloch vector of the dark state ``cos(theta)|1> - sin(theta)|3>``.

    ``r4 = -sqrt(3) s c``; the often-quoted ``-sqrt(3) s c / 2`` is not a unit
    vector away from ``theta = 0, pi/2``.
    """
    s, c = math.sin(theta), math.cos(theta)
    r3 = math.sqrt(3.0)
    return np.array([0.0, 0.0, r3 * c * c, -2.0 * r3 * s * c, 0.0, 0.0, 0.0, 1.0 - 3.0 * s * s]) / 2.0


def _ket_bra(i: int, j: int) -> np.ndarray:
    op = np.zeros((3, 3), dtype=complex)
    op[i, j] = 1.0
    return op


DEPHASING_JUMP = _ket_bra(0, 0) - _ket_bra(2, 2)
EMISSION_JUMPS = (_ket_bra(0, 1), _ket_bra(2, 1))
COHERENT_JUMP = _ket_bra(0, 1) + _ket_bra(2, 1)


def case_channels(
    case: str,
    gamma: float = 0.0,
    gamma2: float | None = None,
    jump: np.ndarray | None = None,
) -> list[Channel]:
    """Lindblad channels for a named loss case.

    ``dephasing``: ``|1><1| - |3><3|``. ``emission``: ``|1><2|`` and ``|3><2|``
    with rates ``gamma`` and ``gamma2`` (default equal). ``coherent``: a single
    jump, ``|1><2| + |3><2|`` unless ``jump`` is supplied.
    """
    if gamma < 0 or (gamma2 is not None and gamma2 < 0):
        raise InvalidRateError("loss rates must be non-negative")
    if case == "closed":
        return []
    if case == "dephasing":
        return [(gamma / 2.0, DEPHASING_JUMP)]
    if case == "emission":
        g2 = gamma if gamma2 is None else gamma2
        return [(gamma / 2.0, EMISSION_JUMPS[0]), (g2 / 2.0, EMISSION_JUMPS[1])]
    if case == "coherent":
        L = COHERENT_JUMP if jump is None else np.asarray(jump, dtype=complex)
        if L.shape != (3, 3):
            raise ValueError(f"jump operator must be 3x3, got shape {L.shape}")
        return [(gamma / 2.0, L)]
    raise ValueError(f"unknown case {case!r}; expected one of {CASES}")


def stirap_model(
    case: str,
    gamma: float,
    schedule: CouplingSchedule,
    *,
    gamma2: float | None = None,
    jump: np.ndarray | None = None,
) -> LindbladModel:
    def H(t: float) -> np.ndarray:
        G1, G2 = schedule.couplings(t)
        return hamiltonian(G1, G2, schedule.Delta)

    return LindbladModel(3, H, case_channels(case, gamma, gamma2, jump))


class StirapGenerator:
    """Time-dependent ``(M(t), b)`` for a STIRAP case.

    The Hamiltonian is linear in ``(G1, G2, Delta)``, so the generator is
    assembled from four compiled pieces instead of recompiling at every call.
    """

    def __init__(
        self,
        case: str,
        gamma: float,
        schedule: CouplingSchedule,
        *,
        gamma2: float | None = None,
        jump: np.ndarray | None = None,
    ) -> None:
        self.case = case
        self.gamma = float(gamma)
        self.schedule = schedule
        self.model = stirap_model(case, gamma, schedule, gamma2=gamma2, jump=jump)
        unit = [hamiltonian(1, 0, 0), hamiltonian(0, 1, 0), hamiltonian(0, 0, 1)]
        self._A = [compile_affine(LindbladModel.constant(h)).M for h in unit]
        diss = compile_affine(LindbladModel.constant(np.zeros((3, 3)), self.model.channels))
        self._Md = diss.M
        self.b = diss.b
        self._MdD = self._Md + schedule.Delta * self._A[2]

    def matrices(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        G1, G2 = self.schedule.couplings(t)
        return G1 * self._A[0] + G2 * self._A[1] + self._MdD, self.b

    def __call__(self, t: float) -> LiouvillianAffine:
        M, b = self.matrices(t)
        return LiouvillianAffine(M, b, {"case": self.case, "gamma": self.gamma, "t": t})


def bloch_of_state(psi: np.ndarray) -> np.ndarray:
    return to_bloch(projector(psi))
