"""Closed-form STIRAP generators as commonly printed, and their audit against compilation.

:func:`dephasing_affine` and :func:`emission_affine` reproduce the textbook
8x8 matrices entry for entry, including entries that do not follow from the
stated jump operators. They are kept verbatim on purpose; :func:`consistency_report`
compares them with :func:`~openstirap.liouvillian.compile_affine` and lists
every disagreeing entry as a pair of linear forms in ``(G1, G2, Delta, gamma)``.
Indices in reports are 1-based to match the usual matrix notation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .liouvillian import InvalidRateError, LiouvillianAffine, compile_affine
from .stirap import ConstantCouplings, stirap_model

__all__ = [
    "dephasing_affine",
    "emission_affine",
    "EntryMismatch",
    "ConsistencyReport",
    "consistency_report",
    "skew_violations",
]

SQ3 = np.sqrt(3.0)
PARAMS = ("G1", "G2", "Delta", "gamma")


def _unitary_part(G1: float, G2: float, Delta: float) -> np.ndarray:
    return np.array(
        [
            [0, Delta, 0, 0, G2, 0, 0, 0],
            [-Delta, 0, -2 * G1, -G2, 0, 0, 0, 0],
            [0, 2 * G1, 0, 0, 0, 0, -G2, 0],
            [0, G2, 0, 0, 0, 0, -G2, 0],
            [-G2, 0, 0, 0, 0, G1, 0, 0],
            [0, 0, 0, 0, -G1, 0, -Delta, 0],
            [0, 0, G2, G1, 0, Delta, 0, -SQ3 * G2],
            [0, 0, 0, 0, 0, 0, SQ3 * G2, 0],
        ],
        dtype=float,
    )


def dephasing_affine(G1: float, G2: float, Delta: float, gamma: float) -> LiouvillianAffine:
    """Printed generator for dephasing of ``|1>`` against ``|3>``; ``b = 0``."""
    if gamma < 0:
        raise InvalidRateError(f"gamma must be non-negative, got {gamma}")
    M = _unitary_part(G1, G2, Delta)
    M[np.diag_indices(8)] = np.array([-0.5, -0.5, 0, -2, -2, -0.5, -0.5, 0]) * gamma
    return LiouvillianAffine(M, np.zeros(8), {"case": "dephasing", "source": "printed"})


def emission_affine(G1: float, G2: float, Delta: float, gamma: float) -> LiouvillianAffine:
    """Printed generator and pump for emission from ``|2>``."""
    if gamma < 0:
        raise InvalidRateError(f"gamma must be non-negative, got {gamma}")
    M = _unitary_part(G1, G2, Delta)
    M[np.diag_indices(8)] = np.array([-0.5, -0.5, -1, -0.5, -0.5, -1, -1, 0]) * gamma
    M[2, 7] = gamma / SQ3
    b = np.zeros(8)
    b[2] = gamma / SQ3
    return LiouvillianAffine(M, b, {"case": "emission", "source": "printed"})


PRINTED: dict[str, Callable[[float, float, float, float], LiouvillianAffine]] = {
    "dephasing": dephasing_affine,
    "emission": emission_affine,
}


def compiled_affine(case: str, G1: float, G2: float, Delta: float, gamma: float) -> LiouvillianAffine:
    model = stirap_model(case, gamma, ConstantCouplings(G1, G2, Delta))
    gen = compile_affine(model)
    return LiouvillianAffine(gen.M, gen.b, {"case": case, "source": "compiled"})


def _linear_coefficients(builder) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``M`` and ``b`` with respect to ``PARAMS``; shapes (4, 8, 8), (4, 8)."""
    cm, cb = [], []
    for k in range(4):
        p = np.zeros(4)
        p[k] = 1.0
        gen = builder(*p)
        cm.append(gen.M)
        cb.append(gen.b)
    cm, cb = np.array(cm), np.array(cb)
    probe = np.array([0.37, 1.21, -0.53, 0.89])
    gen = builder(*probe)
    if not (
        np.allclose(gen.M, np.tensordot(probe, cm, 1), atol=1e-12)
        and np.allclose(gen.b, probe @ cb, atol=1e-12)
    ):
        raise ValueError("generator is not linear in (G1, G2, Delta, gamma)")
    return cm, cb


def format_linear(coeffs: np.ndarray) -> str:
    terms = []
    for c, name in zip(coeffs, PARAMS):
        if abs(c) < 1e-12:
            continue
        if abs(abs(c) - 1.0) < 1e-12:
            terms.append(("-" if c < 0 else "+") + name)
        else:
            terms.append(f"{c:+.6g}*{name}")
    if not terms:
        return "0"
    s = "".join(terms)
    return s[1:] if s.startswith("+") else s


@dataclass(frozen=True)
class EntryMismatch:
    kind: str  # "M" or "b"
    index: tuple[int, ...]  # 1-based
    printed: str
    compiled: str

    def __str__(self) -> str:
        idx = ",".join(map(str, self.index))
        return f"{self.kind}[{idx}]: printed {self.printed}  compiled {self.compiled}"


@dataclass(frozen=True)
class ConsistencyReport:
    case: str
    mismatches: list[EntryMismatch] = field(default_factory=list)
    printed_skew_violations: list[tuple[int, int]] = field(default_factory=list)
    compiled_skew_violations: list[tuple[int, int]] = field(default_factory=list)

    @property
    def flagged(self) -> set[tuple[str, tuple[int, ...]]]:
        return {(m.kind, m.index) for m in self.mismatches}

    @property
    def consistent(self) -> bool:
        return not self.mismatches

    def lines(self) -> list[str]:
        out = [f"case {self.case}: {len(self.mismatches)} mismatching entries"]
        out += ["  " + str(m) for m in self.mismatches]
        for i, j in self.printed_skew_violations:
            out.append(f"  printed unitary part not skew-symmetric at ({i},{j})/({j},{i})")
        for i, j in self.compiled_skew_violations:
            out.append(f"  compiled unitary part not skew-symmetric at ({i},{j})/({j},{i})")
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def skew_violations(M: np.ndarray, atol: float = 1e-12) -> list[tuple[int, int]]:
    """1-based ``(i, j)`` with ``i < j`` where ``M[i, j] != -M[j, i]``."""
    bad = np.argwhere(np.abs(M + M.T) > atol)
    return sorted({(int(i) + 1, int(j) + 1) for i, j in bad if i < j})


def consistency_report(case: str) -> ConsistencyReport:
    """Symbolic entry-by-entry audit of the printed generator for ``case``.

    Both generators are linear in ``(G1, G2, Delta, gamma)``, so comparing
    coefficient tensors checks every parameter value at once.
    """
    printed = PRINTED[case]
    pm, pb = _linear_coefficients(printed)
    cm, cb = _linear_coefficients(lambda *p: compiled_affine(case, *p))
    mismatches = []
    for i in range(8):
        for j in range(8):
            if not np.allclose(pm[:, i, j], cm[:, i, j], atol=1e-12):
                mismatches.append(
                    EntryMismatch("M", (i + 1, j + 1), format_linear(pm[:, i, j]), format_linear(cm[:, i, j]))
                )
    for i in range(8):
        if not np.allclose(pb[:, i], cb[:, i], atol=1e-12):
            mismatches.append(EntryMismatch("b", (i + 1,), format_linear(pb[:, i]), format_linear(cb[:, i])))
    # gamma = 0 part: must be skew-symmetric for any G1, G2, Delta.
    unit_p = sum(pm[k] * v for k, v in enumerate((0.7, 1.3, 0.4)))
    unit_c = sum(cm[k] * v for k, v in enumerate((0.7, 1.3, 0.4)))
    return ConsistencyReport(case, mismatches, skew_violations(unit_p), skew_violations(unit_c))
