"""Lindblad models and their affine Bloch generators.

The master equation

.. math:: \\partial_t\\rho = i[\\rho, H] + \\sum_i \\gamma_i
          \\big(2 L_i \\rho L_i^\\dagger - L_i^\\dagger L_i \\rho - \\rho L_i^\\dagger L_i\\big)

maps Bloch vectors affinely, ``dR/dt = M R + b``. :func:`compile_affine`
extracts ``(M, b)`` by evaluating the right-hand side on the maximally mixed
state and on the states ``from_bloch(e_j)``; since the Bloch-projected map is
affine this is exact, and it serves as the ground truth for every closed-form
generator elsewhere in the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .bloch import GellMannBasis, _project, from_bloch, gellmann_basis

__all__ = [
    "InvalidRateError",
    "Channel",
    "LindbladModel",
    "LiouvillianAffine",
    "superoperator_apply",
    "compile_affine",
]


class InvalidRateError(ValueError):
    """Raised for negative decay or dephasing rates."""


Channel = tuple[float, np.ndarray]


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian provider plus ``(rate, jump operator)`` channels.

    ``hamiltonian`` maps a time to a Hermitian ``D x D`` matrix. Rates must be
    non-negative; they multiply the dissipator written with the factor 2 shown
    in the module docstring.
    """

    dimension: int
    hamiltonian: Callable[[float], np.ndarray]
    channels: Sequence[Channel] = ()

    def __post_init__(self) -> None:
        chans = []
        for rate, jump in self.channels:
            rate = float(rate)
            if rate < 0:
                raise InvalidRateError(f"rates must be non-negative, got {rate}")
            jump = np.asarray(jump, dtype=complex)
            if jump.shape != (self.dimension, self.dimension):
                raise ValueError(
                    f"jump operator has shape {jump.shape}, expected "
                    f"({self.dimension}, {self.dimension})"
                )
            chans.append((rate, jump))
        object.__setattr__(self, "channels", tuple(chans))

    @classmethod
    def constant(cls, H: np.ndarray, channels: Sequence[Channel] = ()) -> LindbladModel:
        H = np.asarray(H, dtype=complex)
        return cls(H.shape[0], lambda t: H, channels)


@dataclass(frozen=True)
class LiouvillianAffine:
    """Real generator ``M`` and pump ``b`` of ``dR/dt = M R + b``."""

    M: np.ndarray
    b: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        M = np.asarray(self.M, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or b.shape != (M.shape[0],):
            raise ValueError(f"inconsistent shapes M{M.shape}, b{b.shape}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "b", b)

    def rate(self, R: np.ndarray) -> np.ndarray:
        return self.M @ R + self.b

    def to_dict(self) -> dict[str, Any]:
        return {
            "shape": list(self.M.shape),
            "M": self.M.ravel().tolist(),
            "b": self.b.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LiouvillianAffine:
        n, m = data["shape"]
        M = np.asarray(data["M"], dtype=float).reshape(n, m)
        return cls(M, np.asarray(data["b"], dtype=float), dict(data.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> LiouvillianAffine:
        return cls.from_dict(json.loads(text))


def _dissipator(rho: np.ndarray, channels: Sequence[Channel]) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for rate, L in channels:
        if rate == 0.0:
            continue
        Ld = L.conj().T
        LdL = Ld @ L
        out += rate * (2.0 * L @ rho @ Ld - LdL @ rho - rho @ LdL)
    return out


def superoperator_apply(model: LindbladModel, rho: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Right-hand side of the master equation at time ``t``."""
    rho = np.asarray(rho, dtype=complex)
    H = np.asarray(model.hamiltonian(t), dtype=complex)
    return 1j * (rho @ H - H @ rho) + _dissipator(rho, model.channels)


def compile_affine(
    model: LindbladModel, t: float = 0.0, basis: GellMannBasis | None = None
) -> LiouvillianAffine:
    """Exact ``(M, b)`` for ``model`` at time ``t`` by projection."""
    if basis is None:
        basis = gellmann_basis(model.dimension)
    n = basis.size
    D = basis.dimension
    H = np.asarray(model.hamiltonian(t), dtype=complex)
    frozen = LindbladModel(D, lambda _t: H, model.channels)
    b = _project(superoperator_apply(frozen, np.eye(D) / D), basis)
    M = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        M[:, j] = _project(superoperator_apply(frozen, from_bloch(e, basis)), basis) - b
    return LiouvillianAffine(M, b)
