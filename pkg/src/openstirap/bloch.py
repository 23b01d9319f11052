"""Generalized Gell-Mann basis and Bloch-vector parametrization of density matrices.

A density matrix of dimension ``D`` is written as

.. math:: \\rho = \\frac{1}{D}\\Big(\\mathbb{1} + \\sqrt{D(D-1)/2}\\; \\mathbf{R}\\cdot\\lambda\\Big)

with ``lambda`` the ``D**2 - 1`` generalized Gell-Mann matrices normalized as
``Tr[lambda_i lambda_j] = 2 delta_ij``. With this scaling pure states have
``|R| = 1`` and the maximally mixed state sits at the origin.

Bloch vectors and density matrices are plain numpy arrays; the basis object
only carries the matrices and is cached per dimension.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InvalidDimensionError",
    "BlochValidationError",
    "GellMannBasis",
    "build_gellmann",
    "gellmann_basis",
    "structure_constants",
    "to_bloch",
    "from_bloch",
    "physicality",
    "purity",
    "dimension_from_length",
    "random_density_matrix",
    "random_pure_density",
]

POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-9


class InvalidDimensionError(ValueError):
    """Raised for Hilbert-space dimensions below 2."""


class BlochValidationError(ValueError):
    """Raised when a matrix or vector cannot be converted."""


@dataclass(frozen=True, eq=False)
class GellMannBasis:
    """Ordered generalized Gell-Mann matrices for dimension ``D``.

    ``matrices`` has shape ``(D**2 - 1, D, D)``. For ``D = 3`` the order is the
    standard one (lambda_1 ... lambda_8); for ``D = 2`` it is the Pauli triple.
    """

    dimension: int
    matrices: np.ndarray

    @property
    def size(self) -> int:
        return self.dimension**2 - 1

    @property
    def scale(self) -> float:
        """Factor ``sqrt(D(D-1)/2)`` multiplying ``R . lambda``."""
        d = self.dimension
        return float(np.sqrt(d * (d - 1) / 2.0))

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, i: int) -> np.ndarray:
        return self.matrices[i]


def build_gellmann(D: int) -> GellMannBasis:
    """Construct the generalized Gell-Mann basis.

    Generators are grouped level by level: for ``k = 2..D`` the symmetric and
    antisymmetric off-diagonal pair for every ``j < k`` (interleaved), followed
    by the diagonal generator that first involves level ``k``. This enumeration
    reproduces the textbook Gell-Mann ordering at ``D = 3`` and the Pauli
    ordering ``(x, y, z)`` at ``D = 2``.
    """
    if int(D) != D or D < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {D!r}")
    D = int(D)
    mats = []
    for k in range(1, D):
        for j in range(k):
            sym = np.zeros((D, D), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((D, D), dtype=complex)
            anti[j, k] = -1j
            anti[k, j] = 1j
            mats.extend((sym, anti))
        diag = np.zeros(D)
        diag[:k] = 1.0
        diag[k] = -k
        mats.append(np.diag(diag * np.sqrt(2.0 / (k * (k + 1)))).astype(complex))
    arr = np.array(mats)
    arr.setflags(write=False)
    return GellMannBasis(dimension=D, matrices=arr)


@functools.lru_cache(maxsize=None)
def gellmann_basis(D: int) -> GellMannBasis:
    """Cached :func:`build_gellmann`."""
    return build_gellmann(D)


@functools.lru_cache(maxsize=None)
def _structure_constants_cached(D: int) -> np.ndarray:
    lam = gellmann_basis(D).matrices
    comm = np.einsum("iab,jbc->ijac", lam, lam) - np.einsum("jab,ibc->ijac", lam, lam)
    f = np.einsum("ijab,kba->ijk", comm, lam) / 4j
    out = np.real_if_close(f, tol=1e6).real.copy()
    out[np.abs(out) < 1e-14] = 0.0
    out.setflags(write=False)
    return out


def structure_constants(basis: GellMannBasis) -> np.ndarray:
    """Totally antisymmetric ``f[i, j, k] = Tr([l_i, l_j] l_k) / (4i)`` (0-based)."""
    return _structure_constants_cached(basis.dimension)


def dimension_from_length(n: int) -> int:
    """Hilbert-space dimension ``D`` for a Bloch vector of length ``D**2 - 1``."""
    D = int(round(np.sqrt(n + 1)))
    if D * D - 1 != n or D < 2:
        raise BlochValidationError(f"length {n} is not of the form D**2 - 1")
    return D


def to_bloch(rho: np.ndarray, basis: GellMannBasis | None = None) -> np.ndarray:
    """Bloch vector ``r_i = sqrt(D/(2(D-1))) Tr[rho lambda_i]``.

    Raises
    ------
    BlochValidationError
        If ``rho`` is not square or its trace differs from one by more than
        ``1e-9``.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise BlochValidationError(f"expected a square matrix, got shape {rho.shape}")
    D = rho.shape[0]
    if basis is None:
        basis = gellmann_basis(D)
    elif basis.dimension != D:
        raise BlochValidationError("basis dimension does not match the matrix")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise BlochValidationError(f"density matrix trace is {tr}, expected 1")
    return _project(rho, basis)


def _project(op: np.ndarray, basis: GellMannBasis) -> np.ndarray:
    # Tr[op lambda_i] without the trace check; also used for traceless rates.
    D = basis.dimension
    traces = np.einsum("ab,iba->i", op, basis.matrices)
    return np.sqrt(D / (2.0 * (D - 1))) * traces.real


def from_bloch(R: np.ndarray, basis: GellMannBasis | None = None) -> np.ndarray:
    """Density matrix for a real Bloch vector. Positivity is not checked."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 1:
        raise BlochValidationError(f"Bloch vector must be 1-D, got shape {R.shape}")
    if basis is None:
        basis = gellmann_basis(dimension_from_length(R.size))
    elif R.size != basis.size:
        raise BlochValidationError(f"expected length {basis.size}, got {R.size}")
    D = basis.dimension
    return (np.eye(D) + basis.scale * np.einsum("i,iab->ab", R, basis.matrices)) / D


def physicality(
    R: np.ndarray, basis: GellMannBasis | None = None, tol: float = POSITIVITY_TOL
) -> tuple[bool, float]:
    """Return ``(is_physical, min_eigenvalue)`` of the reconstructed matrix."""
    rho = from_bloch(R, basis)
    lo = float(np.linalg.eigvalsh(rho)[0])
    return lo >= -tol, lo


def purity(R: np.ndarray) -> float:
    """``Tr[rho^2] = 1/D + (D-1)/D |R|^2``."""
    R = np.asarray(R, dtype=float)
    D = dimension_from_length(R.size)
    return 1.0 / D + (D - 1) / D * float(R @ R)


def random_pure_density(rng: np.random.Generator, D: int = 3) -> np.ndarray:
    psi = rng.normal(size=D) + 1j * rng.normal(size=D)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_density_matrix(
    rng: np.random.Generator, D: int = 3, rank: int | None = None
) -> np.ndarray:
    """Convex mixture of ``rank`` Gaussian pure states with Dirichlet weights."""
    rank = D if rank is None else rank
    weights = rng.dirichlet(np.ones(rank))
    return sum(w * random_pure_density(rng, D) for w in weights)
