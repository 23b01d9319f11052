"""Spectral analysis of real, non-symmetric Liouvillian matrices.

Eigenpairs come from LAPACK (Hessenberg reduction plus shifted QR) through
:func:`scipy.linalg.eig`, with left vectors rescaled to the dual basis of the
right ones. Exceptional points along a parameter line are located from jumps
in the number of real eigenvalues, refined by bisection, and only accepted
when the coalescence diagnostics (eigenvector condition number, eigenvalue
separation) agree. No Jordan form is ever computed.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .bloch import dimension_from_length, gellmann_basis
from .liouvillian import LiouvillianAffine

__all__ = [
    "SpectralConvergenceError",
    "NearExceptionalPointError",
    "SecularGrowthWarning",
    "ContinuationWarning",
    "SpectralDecomposition",
    "SteadyState",
    "EPRecord",
    "BranchTrack",
    "eigendecompose",
    "liouvillian_gap",
    "steady_state",
    "track_branches",
    "ep_scan",
    "expand_initial",
    "mode_evolution",
    "spectral_solution",
    "max_physical_length",
    "eigenvector_physicality",
    "conjugate_pairing_error",
]

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
ZERO_TOL = 1e-10
EP_CONDITION = 1e6
EP_SEPARATION = 1e-6


class SpectralConvergenceError(RuntimeError):
    """The eigenvalue iteration failed or produced inaccurate eigenpairs."""


class NearExceptionalPointError(ValueError):
    """Mode expansion requested where eigenvectors are nearly parallel."""


class SecularGrowthWarning(RuntimeWarning):
    """A zero mode is driven by the pump and grows linearly in time."""


class ContinuationWarning(RuntimeWarning):
    """Branch matching remained ambiguous after step halving."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues with unit right vectors and dual left vectors.

    ``left[:, i].conj() @ right[:, j] == delta_ij`` away from exceptional
    points; ``condition[i]`` is ``1 / |<l_i, r_i>|`` for unit ``l_i, r_i``.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: np.ndarray

    def __len__(self) -> int:
        return self.eigenvalues.size

    def residuals(self) -> np.ndarray:
        return np.linalg.norm(self.matrix @ self.right - self.right * self.eigenvalues, axis=0)

    @property
    def vector_condition(self) -> float:
        """2-norm condition number of the right eigenvector matrix."""
        return float(np.linalg.cond(self.right))

    def is_real(self, tol: float | None = None) -> np.ndarray:
        if tol is None:
            tol = ZERO_TOL * max(1.0, float(np.linalg.norm(self.matrix, 2)))
        return np.abs(self.eigenvalues.imag) <= tol


def eigendecompose(M: np.ndarray) -> SpectralDecomposition:
    """Full eigendecomposition of a real square matrix.

    Eigenvalues are ordered by decreasing real part, then increasing
    imaginary part.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    try:
        w, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    except np.linalg.LinAlgError as exc:
        raise SpectralConvergenceError(f"QR iteration did not converge: {exc}") from exc
    order = np.lexsort((w.imag, -w.real))
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    overlap = np.einsum("ij,ij->j", vl.conj(), vr)
    with np.errstate(divide="ignore"):
        cond = 1.0 / np.abs(overlap)
    safe = np.where(overlap == 0, 1.0, overlap)
    vl = vl / safe.conj()
    dec = SpectralDecomposition(M, w, vr, vl, cond)
    res = dec.residuals()
    if np.any(res > RESIDUAL_TOL * max(1.0, float(np.abs(M).max()))):
        raise SpectralConvergenceError(f"eigenpair residual {res.max():.3e} exceeds tolerance")
    return dec


def liouvillian_gap(spec: SpectralDecomposition, zero_tol: float = ZERO_TOL) -> float:
    """Smallest decay rate ``-Re(mu)`` above ``zero_tol``; 0 if none."""
    if len(spec) == 0:
        raise ValueError("empty spectrum")
    rates = -spec.eigenvalues.real
    rates = rates[rates > zero_tol]
    return float(rates.min()) if rates.size else 0.0


@dataclass(frozen=True)
class SteadyState:
    """Outcome of ``M R + b = 0``.

    For invertible ``M`` ``bloch`` is the unique solution. Otherwise ``singular``
    is set, ``null_space`` holds an orthonormal basis of the solution directions
    and ``bloch`` is the least-squares particular solution (``None`` when ``b`` is
    not in the range of ``M``).
    """

    bloch: np.ndarray | None
    singular: bool = False
    null_space: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    condition: float = 1.0


def steady_state(gen: LiouvillianAffine, cond_threshold: float = 1e12) -> SteadyState:
    M, b = gen.M, gen.b
    u, s, vh = np.linalg.svd(M)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    if cond < cond_threshold:
        return SteadyState(np.linalg.solve(M, -b), False, np.zeros((M.shape[0], 0)), cond)
    null = vh[s <= s[0] / cond_threshold].conj().T
    part, *_ = np.linalg.lstsq(M, -b, rcond=1.0 / cond_threshold)
    if np.linalg.norm(M @ part + b) > 1e-9 * max(1.0, float(np.linalg.norm(b))):
        part = None
    return SteadyState(part, True, null, cond)


def conjugate_pairing_error(eigenvalues: np.ndarray) -> float:
    """Max distance between the spectrum and its conjugate after optimal matching."""
    w = np.asarray(eigenvalues)
    cost = np.abs(w[:, None] - w.conj()[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def max_physical_length(direction: np.ndarray) -> float:
    """Largest ``s >= 0`` with ``from_bloch(s * d / |d|)`` positive semidefinite.

    ``rho(s) = (1 + s c X) / D`` is linear in ``s``, so the bound follows from the
    smallest eigenvalue of ``X = d.lambda / |d|``.
    """
    d = np.asarray(direction, dtype=float)
    basis = gellmann_basis(dimension_from_length(d.size))
    norm = np.linalg.norm(d)
    if norm == 0:
        return np.inf
    X = np.einsum("i,iab->ab", d / norm, basis.matrices)
    xmin = float(np.linalg.eigvalsh(X)[0])
    return np.inf if xmin >= 0 else 1.0 / (basis.scale * -xmin)


def eigenvector_physicality(
    spec: SpectralDecomposition, tol: float | None = None
) -> list[tuple[bool, float]]:
    """Classify each right eigenvector as a possible (rescaled) physical state.

    Complex eigenvalues give complex vectors and are unphysical outright. A
    real eigenvector is reported with the largest physical length along
    ``+R`` or ``-R``.
    """
    out = []
    real = spec.is_real(tol)
    for i in range(len(spec)):
        if not real[i]:
            out.append((False, 0.0))
            continue
        v = spec.right[:, i]
        k = np.argmax(np.abs(v))
        v = (v * np.exp(-1j * np.angle(v[k]))).real
        length = max(max_physical_length(v), max_physical_length(-v))
        out.append((bool(length > 0), float(length)))
    return out


# --------------------------------------------------------------------------
# branch continuation


@dataclass(frozen=True)
class BranchTrack:
    """Eigenvalues along a parameter grid, columns ordered by branch."""

    grid: np.ndarray
    eigenvalues: np.ndarray  # (len(grid), n) complex
    condition: np.ndarray  # (len(grid), n)
    physical: np.ndarray  # (len(grid), n) bool
    max_length: np.ndarray  # (len(grid), n)
    ambiguous: list[tuple[float, float]] = field(default_factory=list)

    def rows(self):
        """``(gamma, index, re_mu, im_mu, condition, physical_flag)`` records."""
        for k, g in enumerate(self.grid):
            for i in range(self.eigenvalues.shape[1]):
                mu = self.eigenvalues[k, i]
                yield (
                    float(g),
                    i,
                    float(mu.real),
                    float(mu.imag),
                    float(self.condition[k, i]),
                    bool(self.physical[k, i]),
                )


def _match(prev_pred: np.ndarray, new: np.ndarray) -> tuple[np.ndarray, bool]:
    cost = np.abs(prev_pred[:, None] - new[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    ambiguous = False
    scale = 1e-12 * (1.0 + np.abs(new).max())
    for i, j1 in enumerate(perm):
        c1 = cost[i, j1]
        others = np.delete(np.arange(new.size), j1)
        if others.size == 0:
            continue
        j2 = others[np.argmin(cost[i, others])]
        c2 = cost[i, j2]
        sep = abs(new[j1] - new[j2])
        if c2 <= 3.0 * c1 + scale and sep > 0.5 * c1 + scale:
            ambiguous = True
            break
    return perm, ambiguous


def track_branches(
    builder: Callable[[float], LiouvillianAffine],
    grid: Sequence[float],
    *,
    max_halvings: int = 8,
) -> BranchTrack:
    """Nearest-neighbour continuation of eigenvalue branches over ``grid``.

    Each new spectrum is matched to a linear extrapolation of the last two by
    optimal assignment. When the assignment is ambiguous the step is halved
    (up to ``max_halvings`` times); intervals that stay ambiguous are listed in
    ``BranchTrack.ambiguous`` and reported with a :class:`ContinuationWarning`.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 1 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be non-empty and sorted")

    def spectrum(g: float) -> np.ndarray:
        return eigendecompose(builder(g).M).eigenvalues

    hist: list[tuple[float, np.ndarray]] = []
    ambiguous: list[tuple[float, float]] = []
    ordered = []

    def predict(g: float) -> np.ndarray:
        if len(hist) < 2 or hist[-1][0] == hist[-2][0]:
            return hist[-1][1]
        (g0, w0), (g1, w1) = hist[-2], hist[-1]
        return w1 + (w1 - w0) * (g - g1) / (g1 - g0)

    def advance(g: float, depth: int) -> None:
        new = spectrum(g)
        if not hist:
            hist.append((g, new))
            return
        perm, amb = _match(predict(g), new)
        if amb and depth < max_halvings and g > hist[-1][0]:
            advance(0.5 * (hist[-1][0] + g), depth + 1)
            new = spectrum(g)
            perm, amb = _match(predict(g), new)
        if amb and depth == 0:
            ambiguous.append((hist[-1][0], g))
        hist.append((g, new[perm]))

    for g in grid:
        advance(float(g), 0)
        ordered.append(hist[-1][1])
    # Branches that genuinely coalesce (real count changes within one step either
    # side) follow a square-root law there; refinement cannot resolve them.
    def coalescing(lo: float, hi: float) -> bool:
        h = hi - lo
        counts = {_n_real(builder(g).M, ZERO_TOL) for g in (max(lo - h, grid[0]), lo, hi, hi + h)}
        return len(counts) > 1

    ambiguous = [(lo, hi) for lo, hi in ambiguous if not coalescing(lo, hi)]
    if ambiguous:
        warnings.warn(
            f"branch continuation ambiguous on intervals {ambiguous}; refine the grid",
            ContinuationWarning,
            stacklevel=2,
        )

    eig = np.array(ordered)
    cond = np.empty(eig.shape)
    phys = np.empty(eig.shape, dtype=bool)
    length = np.empty(eig.shape)
    for k, g in enumerate(grid):
        dec = eigendecompose(builder(float(g)).M)
        # carry per-eigenvalue data over to the branch order
        cost = np.abs(eig[k][:, None] - dec.eigenvalues[None, :])
        rows, cols = linear_sum_assignment(cost)
        idx = cols[np.argsort(rows)]
        pc = eigenvector_physicality(dec)
        cond[k] = dec.condition[idx]
        phys[k] = [pc[j][0] for j in idx]
        length[k] = [pc[j][1] for j in idx]
    return BranchTrack(grid, eig, cond, phys, length, ambiguous)


# --------------------------------------------------------------------------
# exceptional points


@dataclass(frozen=True)
class EPRecord:
    """A located exceptional point.

    ``pair`` indexes the two coalescing eigenvalues in the decomposition on
    the real side of ``gamma_star``; ``kind`` is ``"forward"`` when a complex
    pair turns real with increasing ``gamma`` and ``"reversed"`` otherwise.
    """

    gamma_star: float
    pair: tuple[int, int]
    mu_star: complex
    min_separation: float
    peak_condition: float
    overlap: float
    kind: str
    bracket: tuple[float, float]
    confirmed: bool = True


def _n_real(M: np.ndarray, real_tol: float) -> int:
    w = np.linalg.eigvals(M)
    tol = real_tol * max(1.0, float(np.abs(M).max()))
    return int(np.sum(np.abs(w.imag) <= tol))


def _pairing(vectors: np.ndarray) -> list[tuple[int, int]]:
    """Pair columns to maximize summed absolute overlap."""
    n = vectors.shape[1]
    ov = np.abs(vectors.conj().T @ vectors)
    best, best_pairs = -1.0, []

    def pairings(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for k, other in enumerate(rest):
            for tail in pairings(rest[:k] + rest[k + 1 :]):
                yield [(first, other)] + tail

    for p in pairings(list(range(n))):
        score = sum(ov[i, j] for i, j in p)
        if score > best:
            best, best_pairs = score, p
    return best_pairs


def ep_scan(
    builder: Callable[[float], LiouvillianAffine],
    gamma_grid: Sequence[float],
    *,
    resolution: float = 1e-14,
    real_tol: float = ZERO_TOL,
    cond_threshold: float = EP_CONDITION,
    separation_factor: float = EP_SEPARATION,
) -> list[EPRecord]:
    """Locate exceptional points of ``builder(gamma).M`` along ``gamma_grid``.

    A candidate is any interval where the number of real eigenvalues changes.
    Each is bisected down to ``resolution * max(1, gamma)``; a record is kept
    as confirmed when the coalescing eigenvectors have condition number above
    ``cond_threshold`` and eigenvalue separation below
    ``separation_factor * |M|``. Unconfirmed candidates are returned with
    ``confirmed=False``. Net-zero changes inside one grid cell (a pair turning
    real and complex again) are invisible and warned about only through
    :func:`track_branches`.
    """
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.size < 3:
        raise ValueError("need at least three grid points")
    if np.any(np.diff(grid) < 0):
        raise ValueError("gamma grid must be sorted")

    def count(g: float) -> int:
        return _n_real(builder(g).M, real_tol)

    counts = [count(float(g)) for g in grid]
    transitions = []

    def locate(lo: float, hi: float, nlo: int, nhi: int) -> None:
        if nlo == nhi:
            return
        if hi - lo <= resolution * max(1.0, abs(hi)):
            transitions.append((lo, hi, nlo, nhi))
            return
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            transitions.append((lo, hi, nlo, nhi))
            return
        nm = count(mid)
        locate(lo, mid, nlo, nm)
        locate(mid, hi, nm, nhi)

    for k in range(grid.size - 1):
        if grid[k + 1] > grid[k]:
            locate(float(grid[k]), float(grid[k + 1]), counts[k], counts[k + 1])

    records = []
    for lo, hi, nlo, nhi in transitions:
        records.extend(_characterize(builder, lo, hi, nlo, nhi, real_tol, cond_threshold, separation_factor))
    for r in records:
        if not r.confirmed:
            log.warning("unconfirmed exceptional-point candidate near gamma=%.12g", r.gamma_star)
    return records


def _characterize(builder, lo, hi, nlo, nhi, real_tol, cond_threshold, sep_factor) -> list[EPRecord]:
    kind = "forward" if nhi > nlo else "reversed"
    g_real, g_cplx = (hi, lo) if nhi > nlo else (lo, hi)
    M_real = builder(g_real).M
    dr = eigendecompose(M_real)
    dc = eigendecompose(builder(g_cplx).M)
    tol = real_tol * max(1.0, float(np.abs(M_real).max()))
    real_r = np.flatnonzero(np.abs(dr.eigenvalues.imag) <= tol)
    real_c = np.flatnonzero(np.abs(dc.eigenvalues.imag) <= tol)
    # real eigenvalues on the real side not explained by real ones on the other side
    if real_c.size:
        cost = np.abs(dr.eigenvalues[real_r][:, None] - dc.eigenvalues[real_c][None, :])
        rows, _ = linear_sum_assignment(cost)
        keep = np.setdiff1d(np.arange(real_r.size), rows)
        new = real_r[keep]
    else:
        new = real_r
    norm = float(np.linalg.norm(M_real, 2))
    records = []
    for i, j in _pairing(dr.right[:, new]):
        a, b = int(new[i]), int(new[j])
        mu_a, mu_b = dr.eigenvalues[a], dr.eigenvalues[b]
        mid = 0.5 * (mu_a + mu_b)
        cplx = np.argsort(np.abs(dc.eigenvalues - mid))[:2]
        sep = min(abs(mu_a - mu_b), float(np.abs(dc.eigenvalues[cplx[0]] - dc.eigenvalues[cplx[1]])))
        peak = float(max(dr.condition[a], dr.condition[b], dc.condition[cplx].max()))
        ov = float(abs(np.vdot(dr.right[:, a], dr.right[:, b])))
        confirmed = bool(peak > cond_threshold and sep < sep_factor * max(1.0, norm))
        records.append(
            EPRecord(
                gamma_star=0.5 * (lo + hi),
                pair=(min(a, b), max(a, b)),
                mu_star=complex(mid.real, 0.0),
                min_separation=float(sep),
                peak_condition=peak,
                overlap=ov,
                kind=kind,
                bracket=(lo, hi),
                confirmed=confirmed,
            )
        )
    return records


# --------------------------------------------------------------------------
# mode expansion


def expand_initial(
    spec: SpectralDecomposition, R0: np.ndarray, cond_threshold: float = EP_CONDITION
) -> np.ndarray:
    """Coefficients ``c`` with ``R0 = sum_i c_i R_i``, via the dual left vectors."""
    worst = float(np.max(spec.condition))
    if not np.isfinite(worst) or worst > cond_threshold:
        raise NearExceptionalPointError(
            f"eigenvector condition number {worst:.3e} exceeds {cond_threshold:.1e}; "
            "propagate in the time domain instead"
        )
    R0 = np.asarray(R0)
    c = spec.left.conj().T @ R0
    resid = np.linalg.norm(spec.right @ c - R0)
    if resid > RESIDUAL_TOL * max(1.0, float(np.linalg.norm(R0))):
        raise NearExceptionalPointError(f"reconstruction residual {resid:.3e} too large")
    return c


def _pump_weight(mu: complex, beta: complex, t: float, zero_tol: float) -> complex:
    if abs(mu) <= zero_tol:
        if abs(beta) > zero_tol:
            warnings.warn(
                f"zero mode driven by pump component {beta:.3e}: linear growth in t",
                SecularGrowthWarning,
                stacklevel=3,
            )
        return beta * t
    return (np.exp(mu * t) - 1.0) * beta / mu


def mode_evolution(
    spec: SpectralDecomposition,
    b: np.ndarray,
    i: int,
    t: float,
    coefficient: complex = 1.0,
    zero_tol: float = ZERO_TOL,
) -> np.ndarray:
    """Contribution of mode ``i`` at time ``t`` starting from ``coefficient * R_i``.

    The amplitude obeys ``dc/dt = mu_i c + beta_i`` with ``beta_i`` the
    left-projected pump, giving ``c e^{mu t} + (e^{mu t} - 1) beta / mu``.
    """
    mu = spec.eigenvalues[i]
    beta = np.vdot(spec.left[:, i], b)
    amp = coefficient * np.exp(mu * t) + _pump_weight(mu, beta, t, zero_tol)
    return amp * spec.right[:, i]


def spectral_solution(
    spec: SpectralDecomposition, b: np.ndarray, R0: np.ndarray, t: float
) -> np.ndarray:
    """``R(t)`` for a constant generator as a sum over modes (real part)."""
    c = expand_initial(spec, R0)
    total = sum(mode_evolution(spec, b, i, t, c[i]) for i in range(len(spec)))
    return np.real(total)
