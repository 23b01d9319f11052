import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from openstirap.appendix import compiled_affine
from openstirap.bloch import from_bloch, physicality, random_density_matrix, to_bloch
from openstirap.liouvillian import LiouvillianAffine
from openstirap.spectral import (
    ContinuationWarning,
    NearExceptionalPointError,
    SecularGrowthWarning,
    conjugate_pairing_error,
    eigendecompose,
    eigenvector_physicality,
    ep_scan,
    expand_initial,
    liouvillian_gap,
    max_physical_length,
    mode_evolution,
    spectral_solution,
    steady_state,
    track_branches,
)
from openstirap.stirap import dark_bloch

SQ2 = math.sqrt(2.0)

# Exceptional points for G1 = G2 = 1, Delta = 0, frozen from the scan and
# cross-checked against the discriminant of the characteristic polynomial
# (closed forms where the factor is quadratic; the cubic factor of case (a)
# has 9 x^3 - 824 x^2 + 256 x - 8192 = 0 with x = gamma^2).
EP_DEPHASING = (4 * SQ2 / 3, 4 * SQ2, 9.557889749308063)
EP_EMISSION = (2 * SQ2, 2 * SQ2, 4.601623634400567)


def builder(case):
    return lambda g: compiled_affine(case, 1.0, 1.0, 0.0, g)


def test_cubic_root_frozen_value():
    x = np.roots([9, -824, 256, -8192])
    x = x[np.abs(x.imag) < 1e-12].real
    assert math.sqrt(x.max()) == pytest.approx(EP_DEPHASING[2], abs=1e-12)
    x = np.roots([1, -24, 84, -512])
    x = x[np.abs(x.imag) < 1e-12].real
    assert math.sqrt(x.max()) == pytest.approx(EP_EMISSION[2], abs=1e-12)


@pytest.mark.parametrize("case", ["dephasing", "emission"])
def test_zero_coupling_spectrum(case):
    dec = eigendecompose(builder(case)(0.0).M)
    mu = dec.eigenvalues
    assert np.sum(np.abs(mu) < 1e-10) == 2
    assert np.max(np.abs(mu.real)) < 1e-10
    assert conjugate_pairing_error(mu) < 1e-10
    assert liouvillian_gap(dec) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(2, 9))
def test_skew_matrix_spectrum(seed, n):
    A = np.random.default_rng(seed).normal(size=(n, n))
    dec = eigendecompose(A - A.T)
    assert np.max(np.abs(dec.eigenvalues.real)) < 1e-10


@given(st.floats(0.01, 20), st.sampled_from(["dephasing", "emission"]))
def test_decomposition_invariants(g, case):
    dec = eigendecompose(builder(case)(g).M)
    assert dec.residuals().max() < 1e-9
    assert conjugate_pairing_error(dec.eigenvalues) < 1e-10
    assert dec.eigenvalues.real.max() <= 1e-10
    if dec.condition.max() < 1e4:
        np.testing.assert_allclose(dec.left.conj().T @ dec.right, np.eye(8), atol=1e-8)
    if case == "dephasing":
        assert dec.eigenvalues.real.max() < 0
    assert liouvillian_gap(dec) > 0


def test_non_square_rejected():
    with pytest.raises(ValueError):
        eigendecompose(np.zeros((2, 3)))


def test_steady_states():
    ss = steady_state(builder("dephasing")(1.0))
    assert not ss.singular
    np.testing.assert_allclose(ss.bloch, 0, atol=1e-10)
    ss = steady_state(builder("emission")(1.0))
    assert not ss.singular
    np.testing.assert_allclose(ss.bloch, dark_bloch(math.pi / 4), atol=1e-9)
    ss = steady_state(builder("dephasing")(0.0))
    assert ss.singular and ss.null_space.shape[1] == 2
    P = ss.null_space @ ss.null_space.T
    d = dark_bloch(math.pi / 4)
    np.testing.assert_allclose(P @ d, d, atol=1e-10)


@given(st.floats(0.05, 5), st.floats(0.1, 2), st.floats(0.1, 2), st.sampled_from(["dephasing", "emission"]))
def test_steady_state_fixed_point(g, G1, G2, case):
    gen = compiled_affine(case, G1, G2, 0.0, g)
    ss = steady_state(gen)
    assert not ss.singular
    assert np.linalg.norm(gen.M @ ss.bloch + gen.b) < 1e-9


def test_ep_scan_dephasing():
    eps = ep_scan(builder("dephasing"), np.linspace(0, 20, 201))
    assert len(eps) == 3
    for e, ref in zip(eps, EP_DEPHASING):
        assert e.gamma_star == pytest.approx(ref, abs=1e-9)
        assert e.kind == "forward" and e.confirmed
        assert e.overlap > 0.999
        assert e.peak_condition > 1e6
    for g in np.linspace(EP_DEPHASING[-1] + 1e-6, 20, 50):
        assert np.all(eigendecompose(builder("dephasing")(g).M).is_real())


def test_ep_scan_emission():
    eps = ep_scan(builder("emission"), np.linspace(0, 20, 201))
    got = sorted(e.gamma_star for e in eps)
    np.testing.assert_allclose(got, EP_EMISSION, atol=1e-9)
    assert all(e.kind == "forward" and e.confirmed and e.overlap > 0.999 for e in eps)


def test_ep_scan_trivial_grids():
    assert ep_scan(builder("dephasing"), [0.0, 0.0, 0.0]) == []
    with pytest.raises(ValueError):
        ep_scan(builder("dephasing"), [0.0, 1.0])


@pytest.mark.parametrize("case", ["dephasing", "emission"])
def test_branch_tracking(case):
    grid = np.linspace(0, 20, 201)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ContinuationWarning)
        tr = track_branches(builder(case), grid)
    assert tr.eigenvalues.shape == (201, 8)
    assert tr.ambiguous == []
    assert tr.eigenvalues.real.max() <= 1e-10
    rows = list(tr.rows())
    assert len(rows) == 201 * 8 and len(rows[0]) == 6
    # continuation is at least as smooth as naive sorting
    naive = np.array([eigendecompose(builder(case)(g).M).eigenvalues for g in grid])
    tv = lambda w: np.abs(np.diff(w, axis=0)).sum()
    assert tv(tr.eigenvalues) <= tv(naive) + 1e-9


def oscillating(g):
    return LiouvillianAffine(np.diag([np.sin(6 * g), 0.05 - np.sin(6 * g), 0.3 * np.cos(4 * g)]), np.zeros(3))


def test_branch_tracking_coarse_grid_warns():
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    with pytest.warns(ContinuationWarning, match="ambiguous"):
        coarse = track_branches(oscillating, grid, max_halvings=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ContinuationWarning)
        refined = track_branches(oscillating, grid)
    assert len(refined.ambiguous) < len(coarse.ambiguous)


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_max_physical_length_vs_bisection(v):
    v = np.asarray(v)
    if np.linalg.norm(v) < 1e-3:
        return
    d = v / np.linalg.norm(v)
    s = max_physical_length(d)
    assert 0.5 - 1e-12 <= s <= 2.0 + 1e-12  # inscribed and circumscribed radii for D = 3
    lo, hi = 0.0, 4.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if physicality(mid * d, tol=0.0)[0] else (lo, mid)
    assert s == pytest.approx(lo, abs=1e-9)


def test_eigenvector_physicality():
    dec = eigendecompose(builder("dephasing")(1.0).M)
    flags = eigenvector_physicality(dec)
    real = dec.is_real()
    assert all(not f[0] for f, r in zip(flags, real) if not r)
    assert all(f[1] > 0 for f, r in zip(flags, real) if r)


def test_expansion():
    dec = eigendecompose(builder("dephasing")(1.0).M)
    for k in range(8):
        c = expand_initial(dec, dec.right[:, k])
        np.testing.assert_allclose(c, np.eye(8)[k], atol=1e-10)
    R0 = to_bloch(random_density_matrix(np.random.default_rng(3), 3))
    c = expand_initial(dec, R0)
    np.testing.assert_allclose((dec.right @ c).real, R0, atol=1e-9)
    np.testing.assert_allclose(spectral_solution(dec, np.zeros(8), R0, 0.0), R0, atol=1e-9)
    assert np.linalg.norm(spectral_solution(dec, np.zeros(8), R0, 60.0)) < 1e-6


def test_expansion_refused_near_ep():
    dec = eigendecompose(builder("dephasing")(EP_DEPHASING[0]).M)
    with pytest.raises(NearExceptionalPointError):
        expand_initial(dec, np.zeros(8) + 0.1)


def test_mode_evolution():
    gen = builder("emission")(1.0)
    dec = eigendecompose(gen.M)
    i = 0
    np.testing.assert_allclose(mode_evolution(dec, gen.b, i, 0.0), dec.right[:, i], atol=1e-15)
    mu = dec.eigenvalues[i]
    np.testing.assert_allclose(
        mode_evolution(dec, np.zeros(8), i, 2.5), np.exp(mu * 2.5) * dec.right[:, i], atol=1e-14
    )
    beta = np.vdot(dec.left[:, i], gen.b)
    np.testing.assert_allclose(
        mode_evolution(dec, gen.b, i, 1e4), -beta / mu * dec.right[:, i], atol=1e-10
    )


def test_secular_growth_flag():
    gen = LiouvillianAffine(np.diag([0.0, -1.0]), np.array([0.5, 0.0]))
    dec = eigendecompose(gen.M)
    with pytest.warns(SecularGrowthWarning):
        v = mode_evolution(dec, gen.b, 0, 4.0, coefficient=0.0)
    np.testing.assert_allclose(np.abs(v), [2.0, 0.0], atol=1e-15)
