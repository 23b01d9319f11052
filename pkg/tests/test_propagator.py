import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from openstirap.appendix import compiled_affine
from openstirap.bloch import purity, to_bloch
from openstirap.liouvillian import LiouvillianAffine
from openstirap.propagator import (
    IntegratorConfig,
    StiffnessError,
    Trajectory,
    evolve_bloch,
    evolve_density,
    observables,
    random_pure_state,
)
from openstirap.spectral import eigendecompose, spectral_solution
from openstirap.stirap import (
    ConstantCouplings,
    PulseSchedule,
    StirapGenerator,
    adiabatic_frame,
    dark_bloch,
    dark_state,
    projector,
)

TIGHT = IntegratorConfig(1e-10, 1e-12)


def pulsed(case, gamma, a):
    s = PulseSchedule(a=a)
    return StirapGenerator(case, gamma, s), TIGHT.with_max_step(s.width / 4)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=-1)
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=0)
    assert IntegratorConfig(max_step=3).with_max_step(5).max_step == 3


def test_observables_examples():
    o = observables(np.zeros(8))
    assert o.P1 == pytest.approx(1 / 3) and o.P2 == pytest.approx(1 / 3) and o.Z == pytest.approx(0)
    o = observables(dark_bloch(0))
    assert (o.P1, o.P2, o.P3, o.Z) == pytest.approx((1, 0, 0, 1), abs=1e-15)
    o = observables(dark_bloch(math.pi / 4))
    assert (o.P1, o.P2, o.P3, o.Z, o.purity) == pytest.approx((0.5, 0, 0.5, 0, 1), abs=1e-15)


def test_random_pure_state():
    R = random_pure_state(7)
    assert abs(np.linalg.norm(R) - 1) < 1e-12
    np.testing.assert_array_equal(R, random_pure_state(7))
    assert not np.allclose(R, random_pure_state(8))
    mean = np.mean([random_pure_state(s) for s in range(10_000)], axis=0)
    assert np.all(np.abs(mean) < 0.05)


def test_closed_transfer():
    gen, cfg = pulsed("closed", 0.0, 1.0)
    tr = evolve_bloch(gen, dark_bloch(0), cfg=cfg)
    assert len(tr.times) == 1001 and tr.times[0] == -100 and tr.times[-1] == 100
    assert tr.P3[-1] > 0.99
    assert tr.P2.max() > 1e-3 and tr.P2[-1] < 1e-3
    assert tr.converged()
    np.testing.assert_allclose(tr.purity, 1, atol=1e-9)
    assert tr.min_eigenvalues.min() > -1e-6
    np.testing.assert_allclose(tr.populations.sum(axis=1), 1, atol=1e-14)


def test_relaxes_to_maximally_mixed():
    gen = StirapGenerator("dephasing", 1.0, ConstantCouplings(1, 1, 0))
    tr = evolve_bloch(gen, random_pure_state(11), (0, 100), TIGHT, samples=101)
    norm = np.linalg.norm(tr.states, axis=1)
    assert norm[-1] < 1e-9
    assert tr.purity[-1] == pytest.approx(1 / 3, abs=1e-12)
    # slowest mode decays at the gap gamma / 4
    rate = -np.polyfit(tr.times[40:], np.log(norm[40:]), 1)[0]
    assert rate == pytest.approx(0.25, abs=0.02)


@settings(max_examples=10)
@given(st.sampled_from(["dephasing", "emission"]), st.floats(0.05, 6), st.integers(0, 1000))
def test_matches_mode_expansion(case, gamma, seed):
    gen = compiled_affine(case, 1.0, 1.0, 0.0, gamma)
    dec = eigendecompose(gen.M)
    if dec.condition.max() > 1e4:  # too close to an exceptional point for a mode sum
        return
    R0 = random_pure_state(seed)
    t = np.array([0.0, 0.7, 3.0, 9.0])
    tr = evolve_bloch(lambda _t: gen, R0, (0.0, 9.0), TIGHT, samples=t)
    for k, tk in enumerate(t):
        np.testing.assert_allclose(tr.states[k], spectral_solution(dec, gen.b, R0, tk), atol=1e-7)


@settings(max_examples=8)
@given(
    st.sampled_from(["closed", "dephasing", "emission", "coherent"]),
    st.floats(0, 2),
    st.floats(0.1, 2),
    st.integers(0, 1000),
)
def test_density_route_agrees(case, gamma, a, seed):
    gen, cfg = pulsed(case, gamma, a)
    rho0 = projector(np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))[0][:, 0])
    tb = evolve_bloch(gen, to_bloch(rho0), cfg=cfg, samples=201)
    td = evolve_density(gen.model, rho0, cfg=cfg, samples=201)
    assert np.abs(tb.states - td.states).max() < 1e-8
    assert td.meta["trace_drift"] < 1e-10
    assert tb.purity.max() <= 1 + 1e-9 and tb.min_eigenvalues.min() >= -1e-6


def test_unitary_density_route_keeps_purity():
    gen, cfg = pulsed("closed", 0.0, 0.7)
    td = evolve_density(gen.model, projector(dark_state(0.3)), cfg=cfg)
    np.testing.assert_allclose(td.purity, 1, atol=1e-9)


def test_dark_state_stationary_under_emission():
    gen = StirapGenerator("emission", 1.0, ConstantCouplings(1, 1, 0))
    rho = projector(adiabatic_frame(1, 1, 0).dark)
    td = evolve_density(gen.model, rho, (0, 30), TIGHT, samples=31)
    tb = evolve_bloch(gen, to_bloch(rho), (0, 30), TIGHT, samples=31)
    assert np.abs(td.states - dark_bloch(math.pi / 4)).max() < 1e-9
    assert np.abs(tb.states - dark_bloch(math.pi / 4)).max() < 1e-9


def test_halving_tolerance():
    gen, _ = pulsed("dephasing", 0.5, 0.5)
    for tol in (1e-6, 1e-8):
        cfg = IntegratorConfig(tol, tol * 1e-2, max_step=1.25)
        p1 = evolve_bloch(gen, dark_bloch(0), cfg=cfg, samples=2).P3[-1]
        cfg2 = IntegratorConfig(tol / 2, tol * 0.5e-2, max_step=1.25)
        p2 = evolve_bloch(gen, dark_bloch(0), cfg=cfg2, samples=2).P3[-1]
        assert abs(p1 - p2) < 10 * tol


@pytest.mark.parametrize("method", ["DOP853", "RK45"])
def test_error_tracks_tolerance(method):
    gen, _ = pulsed("dephasing", 0.5, 0.5)
    span = (-60.0, 60.0)
    ref = evolve_bloch(gen, dark_bloch(0), span, IntegratorConfig(1e-13, 1e-15, max_step=1.25), samples=2)
    tols = np.array([1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    errs = []
    for tol in tols:
        cfg = IntegratorConfig(tol, tol * 1e-2, max_step=1.25, method=method)
        errs.append(np.abs(evolve_bloch(gen, dark_bloch(0), span, cfg, samples=2).states[-1] - ref.states[-1]).max())
    errs = np.array(errs)
    slope = np.polyfit(np.log(tols), np.log(errs), 1)[0]
    assert 0.6 < slope < 1.2
    assert np.all(errs < 100 * tols)


def test_stiffness_reported():
    def blowup(t):
        return LiouvillianAffine(np.array([[1.0 / (1.0 - t)]]), np.zeros(1))

    with pytest.raises(StiffnessError) as info:
        evolve_bloch(blowup, np.array([1.0]), (0.0, 2.0), IntegratorConfig(), samples=3)
    assert 0.9 < info.value.t < 1.0
    assert "step size" in str(info.value)


def test_bad_span():
    gen, cfg = pulsed("closed", 0.0, 1.0)
    with pytest.raises(ValueError):
        evolve_bloch(gen, dark_bloch(0), (1.0, 1.0), cfg)
    with pytest.raises(ValueError):
        evolve_bloch(gen, dark_bloch(0), (0.0, 1.0), cfg, samples=np.array([0.5, 0.2]))


def test_csv_export():
    gen, cfg = pulsed("dephasing", 0.3, 0.5)
    tr = evolve_bloch(gen, dark_bloch(0), cfg=cfg, samples=11)
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", *(f"r{i}" for i in range(1, 9)), "P1", "P2", "P3", "Z", "purity"]
    assert len(rows) == 12
    last = np.array(rows[-1], dtype=float)
    assert last[11] == pytest.approx(tr.P3[-1]) and last[-1] == pytest.approx(purity(tr.states[-1]))
    buf = io.StringIO()
    assert tr.to_csv(buf) is None and buf.getvalue() == tr.to_csv()


def test_trajectory_length_check():
    with pytest.raises(ValueError):
        Trajectory(np.zeros(3), np.zeros((2, 8)))
