from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabledrift.besov import BesovIndex, besov_norm
from stabledrift.drift import (DriftField, DriftSpec, build_drift, drift_norm,
                               measured_regularity, mollification_scale, mollify, spatial_norm)
from stabledrift.grid import Grid, GridFunction

INF = np.inf
GRID = Grid(1, np.pi, 4096)


def same_field(a, b):
    return (np.array_equal(a.wavevectors, b.wavevectors) and np.array_equal(a.amplitudes, b.amplitudes)
            and np.array_equal(a.phases, b.phases) and np.array_equal(a.components, b.components)
            and a.time_exponent == b.time_exponent and a.T == b.T and a.delta == b.delta)


def difference(F, G):
    return replace(F, amplitudes=F.amplitudes - G.amplitudes)


def test_spec_validation():
    with pytest.raises(ValueError):
        DriftSpec(gamma=1.0)
    with pytest.raises(ValueError):
        DriftSpec(gamma=0.9, levels=3)
    with pytest.raises(ValueError):
        DriftSpec(gamma=0.9, r=4.0, time_exponent=0.25)
    DriftSpec(gamma=0.9, r=4.0, time_exponent=0.2)


@given(st.floats(0.05, 0.95), st.integers(4, 12), st.integers(0, 1000), st.floats(0.0, 0.3))
def test_lacunary_law(gamma, levels, seed, jitter):
    spec = DriftSpec(gamma=gamma, levels=levels, seed=seed, amplitude=0.7, jitter=jitter)
    F = build_drift(spec)
    j = F.levels
    law = 0.7 * 2.0 ** (j * (1 - spec.gamma_true))
    assert np.all(np.abs(F.amplitudes / law - 1) <= jitter + 1e-12)
    assert np.array_equal(np.abs(F.wavevectors[:, 0]), 2.0 ** j)
    assert np.all((F.phases >= 0) & (F.phases < 2 * np.pi))


def test_aligned_phases_keep_rng_stream():
    a = build_drift(DriftSpec(gamma=0.9, seed=3, aligned=True))
    b = build_drift(DriftSpec(gamma=0.9, seed=3))
    assert np.all(a.phases == 0) and np.array_equal(a.amplitudes, b.amplitudes)


def test_single_mode_regularity_scaling():
    idx = BesovIndex(-1 + 0.9, INF, INF, 1.5)
    th = [besov_norm(DriftField.single_mode([k]).on_grid(GRID).component(0), idx).thermic
          for k in (4, 8, 16, 32)]
    assert np.allclose(np.array(th[1:]) / th[:-1], 2 ** -0.1, rtol=0.05)


def test_measured_regularity():
    F = build_drift(DriftSpec(gamma=0.9, levels=8))
    assert measured_regularity(F, GRID, 1.5) == pytest.approx(-0.1, abs=0.1)


def test_time_profile_and_norm():
    F = build_drift(DriftSpec(gamma=0.9, T=0.5))
    assert np.all(F.sigma(np.linspace(0, 0.5, 7)) == 1.0)
    base = spatial_norm(F, GRID, BesovIndex(-0.1, INF, INF, 1.5))
    assert drift_norm(F, GRID, 2.0, INF, INF, -0.1, 1.5) == pytest.approx(base * 0.5 ** 0.5)
    assert drift_norm(F, GRID, INF, INF, INF, -0.1, 1.5) == pytest.approx(base)


def test_time_singularity_quadrature():
    a, r, T = 0.2, 2.0, 0.5
    F = build_drift(DriftSpec(gamma=0.9, r=r, time_exponent=a, T=T))
    assert F.sigma(0.0) == F.sigma(F.t_floor) == pytest.approx(1e-4 ** -a)
    base = spatial_norm(F, GRID, BesovIndex(-0.1, INF, INF, 1.5), t=T)
    exact = base * (T / (1 - a * r)) ** (1 / r)
    assert drift_norm(F, GRID, r, INF, INF, -0.1, 1.5) == pytest.approx(exact, rel=1e-3)


def test_drift_norm_trivial_cases():
    assert drift_norm(DriftField.zero(), GRID, INF, INF, INF, -0.1, 1.5) == 0.0
    F = DriftField.single_mode([8.0], amplitude=1.3)
    idx = BesovIndex(-0.1, INF, INF, 1.5)
    assert drift_norm(F, GRID, INF, INF, INF, -0.1, 1.5) == pytest.approx(spatial_norm(F, GRID, idx))
    assert drift_norm(F.scaled(2.0), GRID, INF, INF, INF, -0.1, 1.5) == pytest.approx(
        2 * drift_norm(F, GRID, INF, INF, INF, -0.1, 1.5))


def test_mollify_multiplier():
    F = DriftField.single_mode([16.0], amplitude=2.0)
    for m in (1, 3, 6):
        Fm = mollify(F, m, 1.5)
        assert Fm.amplitudes[0] == pytest.approx(2.0 * np.exp(-mollification_scale(m, 1.5) * 16 ** 1.5))
        assert Fm.delta == 2.0 ** (-1.5 * m)
    with pytest.raises(ValueError):
        mollify(F, 0, 1.5)
    with pytest.raises(ValueError):
        mollify(mollify(F, 2, 1.5), 2, 1.7)


def test_mollify_converges_to_raw():
    F = build_drift(DriftSpec(gamma=0.9))
    errs = [np.max(np.abs(mollify(F, m, 1.5).amplitudes / F.amplitudes - 1)) for m in (2, 6, 10, 14)]
    assert np.all(np.diff(errs) < 0)
    lowest = mollify(F, 14, 1.5).amplitudes[0] / F.amplitudes[0]
    assert 1 - lowest == pytest.approx(-np.expm1(-mollification_scale(14, 1.5)))


def test_mollified_field_is_smooth():
    F = build_drift(DriftSpec(gamma=0.9, levels=10))
    Fm = mollify(F, 4, 1.5)
    g = Grid(1, np.pi, 4096)
    raw, moll = (np.abs(g.fft(G.on_grid(g).values[0])) for G in (F, Fm))
    k = np.abs(g.freq)
    # spectrum stays on the lacunary lattice, each mode damped by exp(-delta k^alpha)
    assert moll[k == 64].max() / raw[k == 64].max() == pytest.approx(
        np.exp(-mollification_scale(4, 1.5) * 64 ** 1.5), rel=1e-8)
    assert moll[k == 512].max() <= 1e-14 * moll.max()
    assert np.all(moll[(k > 0) & ~np.isin(k, 2.0 ** np.arange(10))] <= 1e-12 * moll.max())


def _moll_gaps(levels, ms, regularity):
    F = build_drift(DriftSpec(gamma=0.9, levels=levels))
    g = Grid(1, np.pi, 2 ** (levels + 4))
    return np.array([drift_norm(difference(F, mollify(F, m, 1.5)), g, INF, INF, INF,
                                regularity, 1.5) for m in ms])


def test_mollification_convergence_strict():
    gaps = _moll_gaps(8, (2, 4, 6, 8), -1 + 0.9)
    assert np.all(np.diff(gaps) < 0)
    gaps = _moll_gaps(8, range(1, 9), -1 + 0.9 - 0.05)
    assert np.all(np.diff(gaps) < 0)


def test_mollification_convergence_ratio():
    # the final-to-initial ratio reaches 1e-2 once m exceeds the deepest level
    gaps = _moll_gaps(4, (1, 2, 4, 6, 8), -1 + 0.9)
    assert np.all(np.diff(gaps) < 0) and gaps[-1] <= 1e-2 * gaps[0]


def test_manifest_roundtrip(tmp_path):
    F = mollify(build_drift(DriftSpec(gamma=0.85, r=8.0, time_exponent=0.1, levels=6, d=2,
                                      seed=9, jitter=0.2)), 3, 1.5)
    path = tmp_path / "drift.json"
    F.save(path)
    G = DriftField.load(path)
    assert same_field(F, G) and G.spec == F.spec
    x = np.random.default_rng(0).uniform(-3, 3, (50, 2))
    assert np.array_equal(F.evaluate(x, 0.3), G.evaluate(x, 0.3))
    with pytest.raises(ValueError):
        DriftField.from_manifest({**F.to_manifest(), "version": 99})


def test_gate_on_drift():
    F = build_drift(DriftSpec(gamma=0.9))
    assert F.gate(1.5).weak_ok
    assert not build_drift(DriftSpec(gamma=0.7)).gate(1.5).weak_ok
    with pytest.raises(ValueError):
        DriftField.zero().gate(1.5)


def test_constant_and_evaluate():
    F = DriftField.constant([0.5, -1.0])
    v = F.evaluate(np.zeros((3, 2)))
    assert np.allclose(v, [[0.5, -1.0]] * 3)
    S = DriftField.single_mode([3.0], amplitude=2.0, phase=0.4)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(S.evaluate(x)[:, 0], 2 * np.cos(3 * x + 0.4))
    T = build_drift(DriftSpec(gamma=0.9, levels=8)).truncated(4)
    assert T.n_atoms == 5 and T.levels.max() == 4
