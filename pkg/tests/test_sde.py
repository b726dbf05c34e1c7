import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabledrift.drift import DriftField, DriftSpec, build_drift, mollify
from stabledrift.grid import Grid, GridFunction
from stabledrift.kernel import density_grid
from stabledrift.regularity import RegularityParams
from stabledrift.sde import (DriftIncrementRule, drift_bound_report, drift_identification,
                             euler_paths, fit_slope, krylov_check, law_distances,
                             moment_scaling, pathwise_gap, riemann_sum, simulate_noise,
                             young_riemann, conditional_mean_residual)
from stabledrift.spectral import SpectralMeasure

MU = SpectralMeasure.isotropic(1.5, 1)
PARAMS = RegularityParams(1.5, 1, np.inf, np.inf, np.inf, 0.9, 0.02)


def lacunary(levels=6, amplitude=0.5, T=1.0, seed=0):
    return build_drift(DriftSpec(0.9, levels=levels, amplitude=amplitude, T=T, seed=seed))


# -- drift increment -------------------------------------------------------

def test_constant_drift_increment():
    rule = DriftIncrementRule(DriftField.constant([0.7]), MU)
    x = np.linspace(-3, 3, 11)
    assert np.allclose(rule(0.1, x, 0.25), 0.7 * 0.25, rtol=1e-14)


@pytest.mark.parametrize("k", [1.0, 4.0, 32.0])
def test_single_mode_increment(k):
    rule = DriftIncrementRule(DriftField.single_mode([k]), MU)
    h, psi = 0.1, k ** 1.5
    x = np.linspace(-np.pi, np.pi, 7)
    expect = np.cos(k * x) * -np.expm1(-h * psi) / psi
    assert np.allclose(rule(0.0, x, h)[:, 0], expect, rtol=1e-13, atol=1e-16)


def test_odd_drift_vanishes_at_origin():
    rule = DriftIncrementRule(DriftField.single_mode([3.0], phase=-np.pi / 2), MU)
    assert abs(rule(0.0, 0.0, 0.1)[0]) <= 1e-16


def test_increment_matches_grid_convolution():
    # oracle: int_0^h (F * p_{s + delta})(x) ds with real-space densities and
    # Gauss-Legendre in s; mollification is itself convolution with p_delta
    raw = lacunary(levels=5)
    F = mollify(raw, 4, 1.5)
    g = Grid(1, np.pi, 4096)
    fvals = raw.on_grid(g).values[0]
    h = 0.05
    nodes, weights = np.polynomial.legendre.leggauss(24)
    s_nodes = 0.5 * h * (nodes + 1)
    acc = np.zeros(g.N)
    for s, w in zip(s_nodes, weights):
        p = density_grid(MU, s + F.delta, g).density.values
        conv = np.real(g.ifft(g.fft(fvals) * g.fft(p))) * g.cell_volume
        acc += 0.5 * h * w * conv
    rule = DriftIncrementRule(F, MU)
    direct = rule(0.0, g.x, h)[:, 0]
    assert np.max(np.abs(direct - acc)) <= 1e-6


def test_increment_guards():
    rule = DriftIncrementRule(DriftField.constant([1.0], T=0.5), MU)
    with pytest.raises(ValueError):
        rule(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        rule(0.4, 0.0, 0.2)
    with pytest.raises(ValueError):
        DriftIncrementRule(DriftField.constant([1.0, 1.0]), MU)


def test_time_dependent_weights_closed_form():
    # sigma(t) = t^{-a} on the Gauss rule against scipy quadrature
    from scipy.integrate import quad
    spec = DriftSpec(0.9, r=4.0, time_exponent=0.2, levels=4, T=1.0)
    F = build_drift(spec)
    rule = DriftIncrementRule(F, MU)
    v, h = 0.25, 0.125
    w = rule.time_weights(v, h)
    for psi, wi in zip(rule.psi_k, w):
        ref = quad(lambda s: (v + s) ** -0.2 * np.exp(-s * psi), 0, h)[0]
        assert wi == pytest.approx(ref, rel=1e-10)


def test_drift_bound_constant_slope_one():
    rep = drift_bound_report(DriftIncrementRule(DriftField.constant([0.3]), MU), PARAMS)
    assert rep.slope == pytest.approx(1.0, abs=1e-12) and rep.passed


def test_drift_bound_lacunary_deep_regime():
    # at moderate h the sup carries a log(1/h) factor; deep levels and small h expose the power
    F = build_drift(DriftSpec(0.9, levels=30, amplitude=0.5, aligned=True))
    h = [2.0 ** -k for k in range(14, 21)]
    rep = drift_bound_report(DriftIncrementRule(F, MU), PARAMS, h_list=h,
                             sample_points=np.array([0.0]))
    assert rep.predicted == pytest.approx(0.5 + PARAMS.chi)
    assert rep.passed


# -- paths -----------------------------------------------------------------

def test_zero_drift_paths_are_stable():
    ens = euler_paths(0.0, DriftIncrementRule(DriftField.zero(), MU), MU, 1.0, 2.0 ** -4,
                      20_000, seed=3)
    x = ens.X[-1, :, 0]
    for lam in (0.5, 1.0, 2.0):
        c = np.cos(lam * x)
        assert abs(c.mean() - np.exp(-lam ** 1.5)) <= 4 * c.std() / np.sqrt(len(x))
    assert np.all(ens.dF == 0)


def test_constant_drift_mean():
    ens = euler_paths(0.5, DriftIncrementRule(DriftField.constant([0.8]), MU), MU, 0.5,
                      2.0 ** -6, 4000, seed=1)
    # the compensated path is deterministic: X - W = x0 + c t
    assert np.allclose(ens.X[..., 0] - ens.W[..., 0], 0.5 + 0.8 * ens.times[:, None],
                       atol=1e-12)


def test_euler_seed_determinism_and_start():
    rule = DriftIncrementRule(lacunary(), MU)
    a = euler_paths([0.2], rule, MU, 0.25, 2.0 ** -6, 300, seed=9)
    b = euler_paths([0.2], rule, MU, 0.25, 2.0 ** -6, 300, seed=9)
    c = euler_paths([0.2], rule, MU, 0.25, 2.0 ** -6, 300, seed=10)
    assert np.array_equal(a.X, b.X) and not np.array_equal(a.X, c.X)
    assert np.all(a.X[0] == 0.2)
    assert a.seed_manifest["seed"] == 9 and a.steps == 16


def test_noise_blocks_are_independent_of_path_count():
    n1, _ = simulate_noise(MU, 0.01, 8, 1500, seed=4, block=1000)
    n2, _ = simulate_noise(MU, 0.01, 8, 1000, seed=4, block=1000)
    assert np.array_equal(n1[:, :1000], n2)


def test_euler_guards():
    rule = DriftIncrementRule(lacunary(), MU)
    with pytest.raises(ValueError, match="integer"):
        euler_paths(0.0, rule, MU, 0.25, 0.3, 10)
    bad = RegularityParams(1.5, 1, np.inf, np.inf, np.inf, 0.7, 0.02)
    with pytest.raises(ValueError, match="gate"):
        euler_paths(0.0, rule, MU, 0.25, 2.0 ** -4, 10, params=bad)
    euler_paths(0.0, rule, MU, 0.25, 2.0 ** -4, 10, params=bad, override=True)
    with pytest.raises(ValueError, match="shape"):
        euler_paths(0.0, rule, MU, 0.25, 2.0 ** -4, 10, noise=np.zeros((3, 10, 1)))


def test_path_csv(tmp_path):
    ens = euler_paths(0.0, DriftIncrementRule(DriftField.zero(), MU), MU, 0.25, 2.0 ** -3, 3)
    ens.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,path,x1" and len(lines) == 1 + 3 * 3


def test_moment_scaling_exact_zero():
    ens = euler_paths(0.0, DriftIncrementRule(DriftField.zero(), MU), MU, 0.25, 2.0 ** -8, 200)
    rep = moment_scaling(ens, PARAMS)
    assert rep.exact_zero and rep.passed
    with pytest.raises(ValueError):
        moment_scaling(ens, PARAMS, q=1.6)


def test_moment_scaling_constant_drift_slope_one():
    ens = euler_paths(0.0, DriftIncrementRule(DriftField.constant([1.0]), MU), MU, 0.25,
                      2.0 ** -8, 50)
    rep = moment_scaling(ens, PARAMS)
    assert rep.slope == pytest.approx(1.0, abs=1e-10)


# -- Riemann sums ----------------------------------------------------------

@given(st.integers(2, 40), st.integers(0, 2 ** 31))
def test_riemann_sum_by_parts(n, seed):
    rng = np.random.default_rng(seed)
    psi, Y = rng.normal(size=(n, 3)), rng.normal(size=(n + 1, 3))
    direct = np.sum(psi * np.diff(Y, axis=0), axis=0)
    assert np.allclose(riemann_sum(psi, Y), direct, rtol=1e-10, atol=1e-10)


def test_riemann_constant_psi_telescopes():
    Y = np.cumsum(np.random.default_rng(0).normal(size=(65, 4)), axis=0)
    assert np.array_equal(riemann_sum(np.full((64, 4), 2.0), Y), 2.0 * (Y[-1] - Y[0]))


def test_young_constant_psi_gaps_vanish():
    rule = DriftIncrementRule(DriftField.constant([0.4]), MU)
    ens = euler_paths(0.0, rule, MU, 0.25, 2.0 ** -8, 200, seed=2)
    one = lambda t, x: np.ones_like(x)
    for kind in ("X", "W"):
        assert young_riemann(ens, one, kind).exact
    rep = young_riemann(ens, one, "F", rule=rule)
    assert np.max(rep.gaps) <= 1e-6
    with pytest.raises(ValueError):
        young_riemann(ens, one, "F")
    with pytest.raises(ValueError):
        young_riemann(ens, one, "Z")


# -- identification and uniqueness -----------------------------------------

def test_identification_zero_test_function():
    F = lacunary()
    ens = euler_paths(0.0, DriftIncrementRule(F, MU), MU, 0.25, 2.0 ** -6, 100)
    gaps = drift_identification(F, MU, ens, psi_fn=lambda t, x: np.zeros_like(x))
    assert np.all(gaps == 0)


def test_identification_gap_decreases():
    F = lacunary(levels=4)
    ens = euler_paths(0.0, DriftIncrementRule(F, MU), MU, 0.25, 2.0 ** -8, 400)
    gaps = drift_identification(F, MU, ens)
    assert gaps[-1] < gaps[0]


def test_pathwise_gap_trivial_cases():
    F = lacunary()
    assert pathwise_gap(F, MU, 4, 4, T=0.0625, n_paths=50) == 0.0
    assert pathwise_gap(DriftField.zero(), MU, 2, 8, T=0.0625, n_paths=50) == 0.0
    with pytest.raises(ValueError):
        pathwise_gap(F, SpectralMeasure.isotropic(1.5, 2), 2, 4)


def test_pathwise_gap_shrinks_with_m():
    F = lacunary(levels=8, T=0.1)
    g = [pathwise_gap(F, MU, m, 2 * m, T=0.1, n_paths=500, seed=1) for m in (2, 4, 8)]
    assert g[2] < g[0]


def test_law_distances_decrease():
    F = lacunary(levels=8)
    w = law_distances(F, MU, T=0.125, n_paths=2000)
    assert w.shape == (3,) and w[-1] < w[0]


# -- Krylov and conditional mean -------------------------------------------

def test_krylov_ratios_bounded():
    ens = euler_paths(0.0, DriftIncrementRule(lacunary(), MU), MU, 0.25, 2.0 ** -8, 2000)
    rep = krylov_check(ens, PARAMS)
    assert rep.passed and rep.spread <= 5.0
    assert np.all(rep.norms > 0)


def test_krylov_time_integrability_guard():
    p = RegularityParams(1.5, 1, np.inf, np.inf, 1.2, 0.9, 0.02)
    ens = euler_paths(0.0, DriftIncrementRule(DriftField.zero(), MU), MU, 0.25, 2.0 ** -4, 10)
    with pytest.raises(ValueError):
        krylov_check(ens, p)


def test_conditional_mean_constant_drift_exact():
    rule = DriftIncrementRule(DriftField.constant([0.6]), MU)
    ens = euler_paths(0.0, rule, MU, 0.25, 2.0 ** -8, 500)
    rep = conditional_mean_residual(ens, rule, PARAMS)
    assert np.max(rep.residuals) <= 1e-12 and rep.passed


def test_fit_slope_exact_power():
    x = 2.0 ** -np.arange(1, 8)
    s, c, r2 = fit_slope(x, 3 * x ** 0.7)
    assert s == pytest.approx(0.7) and c == pytest.approx(np.log(3)) and r2 == pytest.approx(1)
