import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabledrift.grid import Grid, GridFunction
from stabledrift.kernel import (UnderResolvedGridError, default_grid, density_grid,
                                multiplier_derivative, sample_increment,
                                sample_symmetric_stable, verify_kernel_bounds)
from stabledrift.spectral import SpectralMeasure

# Gamma(1 + 1/1.5)/pi, cross-checked by scipy.integrate.quad of exp(-lam^1.5) over (0, inf)
P15_AT_ZERO = 0.28736801118

GAUSS = SpectralMeasure.isotropic(2.0, 1)
STABLE = SpectralMeasure.isotropic(1.5, 1)


def test_grid_lattice_and_roundtrip(rng):
    g = Grid(1, 3.0, 128)
    assert np.allclose(np.sort(g.freq), np.pi / g.L * np.arange(-64, 64))
    v = rng.normal(size=(3, 128))
    assert np.max(np.abs(g.ifft(g.fft(v)) - v)) <= 1e-10 * np.max(np.abs(v))
    g2 = Grid(2, 1.0, 64)
    w = rng.normal(size=g2.shape)
    assert np.max(np.abs(g2.ifft(g2.fft(w)) - w)) <= 1e-10 * np.max(np.abs(w))


def test_grid_rejects_small_or_odd():
    for n in (32, 100):
        with pytest.raises(ValueError):
            Grid(1, 1.0, n)


def test_gaussian_density():
    g = Grid(1, 16.0, 1024)
    k = density_grid(GAUSS, 1.0, g)
    assert k.density.values[512] == pytest.approx(1 / (2 * np.sqrt(np.pi)), abs=1e-12)
    exact = np.exp(-g.x ** 2 / 4) / np.sqrt(4 * np.pi)
    assert np.max(np.abs(k.density.values - exact)) <= 1e-6


def test_stable_density_at_origin():
    g = default_grid(STABLE, 1.0)
    k = density_grid(STABLE, 1.0, g)
    assert k.density.values[g.N // 2] == pytest.approx(P15_AT_ZERO, abs=1e-4)


def test_self_similarity(rng):
    t = 0.3
    # a small tail budget keeps the periodization offset far below 1e-6 relative
    g = default_grid(STABLE, 1.0, t_min=t, tail_mass=1e-6)
    k1, kt = density_grid(STABLE, 1.0, g), density_grid(STABLE, t, g)
    ys = rng.uniform(-3, 3, 100)
    lhs = np.array([kt.at([y]) for y in ys])
    rhs = t ** (-1 / 1.5) * np.array([k1.at([y * t ** (-1 / 1.5)]) for y in ys])
    assert np.max(np.abs(lhs / rhs - 1)) <= 1e-6


@pytest.mark.parametrize("mu", [STABLE, SpectralMeasure.cylindrical(1.5, [0.5, 0.8])])
def test_mass_symmetry_semigroup(mu):
    g = default_grid(mu, 1.0, t_min=0.25) if mu.d == 1 else Grid(2, 30.0, 512)
    p1, p2, p3 = (density_grid(mu, t, g) for t in (0.25, 0.5, 0.75))
    for k in (p1, p2, p3):
        assert abs(k.mass_defect) <= 1e-6
        assert k.negativity <= 1e-6
    flip = p1.density.values[(slice(None, None, -1),) * mu.d]
    # the grid runs from -L to L - h, so reflection maps index i to N - i
    flip = np.roll(flip, 1, axis=tuple(range(mu.d)))
    assert np.allclose(flip, p1.density.values, atol=1e-14 * p1.density.values.max())
    assert np.allclose(p1.symbol * p2.symbol, p3.symbol, rtol=1e-13, atol=1e-300)
    conv = g.ifft(g.fft(p1.density.values) * g.fft(p2.density.values)) * g.cell_volume
    assert np.max(np.abs(conv - p3.density.values)) <= 1e-8


def test_under_resolved_grid():
    with pytest.raises(UnderResolvedGridError):
        density_grid(STABLE, 1e-4, Grid(1, 50.0, 64))
    with pytest.raises(ValueError):
        density_grid(STABLE, 0.0, Grid(1, 50.0, 64))


def test_multiplier_derivatives():
    g = Grid(1, 16.0, 1024)
    k = density_grid(GAUSS, 1.0, g)
    assert multiplier_derivative(k, 0) is k.density
    d1 = multiplier_derivative(k, 1).values
    assert abs(d1[512]) <= 1e-15
    exact = -g.x / 2 * np.exp(-g.x ** 2 / 4) / np.sqrt(4 * np.pi)
    assert np.max(np.abs(d1 - exact)) <= 1e-6
    # |lam|^2 multiplier of the Gaussian is minus its second derivative
    lap = multiplier_derivative(k, "alpha").values
    exact2 = -(g.x ** 2 / 4 - 0.5) * np.exp(-g.x ** 2 / 4) / np.sqrt(4 * np.pi)
    assert np.max(np.abs(lap - exact2)) <= 1e-6


def test_kernel_bound_examples():
    rep = verify_kernel_bounds(GAUSS, [0.25, 0.5, 1.0], ell=1, ratio_bound=5.0)
    assert rep.ratio_ok and max(rep.space_ratio_sup) <= 5.0
    rep0 = verify_kernel_bounds(STABLE, [2.0 ** -k for k in range(5)], gamma_moment=0.0)
    assert abs(rep0.moment_slope) <= 1e-6
    rep1 = verify_kernel_bounds(STABLE, [2.0 ** -k for k in range(5)], gamma_moment=1.0)
    assert rep1.moment_slope == pytest.approx(1 / 1.5, abs=0.05)
    with pytest.raises(ValueError):
        verify_kernel_bounds(STABLE, [1.0], gamma_moment=1.5)


def test_gaussian_sampler_variance():
    x = sample_increment(GAUSS, 1.0, np.random.default_rng(1), size=100_000)[:, 0]
    se = np.sqrt(2.0) * 2.0 / np.sqrt(len(x))  # sd of the sample variance of N(0, 2)
    assert abs(x.var() - 2.0) <= 3 * se


def _ecf_ok(mu, t, lams, n=100_000, seed=2):
    x = sample_increment(mu, t, np.random.default_rng(seed), size=n)
    for lam in lams:
        lam = np.atleast_1d(lam)
        c = np.cos(x @ lam)
        target = np.exp(-t * mu.psi(lam))
        assert abs(c.mean() - target) <= 3 * c.std() / np.sqrt(n), (lam, c.mean(), target)


def test_isotropic_sampler_ecf():
    _ecf_ok(STABLE, 1.0, [0.5, 1.0, 2.0])


@pytest.mark.parametrize("mu", [
    SpectralMeasure.isotropic(1.5, 2),
    SpectralMeasure.isotropic(1.3, 2, total_mass=2.0),
    SpectralMeasure.cylindrical(1.7, [0.5, 1.5]),
    SpectralMeasure.atomic(1.5, [[1, 0], [-1, 0], [0.6, 0.8], [-0.6, -0.8]], [0.4, 0.4, 1, 1]),
])
def test_sampler_law_ten_frequencies(mu):
    rng = np.random.default_rng(7)
    lams = rng.normal(size=(10, 2))
    _ecf_ok(mu, 0.7, lams)


def test_cylindrical_coordinates_independent():
    mu = SpectralMeasure.cylindrical(1.5, [0.5, 0.5])
    x = sample_increment(mu, 1.0, np.random.default_rng(3), size=100_000)
    s = np.sign(x)
    corr = np.mean(s[:, 0] * s[:, 1])
    assert abs(corr) <= 3 / np.sqrt(len(x))


@given(st.floats(1.1, 1.95), st.integers(0, 2 ** 31))
def test_symmetric_stable_is_symmetric(alpha, seed):
    x = sample_symmetric_stable(alpha, 4000, np.random.default_rng(seed))
    assert np.all(np.isfinite(x))
    assert abs(np.mean(np.sign(x))) <= 5 / np.sqrt(len(x))


def test_grid_function_ops():
    g = Grid(1, np.pi, 64)
    f = GridFunction.from_callable(g, np.sin)
    assert np.allclose((f + f - f * 2).values, 0.0)
    assert np.allclose((-f).values, -np.sin(g.x))
