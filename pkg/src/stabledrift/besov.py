"""Thermic Besov norms, duality pairings and Hoelder-exponent estimation.

The norm of f in B^theta_{l,m} is computed as

    ||phi(D) f||_{L^l} + ( int_0^1 dv/v [v^{n - theta/a} ||d_v^n p~(v) * f||_{L^l}]^m )^{1/m}

with p~ the isotropic stable density of index a, phi a smooth bump of
support |lam| <= 1 and phi(0) = 1, and n the smallest integer > theta/a.
The second summand is the *thermic part*.  The v-integral runs over the
geometric grid v_k = 2^{-k/4} down to ``v_min``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .grid import Grid, GridFunction
from .kernel import density_grid, derivative_symbol
from .spectral import SpectralMeasure

__all__ = [
    "BesovIndex",
    "BesovNormBreakdown",
    "BesovResolutionError",
    "conjugate",
    "lowpass_cutoff",
    "besov_norm",
    "thermic_profile",
    "duality_pairing",
    "duality_check",
    "duality_constant",
    "HolderFit",
    "holder_exponent",
    "ProductBoundReport",
    "verify_product_bound",
    "write_norm_table",
]

V_MIN = 1e-6
V_RATIO = 2.0 ** -0.25
ACTIVE_FLOOR = 1e-12


class BesovResolutionError(ValueError):
    """The smallest thermic time v_min cannot resolve the highest active frequency."""


def conjugate(p: float) -> float:
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class BesovIndex:
    """Regularity ``theta``, integrability ``l``, summability ``m``, index ``alpha``."""

    theta: float
    l: float = np.inf
    m: float = np.inf
    alpha: float = 2.0
    n: Optional[int] = None

    def __post_init__(self):
        if self.l < 1 or self.m < 1:
            raise ValueError("integrability and summability indices must be >= 1")
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError("alpha must lie in (0, 2]")
        n = self.n
        if n is None:
            n = max(1, int(np.floor(self.theta / self.alpha)) + 1)
            object.__setattr__(self, "n", n)
        if n < 1 or not n > self.theta / self.alpha:
            raise ValueError(f"thermic order n={n} must exceed theta/alpha")

    def dual(self) -> "BesovIndex":
        return BesovIndex(-self.theta, conjugate(self.l), conjugate(self.m), self.alpha)


@dataclass
class BesovNormBreakdown:
    lowpass: float
    thermic: float
    v_grid: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    convention: str = "total = lowpass + thermic"

    @property
    def total(self) -> float:
        return self.lowpass + self.thermic


def lowpass_cutoff(grid: Grid) -> np.ndarray:
    """Smooth bump exp(1 - 1/(1 - |lam|^2)) on |lam| < 1, zero outside."""
    r2 = grid.wavenorm ** 2
    out = np.zeros(grid.shape)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _lebesgue(values: np.ndarray, grid: Grid, l: float) -> np.ndarray:
    axes = tuple(range(-grid.d, 0))
    if np.isinf(l):
        return np.max(np.abs(values), axis=axes)
    return (np.sum(np.abs(values) ** l, axis=axes) * grid.cell_volume) ** (1.0 / l)


def v_grid(v_min: float = V_MIN, ratio: float = V_RATIO) -> np.ndarray:
    k = int(np.floor(np.log(v_min) / np.log(ratio) + 1e-9))
    return np.sort(ratio ** np.arange(k + 1))


def thermic_profile(f: GridFunction, idx: BesovIndex, v: np.ndarray, check: bool = True):
    """v^{n - theta/a} ||d_v^n p~(v) * f||_{L^l} for each v."""
    g = f.grid
    fh = f.fft()
    lam_a = g.wavenorm ** idx.alpha
    if check:
        active = np.abs(fh) > ACTIVE_FLOOR * max(np.abs(fh).max(), 1e-300)
        active &= lam_a > 0
        if np.any(active):
            top = float(lam_a[active].max())
            if np.exp(-v.min() * top) <= 0.5:
                raise BesovResolutionError(
                    f"v_min={v.min():.1e} over-damps the active frequency "
                    f"|lam|^a={top:.3e}; lower v_min"
                )
    base = (-lam_a) ** idx.n * fh
    out = np.empty(len(v))
    for i, vi in enumerate(v):
        w = g.ifft(base * np.exp(-vi * lam_a))
        out[i] = vi ** (idx.n - idx.theta / idx.alpha) * _lebesgue(w, g, idx.l)
    return out


def besov_norm(
    f: GridFunction,
    idx: BesovIndex,
    v_min: float = V_MIN,
    ratio: float = V_RATIO,
) -> BesovNormBreakdown:
    """Thermic characterization of the B^theta_{l,m} norm of a scalar grid field."""
    if f.is_vector:
        raise ValueError("besov_norm takes scalar fields; combine components explicitly")
    g = f.grid
    low = g.ifft(f.fft() * lowpass_cutoff(g))
    lowpass = float(_lebesgue(low, g, idx.l))
    v = v_grid(v_min, ratio)
    prof = thermic_profile(f, idx, v)
    if np.isinf(idx.m):
        thermic = float(prof.max())
    else:
        thermic = float(trapezoid(prof ** idx.m, np.log(v)) ** (1.0 / idx.m))
    return BesovNormBreakdown(lowpass=lowpass, thermic=thermic, v_grid=v, profile=prof)


def duality_pairing(f: GridFunction, g: GridFunction) -> float:
    """Grid quadrature of int f g."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return float(f.grid.integrate(f.values * g.values))


def duality_check(f: GridFunction, g: GridFunction, idx: BesovIndex, **kw):
    """(pairing, ||f||_{B^theta_{l,m}} ||g||_{B^-theta_{l',m'}}, inequality holds)."""
    pairing = duality_pairing(f, g)
    bound = besov_norm(f, idx, **kw).total * besov_norm(g, idx.dual(), **kw).total
    return pairing, bound, abs(pairing) <= bound


def duality_constant(grid: Grid, idx: BesovIndex, k_max: int = 16, **kw) -> float:
    """max over plane waves cos(k x), 1 <= k <= k_max, of <f,f> / (||f|| ||f||_dual).

    The thermic norm is defined up to equivalence, so the pairing is bounded
    by the product of norms only up to this normalization constant.
    """
    if grid.d != 1:
        raise ValueError("plane-wave constant is computed on 1-D grids")
    k_max = min(k_max, grid.N // 4)
    out = 0.0
    for k in range(1, k_max + 1):
        f = GridFunction(grid, np.cos(k * np.pi / grid.L * grid.x))
        bound = besov_norm(f, idx, **kw).total * besov_norm(f, idx.dual(), **kw).total
        out = max(out, duality_pairing(f, f) / bound)
    return float(out)


# -- Hoelder exponents ------------------------------------------------------

@dataclass
class HolderFit:
    slope: float
    r2: float
    lags: np.ndarray = field(repr=False)
    moduli: np.ndarray = field(repr=False)

    @property
    def reliable(self) -> bool:
        return self.r2 >= 0.9


def holder_exponent(
    f,
    spacing: Optional[float] = None,
    lag_range: Optional[Sequence[float]] = None,
    axis: int = -1,
    periodic: Optional[bool] = None,
    min_lags: int = 6,
) -> HolderFit:
    """Least-squares slope of log sup|f(x + delta) - f(x)| against log delta.

    ``f`` is a GridFunction (periodic, lags along ``axis``) or a plain array
    sampled with ``spacing`` (non-periodic unless told otherwise).  Lags are
    dyadic multiples of the spacing inside ``lag_range``; the sup runs over
    every other axis too.
    """
    if isinstance(f, GridFunction):
        values, spacing = f.values, f.grid.h
        periodic = True if periodic is None else periodic
    else:
        values = np.asarray(f, dtype=float)
        if spacing is None:
            raise ValueError("spacing is required for plain arrays")
        periodic = False if periodic is None else periodic
    n = values.shape[axis]
    lo, hi = (spacing, spacing * n / 4) if lag_range is None else lag_range
    steps = []
    s = 1
    while s < n:
        if lo * (1 - 1e-9) <= s * spacing <= hi * (1 + 1e-9):
            steps.append(s)
        s *= 2
    if len(steps) < min_lags:
        raise ValueError(f"only {len(steps)} dyadic lags inside {lag_range}; need {min_lags}")
    moduli = []
    for s in steps:
        if periodic:
            diff = np.roll(values, -s, axis=axis) - values
        else:
            a = np.take(values, np.arange(s, n), axis=axis)
            b = np.take(values, np.arange(0, n - s), axis=axis)
            diff = a - b
        moduli.append(np.max(np.abs(diff)))
    lags = np.asarray(steps, dtype=float) * spacing
    moduli = np.asarray(moduli)
    if np.any(moduli <= 0):
        return HolderFit(slope=np.inf, r2=1.0, lags=lags, moduli=moduli)
    x, y = np.log(lags), np.log(moduli)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return HolderFit(slope=float(slope), r2=float(r2), lags=lags, moduli=moduli)


# -- product bound ----------------------------------------------------------

@dataclass
class ProductBoundReport:
    eta: object
    gaps: np.ndarray
    norms: np.ndarray
    fitted_exponent: float
    loglog_slope: float
    predicted_exponent: float
    tol: float = 0.1

    @property
    def passed(self) -> bool:
        return abs(self.fitted_exponent - self.predicted_exponent) <= self.tol


def verify_product_bound(
    psi_field: GridFunction,
    measure: SpectralMeasure,
    eta,
    gamma: float,
    p_prime: float = 1.0,
    q_prime: float = 1.0,
    gaps: Sequence[float] = tuple(2.0 ** -k for k in range(3, 13)),
    x: Optional[Sequence[float]] = None,
    axis: int = 0,
    beta: Optional[float] = None,
    v_min: float = V_MIN,
) -> ProductBoundReport:
    """Decay in the gap s - t of ||Psi . D^eta p_a(s - t, . - x)||_{B^{1-gamma}_{p',q'}}.

    The inhomogeneous norm is a gap-independent part plus a singular part
    C gap^{-e}; the exponent e is read off the log-log slope of
    |dN/dlog gap|, which removes the constant.  The raw log-log slope of N is
    reported alongside.  Prediction: -[(1-gamma)/a + d/(p a) + eta/a] with
    p the conjugate of p'.
    """
    g = psi_field.grid
    alpha, d = measure.alpha, g.d
    if beta is not None and not (1.0 - beta < gamma < 1.0):
        raise ValueError("gamma must lie in (1 - beta, 1)")
    x = np.zeros(d) if x is None else np.asarray(x, dtype=float)
    shift = np.exp(-1j * np.tensordot(x, g.wavevectors, axes=(0, 0)))
    sym = derivative_symbol(g, eta, axis, alpha)
    idx = BesovIndex(1.0 - gamma, p_prime, q_prime, alpha)
    gaps = np.sort(np.asarray(gaps, dtype=float))
    norms = []
    for gap in gaps:
        kern = density_grid(measure, gap, g)
        dp = g.ifft(sym * kern.symbol * shift / g.cell_volume)
        prod = GridFunction(g, psi_field.values * dp)
        norms.append(besov_norm(prod, idx, v_min=v_min).total)
    norms = np.asarray(norms)
    lg = np.log(gaps)
    dn = np.abs(np.gradient(norms, lg))
    fitted = float(np.polyfit(lg, np.log(dn), 1)[0])
    raw = float(np.polyfit(lg, np.log(norms), 1)[0])
    eta_val = alpha if eta == "alpha" else float(eta)
    p = conjugate(p_prime)
    predicted = -((1.0 - gamma) / alpha + d / (p * alpha) + eta_val / alpha)
    return ProductBoundReport(
        eta=eta, gaps=gaps, norms=norms, fitted_exponent=fitted,
        loglog_slope=raw, predicted_exponent=float(predicted),
    )


def write_norm_table(rows, path) -> None:
    """CSV with columns theta,l,m,lowpass,thermic,total from (BesovIndex, breakdown) pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "l", "m", "lowpass", "thermic", "total"])
        for idx, b in rows:
            w.writerow([idx.theta, idx.l, idx.m, repr(b.lowpass), repr(b.thermic), repr(b.total)])
