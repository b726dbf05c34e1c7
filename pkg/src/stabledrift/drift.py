"""Synthetic distributional drifts built from lacunary Fourier series.

A drift F(t, x) = sigma(t) * sum_j a_j cos(k_j . x + phi_j) e_{c_j} has one
atom per dyadic level j with |k_j| = 2^j and a_j = A 2^{j(1 - gamma_true)}.
Such a series lies in B^{-1+gamma_true}_{infty,infty}; the generator uses
gamma_true = gamma + margin so that heat-kernel mollification converges in
the declared space B^{-1+gamma}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .besov import BesovIndex, besov_norm, thermic_profile, v_grid
from .grid import Grid, GridFunction
from .regularity import RegularityParams, check_gate

__all__ = [
    "DriftSpec",
    "DriftField",
    "build_drift",
    "mollify",
    "mollification_scale",
    "spatial_norm",
    "drift_norm",
    "measured_regularity",
]

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class DriftSpec:
    """Recipe for a lacunary drift in L^r([0,T], B^{-1+gamma}_{p,q})."""

    gamma: float
    p: float = np.inf
    q: float = np.inf
    r: float = np.inf
    levels: int = 8
    seed: int = 0
    time_exponent: float = 0.0
    d: int = 1
    T: float = 1.0
    amplitude: float = 1.0
    j_min: int = 0
    margin: float = 0.05
    jitter: float = 0.0
    t_floor_ratio: float = 1e-4
    aligned: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.levels < 4:
            raise ValueError("need at least 4 lacunary levels")
        if self.time_exponent < 0 or (not np.isinf(self.r) and self.time_exponent * self.r >= 1):
            raise ValueError("time exponent a must satisfy 0 <= a < 1/r")
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @property
    def gamma_true(self) -> float:
        return self.gamma + self.margin

    def params(self, alpha: float, eps: float = 0.02) -> RegularityParams:
        return RegularityParams(alpha, self.d, self.p, self.q, self.r, self.gamma, eps)


@dataclass(frozen=True)
class DriftField:
    """Spectral drift: atoms (wavevector, component, amplitude, phase) times sigma(t).

    Wavevectors are angular frequencies on the 2*pi-periodic torus.  A
    wavevector of zero encodes a constant contribution ``amplitude * cos(phase)``.
    """

    d: int
    wavevectors: np.ndarray
    components: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    levels: np.ndarray = None
    time_exponent: float = 0.0
    T: float = 1.0
    t_floor: float = 0.0
    delta: float = 0.0
    moll_alpha: Optional[float] = None
    spec: Optional[DriftSpec] = field(default=None, compare=False)

    def __post_init__(self):
        k = np.asarray(self.wavevectors, dtype=float).reshape(-1, self.d)
        object.__setattr__(self, "wavevectors", k)
        n = len(k)
        for name in ("components", "amplitudes", "phases"):
            arr = np.asarray(getattr(self, name)).reshape(n)
            object.__setattr__(self, name, arr)
        lv = np.full(n, -1) if self.levels is None else np.asarray(self.levels).reshape(n)
        object.__setattr__(self, "levels", lv)
        if np.any((self.components < 0) | (self.components >= self.d)):
            raise ValueError("atom component out of range")

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, d: int = 1, T: float = 1.0) -> "DriftField":
        return cls(d, np.zeros((0, d)), np.zeros(0, int), np.zeros(0), np.zeros(0), T=T)

    @classmethod
    def constant(cls, b: Sequence[float], T: float = 1.0) -> "DriftField":
        b = np.atleast_1d(np.asarray(b, dtype=float))
        d = len(b)
        return cls(d, np.zeros((d, d)), np.arange(d), b, np.zeros(d), T=T)

    @classmethod
    def single_mode(cls, k, amplitude: float = 1.0, phase: float = 0.0,
                    component: int = 0, T: float = 1.0) -> "DriftField":
        k = np.atleast_1d(np.asarray(k, dtype=float))
        return cls(len(k), k[None, :], np.array([component]), np.array([amplitude]),
                   np.array([phase]), T=T)

    # -- evaluation -------------------------------------------------------

    @property
    def n_atoms(self) -> int:
        return len(self.amplitudes)

    @property
    def is_time_constant(self) -> bool:
        return self.time_exponent == 0.0

    @property
    def is_constant_in_space(self) -> bool:
        return bool(np.all(self.wavevectors == 0))

    def sigma(self, t) -> np.ndarray:
        """Time profile (max(t, t_floor)/T)^{-a}."""
        t = np.asarray(t, dtype=float)
        if self.is_time_constant:
            return np.ones_like(t)
        return (np.maximum(t, self.t_floor) / self.T) ** (-self.time_exponent)

    def evaluate(self, x, t: float = 0.0) -> np.ndarray:
        """F(t, x) at points ``x`` of shape (..., d); returns shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.zeros(x.shape[:-1] + (self.d,))
        if self.n_atoms == 0:
            return out
        wave = np.cos(x @ self.wavevectors.T + self.phases) * self.amplitudes
        onehot = np.eye(self.d)[self.components]
        return (wave @ onehot) * self.sigma(t)

    def on_grid(self, grid: Grid, t: float = 0.0) -> GridFunction:
        """Vector field of shape (d, N, ..., N) at time t."""
        if grid.d != self.d:
            raise ValueError("grid dimension differs from drift dimension")
        pts = np.moveaxis(grid.coords, 0, -1)
        return GridFunction(grid, np.moveaxis(self.evaluate(pts, t), -1, 0))

    def scaled(self, c: float) -> "DriftField":
        return replace(self, amplitudes=self.amplitudes * c)

    def truncated(self, max_level: int) -> "DriftField":
        keep = self.levels <= max_level
        return replace(self, wavevectors=self.wavevectors[keep], components=self.components[keep],
                       amplitudes=self.amplitudes[keep], phases=self.phases[keep],
                       levels=self.levels[keep])

    def gate(self, alpha: float, eps: float = 0.02):
        """Admissibility of (alpha, d, p, q, r, gamma) for the declared indices."""
        if self.spec is None:
            raise ValueError("drift was not built from a DriftSpec")
        return check_gate(self.spec.params(alpha, eps))

    # -- manifest ---------------------------------------------------------

    def to_manifest(self) -> dict:
        spec = None
        if self.spec is not None:
            spec = {k: (None if isinstance(v, float) and np.isinf(v) else v)
                    for k, v in self.spec.__dict__.items()}
        return {
            "version": MANIFEST_VERSION,
            "d": self.d,
            "spec": spec,
            "wavevectors": self.wavevectors.tolist(),
            "components": self.components.tolist(),
            "amplitudes": [float(a).hex() for a in self.amplitudes],
            "phases": [float(p).hex() for p in self.phases],
            "levels": self.levels.tolist(),
            "time_exponent": self.time_exponent,
            "T": self.T,
            "t_floor": self.t_floor,
            "delta": float(self.delta).hex(),
            "moll_alpha": self.moll_alpha,
        }

    @classmethod
    def from_manifest(cls, man: dict) -> "DriftField":
        if man.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported drift manifest version {man.get('version')}")
        spec = None
        if man.get("spec"):
            s = {k: (np.inf if v is None and k in ("p", "q", "r") else v)
                 for k, v in man["spec"].items()}
            spec = DriftSpec(**s)
        return cls(
            d=man["d"],
            wavevectors=np.asarray(man["wavevectors"], dtype=float).reshape(-1, man["d"]),
            components=np.asarray(man["components"], dtype=int),
            amplitudes=np.array([float.fromhex(a) for a in man["amplitudes"]]),
            phases=np.array([float.fromhex(p) for p in man["phases"]]),
            levels=np.asarray(man["levels"], dtype=int),
            time_exponent=man["time_exponent"],
            T=man["T"],
            t_floor=man["t_floor"],
            delta=float.fromhex(man["delta"]),
            moll_alpha=man["moll_alpha"],
            spec=spec,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_manifest(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "DriftField":
        with open(path) as fh:
            return cls.from_manifest(json.load(fh))


def build_drift(spec: DriftSpec, rng: Optional[np.random.Generator] = None) -> DriftField:
    """Lacunary drift sum_j a_j cos(2^j x.e_j + phi_j) sigma(t), one atom per level and component.

    Directions are coordinate axes (so every wavevector lies on the integer
    lattice of the 2*pi-torus); phases are uniform; ``jitter`` perturbs the
    amplitudes multiplicatively by a factor in [1 - jitter, 1 + jitter];
    ``aligned`` sets every phase to zero so all atoms peak together at 0.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    ks, comps, amps, phases, levels = [], [], [], [], []
    for c in range(spec.d):
        for j in range(spec.j_min, spec.j_min + spec.levels):
            axis = c if spec.d == 1 else int(rng.integers(spec.d))
            k = np.zeros(spec.d)
            k[axis] = 2.0 ** j
            amp = spec.amplitude * 2.0 ** (j * (1.0 - spec.gamma_true))
            if spec.jitter:
                amp *= 1.0 + spec.jitter * rng.uniform(-1, 1)
            ks.append(k)
            comps.append(c)
            amps.append(amp)
            phase = rng.uniform(0.0, 2 * np.pi)
            phases.append(0.0 if spec.aligned else phase)
            levels.append(j)
    return DriftField(
        d=spec.d,
        wavevectors=np.array(ks),
        components=np.array(comps),
        amplitudes=np.array(amps),
        phases=np.array(phases),
        levels=np.array(levels),
        time_exponent=spec.time_exponent,
        T=spec.T,
        t_floor=spec.T * spec.t_floor_ratio,
        spec=spec,
    )


def mollification_scale(m: int, alpha: float) -> float:
    return 2.0 ** (-alpha * m)


def mollify(F: DriftField, m: int, alpha: float) -> DriftField:
    """Convolve with the isotropic stable density p~_alpha(delta_m), delta_m = 2^{-alpha m}."""
    if m < 1:
        raise ValueError("mollification level m must be >= 1")
    delta = mollification_scale(m, alpha)
    if F.moll_alpha is not None and F.moll_alpha != alpha:
        raise ValueError("drift was already mollified with a different alpha")
    knorm = np.linalg.norm(F.wavevectors, axis=1)
    return replace(F, amplitudes=F.amplitudes * np.exp(-delta * knorm ** alpha),
                   delta=F.delta + delta, moll_alpha=alpha)


def spatial_norm(F: DriftField, grid: Grid, idx: BesovIndex, t: float = 0.0, **kw) -> float:
    """Euclidean combination of the component B^theta_{l,m} norms of F(t, .)."""
    vals = F.on_grid(grid, t)
    comps = [besov_norm(vals.component(i), idx, **kw).total for i in range(F.d)]
    return float(np.sqrt(np.sum(np.square(comps))))


def drift_norm(
    F: DriftField,
    grid: Grid,
    r: float,
    p: float,
    q: float,
    regularity: float,
    alpha: float,
    time_grid: Optional[np.ndarray] = None,
    **kw,
) -> float:
    """||F||_{L^r([0,T], B^{regularity}_{p,q})} by quadrature in time.

    F(t, .) = sigma(t) F(0, .) up to the profile, so the spatial norm is
    computed once and the time integral runs over sigma on a log-spaced grid.
    """
    if F.n_atoms == 0 or np.all(F.amplitudes == 0):
        return 0.0
    idx = BesovIndex(regularity, p, q, alpha)
    # sigma(T) = 1
    base = spatial_norm(F, grid, idx, t=F.T, **kw)
    if F.is_time_constant:
        return base if np.isinf(r) else base * F.T ** (1.0 / r)
    if time_grid is None:
        lo = max(F.t_floor, F.T * 1e-8) / 10
        time_grid = np.concatenate([[0.0], np.geomspace(lo, F.T, 400)])
    sig = F.sigma(time_grid)
    if np.isinf(r):
        return base * float(sig.max())
    return base * float(trapezoid(sig ** r, time_grid)) ** (1.0 / r)


def measured_regularity(
    F: DriftField,
    grid: Grid,
    alpha: float,
    component: int = 0,
    v_range: Optional[Sequence[float]] = None,
) -> float:
    """Estimate the B_{infty,infty} regularity s of F(0, .) from its thermic profile.

    For a field of regularity s, v ||d_v p~(v) * F||_infty ~ v^{s/alpha} across
    the scales carried by the series; s is alpha times the fitted slope.
    """
    f = F.on_grid(grid, F.T).component(component)
    if v_range is None:
        k = np.linalg.norm(F.wavevectors, axis=1)
        k = k[k > 0]
        v_range = (float(k.max()) ** -alpha, float(k.min()) ** -alpha)
    v = v_grid(min(1e-6, v_range[0] / 10))
    v = v[(v >= v_range[0]) & (v <= v_range[1])]
    prof = thermic_profile(f, BesovIndex(0.0, np.inf, np.inf, alpha, n=1), v, check=False)
    return float(alpha * np.polyfit(np.log(v), np.log(prof), 1)[0])
