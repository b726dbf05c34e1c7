"""Spectral measures of symmetric alpha-stable noises.

A symmetric stable generator on R^d is parameterized by its index alpha and a
finite symmetric measure mu on the unit sphere.  Its Fourier symbol is

    psi(lam) = int_{S^{d-1}} |lam . xi|^alpha mu(dxi),

so that E[exp(i lam . W_t)] = exp(-t psi(lam)).  Three families are supported:
isotropic (uniform on the sphere), cylindrical (atoms on the coordinate axes)
and general atomic measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

__all__ = [
    "SpectralMeasure",
    "DegenerateMeasureError",
    "characteristic_exponent",
    "nondegeneracy_constants",
    "sphere_moment",
]

KINDS = ("isotropic", "cylindrical", "atomic")


class DegenerateMeasureError(ValueError):
    """Raised when psi vanishes (numerically) somewhere on the unit sphere."""


def sphere_moment(alpha: float, d: int) -> float:
    """Mean of |xi_1|^alpha under the uniform probability on S^{d-1}."""
    if d == 1:
        return 1.0
    return float(
        gamma_fn((alpha + 1) / 2) * gamma_fn(d / 2)
        / (np.sqrt(np.pi) * gamma_fn((alpha + d) / 2))
    )


@dataclass(frozen=True)
class SpectralMeasure:
    """Stability index plus spectral measure on S^{d-1}.

    Use the constructors :meth:`isotropic`, :meth:`cylindrical` and
    :meth:`atomic` rather than the raw initializer.

    For the isotropic kind ``total_mass=None`` selects the normalization
    psi(lam) = |lam|^alpha; an explicit mass M gives
    psi(lam) = M * E_unif|xi_1|^alpha * |lam|^alpha.
    """

    alpha: float
    d: int
    kind: str
    total_mass: Optional[float] = None
    weights: tuple = ()
    directions: tuple = ()
    normalization: str = field(default="psi(lam)=|lam|^alpha", compare=False)

    def __post_init__(self):
        if not (1.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "isotropic":
            if self.total_mass is not None and not self.total_mass > 0:
                raise ValueError("total_mass must be positive")
        elif self.kind == "cylindrical":
            if len(self.weights) != self.d:
                raise ValueError("cylindrical measure needs one weight per axis")
            if any(not w > 0 for w in self.weights):
                raise ValueError("cylindrical weights must be positive")
        else:
            self._check_atoms()

    def _check_atoms(self):
        if len(self.weights) == 0 or len(self.weights) != len(self.directions):
            raise ValueError("atomic measure needs matching directions and weights")
        dirs = np.asarray(self.directions, dtype=float).reshape(len(self.weights), self.d)
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        if not np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12):
            raise ValueError("atom directions must be unit vectors")
        # symmetry: every atom has a mirror atom of the same weight
        for xi, wi in zip(dirs, w):
            mirror = np.all(np.isclose(dirs, -xi, atol=1e-12), axis=1)
            if not np.any(mirror & np.isclose(w, wi, rtol=1e-12)):
                raise ValueError(f"atomic measure is not symmetric at direction {xi}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def isotropic(cls, alpha: float, d: int = 1, total_mass: Optional[float] = None):
        return cls(alpha=alpha, d=d, kind="isotropic", total_mass=total_mass)

    @classmethod
    def cylindrical(cls, alpha: float, weights: Sequence[float]):
        weights = tuple(float(c) for c in weights)
        return cls(alpha=alpha, d=len(weights), kind="cylindrical", weights=weights)

    @classmethod
    def atomic(cls, alpha: float, directions, weights: Sequence[float]):
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        return cls(
            alpha=alpha,
            d=dirs.shape[1],
            kind="atomic",
            weights=tuple(float(w) for w in weights),
            directions=tuple(tuple(row) for row in dirs),
        )

    # -- symbol -----------------------------------------------------------

    @property
    def isotropic_scale(self) -> float:
        """Constant c with psi(lam) = c |lam|^alpha (isotropic kind only)."""
        if self.kind != "isotropic":
            raise AttributeError("isotropic_scale is defined for isotropic measures only")
        if self.total_mass is None:
            return 1.0
        return self.total_mass * sphere_moment(self.alpha, self.d)

    def axis_atoms(self):
        """(directions, one-dimensional scales) used by the exact sampler.

        Each symmetric pair {xi, -xi} of weight w contributes 2 w |lam . xi|^alpha
        to psi, i.e. a one-dimensional stable variable of scale (2w)^(1/alpha)
        along xi.
        """
        if self.kind == "cylindrical":
            dirs = np.eye(self.d)
            scales = 2.0 * np.asarray(self.weights)
            return dirs, scales
        if self.kind == "atomic":
            dirs = np.asarray(self.directions, dtype=float).reshape(-1, self.d)
            w = np.asarray(self.weights)
            keep, seen = [], []
            for i, xi in enumerate(dirs):
                if any(np.allclose(xi, -s, atol=1e-12) for s in seen):
                    continue
                seen.append(xi)
                keep.append(i)
            keep = np.asarray(keep)
            return dirs[keep], 2.0 * w[keep]
        raise AttributeError("axis_atoms is undefined for isotropic measures")

    def psi(self, lam) -> np.ndarray:
        """Vectorized symbol; ``lam`` has trailing axis of length d (or is scalar for d=1)."""
        lam = np.asarray(lam, dtype=float)
        if self.d == 1 and (lam.ndim == 0 or lam.shape[-1] != 1):
            lam = lam[..., None]
        if lam.shape[-1] != self.d:
            raise ValueError(f"frequency has dimension {lam.shape[-1]}, expected {self.d}")
        if not np.all(np.isfinite(lam)):
            raise ValueError("frequency has non-finite entries")
        a = self.alpha
        if self.kind == "isotropic":
            return self.isotropic_scale * np.linalg.norm(lam, axis=-1) ** a
        dirs, scales = self.axis_atoms()
        proj = np.abs(lam @ dirs.T)
        return (proj ** a) @ scales

    def psi_on_axes(self, *axes) -> np.ndarray:
        """psi on the tensor grid spanned by 1-D frequency vectors (one per dimension)."""
        mesh = np.meshgrid(*axes, indexing="ij")
        return self.psi(np.stack(mesh, axis=-1))

    def metadata(self) -> dict:
        out = {"alpha": self.alpha, "d": self.d, "kind": self.kind}
        if self.kind == "isotropic":
            out["total_mass"] = self.total_mass
            out["normalization"] = (
                self.normalization if self.total_mass is None
                else f"psi(lam)={self.isotropic_scale:.12g}*|lam|^alpha"
            )
        elif self.kind == "cylindrical":
            out["weights"] = list(self.weights)
        else:
            out["directions"] = [list(x) for x in self.directions]
            out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_metadata(cls, meta: dict) -> "SpectralMeasure":
        kind = meta["kind"]
        if kind == "isotropic":
            return cls.isotropic(meta["alpha"], meta["d"], meta.get("total_mass"))
        if kind == "cylindrical":
            return cls.cylindrical(meta["alpha"], meta["weights"])
        return cls.atomic(meta["alpha"], meta["directions"], meta["weights"])


def characteristic_exponent(measure: SpectralMeasure, lam) -> float:
    """psi(lam) for a single frequency vector."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (measure.d,):
        raise ValueError(f"expected a {measure.d}-vector, got shape {lam.shape}")
    return float(measure.psi(lam))


def _sphere_points(d: int, resolution: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    theta = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def nondegeneracy_constants(
    measure: SpectralMeasure, resolution: Optional[int] = None, floor: float = 1e-12
):
    """Grid-search the smallest kappa >= 1 with kappa^-1 <= psi <= kappa on S^{d-1}.

    Returns ``(kappa, argmin_direction, argmax_direction)``.  In d=1 the sphere
    is {-1, 1} and ``resolution`` is irrelevant.
    """
    if resolution is None:
        resolution = 4096 if measure.d == 2 else 64
    if resolution < 64:
        raise ValueError("resolution must be at least 64 sphere points")
    pts = _sphere_points(measure.d, resolution)
    vals = measure.psi(pts)
    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    if vals[i_min] < floor:
        raise DegenerateMeasureError(
            f"psi drops to {vals[i_min]:.3e} at direction {pts[i_min]}"
        )
    kappa = max(1.0, float(vals[i_max]), float(1.0 / vals[i_min]))
    return kappa, pts[i_min], pts[i_max]
