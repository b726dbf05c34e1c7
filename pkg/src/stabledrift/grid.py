"""Periodic grids on the torus [-L, L)^d and functions sampled on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "GridFunction"]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with N points per axis on [-L, L)^d."""

    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if self.N < 64 or self.N & (self.N - 1):
            raise ValueError(f"points per axis must be a power of two >= 64, got {self.N}")
        if not self.L > 0:
            raise ValueError("half-width L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates; index N/2 is the origin."""
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def coords(self) -> np.ndarray:
        """Array of shape (d, N, ..., N) of node coordinates."""
        return np.stack(np.meshgrid(*([self.x] * self.d), indexing="ij"))

    @cached_property
    def freq(self) -> np.ndarray:
        """1-D angular frequencies pi/L * {-N/2, ..., N/2-1} in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Array of shape (d, N, ..., N) of angular frequencies in FFT order."""
        return np.stack(np.meshgrid(*([self.freq] * self.d), indexing="ij"))

    @cached_property
    def wavenorm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.wavevectors ** 2, axis=0))

    @property
    def nyquist(self) -> float:
        return np.pi * self.N / (2.0 * self.L)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on frequencies that sit on the Nyquist plane of some axis."""
        k = np.abs(self.wavevectors)
        return np.any(np.isclose(k, self.nyquist), axis=0)

    @cached_property
    def _phase(self) -> np.ndarray:
        # FFT index 0 corresponds to x=-L, not x=0
        return np.exp(1j * self.L * np.sum(self.wavevectors, axis=0))

    def fft(self, values) -> np.ndarray:
        """Fourier coefficients c(lam) with f(x) = sum_lam c(lam) exp(i lam.x) / N^d."""
        axes = tuple(range(-self.d, 0))
        return np.fft.fftn(values, axes=axes) * self._phase

    def ifft(self, coeffs, real: bool = True) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        out = np.fft.ifftn(coeffs / self._phase, axes=axes)
        return out.real if real else out

    def multiplier_apply(self, values, symbol) -> np.ndarray:
        """Apply the Fourier multiplier ``symbol`` (array over the frequency grid)."""
        return self.ifft(self.fft(values) * symbol)

    def integrate(self, values) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        return np.sum(values, axis=axes) * self.cell_volume

    def metadata(self) -> dict:
        return {"d": self.d, "L": self.L, "N": self.N}


@dataclass(frozen=True)
class GridFunction:
    """Real field on a :class:`Grid`.

    ``values`` has shape ``grid.shape`` for scalar fields or
    ``(ncomp,) + grid.shape`` for vector fields.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[-self.grid.d:] != self.grid.shape or v.ndim not in (self.grid.d, self.grid.d + 1):
            raise ValueError(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == self.grid.d + 1

    @property
    def ncomp(self) -> int:
        return self.values.shape[0] if self.is_vector else 1

    def component(self, i: int) -> "GridFunction":
        if not self.is_vector:
            if i != 0:
                raise IndexError(i)
            return self
        return GridFunction(self.grid, self.values[i])

    def fft(self) -> np.ndarray:
        return self.grid.fft(self.values)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        """Sample ``fn(*coords)`` on the grid."""
        return cls(grid, np.asarray(fn(*grid.coords), dtype=float))

    def to_csv(self, path) -> None:
        """Write columns x1[,x2],value (vector fields get value_0, value_1, ...)."""
        coords = [c.ravel() for c in self.grid.coords]
        cols = coords + ([self.values.ravel()] if not self.is_vector
                         else [v.ravel() for v in self.values])
        names = [f"x{i + 1}" for i in range(self.grid.d)]
        names += ["value"] if not self.is_vector else [f"value_{i}" for i in range(self.ncomp)]
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
                   comments="", fmt="%.17g")


def _vals(other):
    return other.values if isinstance(other, GridFunction) else other
