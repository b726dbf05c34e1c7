"""Mild (Duhamel) solutions of the backward Cauchy problem with mollified drift.

    u(t) = P_{T-t} g + int_t^T P_{s-t} [f + F_m . Du](s) ds,   P_t = exp(-t psi(D))

is solved by Picard iteration on a uniform time grid.  The time integral
uses the exact semigroup recursion

    I(t_i) = P_dt I(t_{i+1}) + int_0^dt exp(-s psi) Phi(t_i + s) ds

with Phi linear on each sub-interval and the last integral done in closed
form, so time-constant integrands are integrated exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .besov import HolderFit, holder_exponent
from .drift import DriftField
from .grid import Grid, GridFunction
from .regularity import GateReport, RegularityParams, check_gate
from .spectral import SpectralMeasure

__all__ = [
    "GateError",
    "NonContractionError",
    "PdeProblem",
    "MildSolution",
    "ZvonkinMap",
    "SchauderReport",
    "check_gate",
    "semigroup_apply",
    "green_apply",
    "solve_mild",
    "duhamel_residual",
    "zvonkin_problem",
    "zvonkin_transform",
    "schauder_report",
    "default_space_lags",
    "green_gradient_exponent",
    "green_gradient_scan",
]

TOL = 1e-8
MAX_ITER = 200


class GateError(ValueError):
    """Parameters fail the admissibility gate and no override was given."""


class NonContractionError(RuntimeError):
    """Picard iterates failed to converge."""

    def __init__(self, message, factor, iterations, increments):
        super().__init__(message)
        self.factor = factor
        self.iterations = iterations
        self.increments = increments


# -- linear building blocks ------------------------------------------------

def _psi_grid(measure: SpectralMeasure, grid: Grid) -> np.ndarray:
    if measure.d != grid.d:
        raise ValueError("measure and grid dimensions differ")
    return measure.psi(np.moveaxis(grid.wavevectors, 0, -1))


def semigroup_apply(measure: SpectralMeasure, t: float, f: GridFunction) -> GridFunction:
    """P_t f: multiply the Fourier coefficients by exp(-t psi)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return f
    sym = np.exp(-t * _psi_grid(measure, f.grid))
    return GridFunction(f.grid, f.grid.multiplier_apply(f.values, sym))


def _etd_weights(psi: np.ndarray, dt: float):
    """Weights (a, b) with int_0^dt e^{-s psi} [(1-s/dt) x + (s/dt) y] ds = a x + b y."""
    z = psi * dt
    small = z < 1e-4
    zs = np.where(small, 1.0, z)
    e0 = np.where(small, 1 - z / 2 + z * z / 6, -np.expm1(-zs) / zs)
    e1 = np.where(small, 0.5 - z / 3 + z * z / 8,
                  (-np.expm1(-zs) - zs * np.exp(-zs)) / (zs * zs))
    return dt * (e0 - e1), dt * e1


def _duhamel_integrals(psi: np.ndarray, phi_hat: np.ndarray, dt: float) -> np.ndarray:
    """I_i = int_{t_i}^{T} P_{s - t_i} Phi(s) ds for every node (Fourier side)."""
    a, b = _etd_weights(psi, dt)
    step = np.exp(-psi * dt)
    out = np.zeros_like(phi_hat)
    for i in range(len(phi_hat) - 2, -1, -1):
        out[i] = step * out[i + 1] + a * phi_hat[i] + b * phi_hat[i + 1]
    return out


def green_apply(
    measure: SpectralMeasure,
    phi: Union[np.ndarray, Sequence[GridFunction]],
    times: np.ndarray,
    grid: Grid,
    t_index: int = 0,
) -> GridFunction:
    """G Phi(t) = int_t^T P_{s-t} Phi(s) ds, with Phi given at the uniform ``times``."""
    times = np.asarray(times, dtype=float)
    dt = _uniform_step(times)
    vals = np.stack([p.values if isinstance(p, GridFunction) else np.asarray(p) for p in phi])
    if vals.shape[0] != len(times):
        raise ValueError("Phi must be given at every time node")
    psi = _psi_grid(measure, grid)
    ihat = _duhamel_integrals(psi, grid.fft(vals), dt)
    return GridFunction(grid, grid.ifft(ihat[t_index]))


def _uniform_step(times):
    dt = np.diff(times)
    if len(dt) == 0 or not np.allclose(dt, dt[0], rtol=1e-10):
        raise ValueError("time grid must be uniform with at least two nodes")
    return float(dt[0])


# -- problem and solution --------------------------------------------------

SourceLike = Union[None, float, np.ndarray, Callable[[float], np.ndarray]]


@dataclass
class PdeProblem:
    """Backward problem d_t u + L u + F_m . Du = -f, u(T) = g on a periodic grid.

    ``terminal`` is ``"zero"``, ``("linear", k)`` for g(x) = x_k, or a
    GridFunction.  ``source`` is None, a constant, a callable t -> array, or
    an array of shape (M + 1,) + grid.shape.
    """

    measure: SpectralMeasure
    drift: DriftField
    grid: Grid
    T: float = 0.05
    steps: int = 128
    source: SourceLike = None
    terminal: Union[str, tuple, GridFunction] = "zero"
    params: Optional[RegularityParams] = None
    override: bool = False

    def __post_init__(self):
        if self.T > 1 and not self.override:
            raise ValueError("horizons T > 1 need override=True")
        if self.drift.d != self.grid.d or self.measure.d != self.grid.d:
            raise ValueError("drift, measure and grid dimensions differ")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)

    def source_nodes(self) -> np.ndarray:
        shape = (self.steps + 1,) + self.grid.shape
        src = self.source
        if src is None:
            return np.zeros(shape)
        if callable(src):
            return np.stack([np.broadcast_to(src(t), self.grid.shape) for t in self.times])
        src = np.asarray(src, dtype=float)
        if src.ndim == 0:
            return np.full(shape, float(src))
        return np.broadcast_to(src, shape).copy()

    def drift_nodes(self) -> np.ndarray:
        """F_m at every node: shape (M + 1, d) + grid.shape."""
        base = self.drift.on_grid(self.grid, self.T).values
        sig = self.drift.sigma(self.times)
        return sig.reshape((-1,) + (1,) * base.ndim) * base[None]


@dataclass
class MildSolution:
    problem: PdeProblem = field(repr=False)
    times: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    Du: np.ndarray = field(repr=False)
    iterations: int = 0
    residual: float = 0.0
    increments: list = field(default_factory=list)

    @property
    def contraction_factor(self) -> float:
        """Largest ratio of successive Picard increments (excluding round-off tails)."""
        inc = np.asarray(self.increments)
        ok = inc > 1e3 * np.finfo(float).eps * max(1.0, np.abs(self.u).max())
        inc = inc[ok]
        if len(inc) < 2:
            return 0.0
        return float(np.max(inc[1:] / inc[:-1]))

    def at(self, i: int) -> GridFunction:
        return GridFunction(self.problem.grid, self.u[i])

    def gradient(self, i: int) -> GridFunction:
        return GridFunction(self.problem.grid, self.Du[i])

    def dump(self, path_prefix) -> None:
        """Binary dump (npz) of u, Du and times plus a JSON sidecar of diagnostics."""
        np.savez(f"{path_prefix}.npz", times=self.times, u=self.u, Du=self.Du)
        with open(f"{path_prefix}.json", "w") as fh:
            json.dump({"iterations": self.iterations, "residual": self.residual,
                       "contraction_factor": self.contraction_factor,
                       "increments": list(map(float, self.increments))}, fh, indent=2)


def _spectral_gradient(grid: Grid, uhat: np.ndarray) -> np.ndarray:
    """Du for a stack of Fourier fields (leading time axis); returns (M+1, d, ...)."""
    ks = grid.wavevectors
    nyq = np.isclose(np.abs(ks), grid.nyquist)
    parts = [grid.ifft(np.where(nyq[j], 0.0, 1j * ks[j]) * uhat) for j in range(grid.d)]
    return np.stack(parts, axis=1)


def _linear_terminal_component(problem: PdeProblem):
    term = problem.terminal
    if isinstance(term, tuple) and term[0] == "linear":
        return int(term[1])
    return None


def _setup(problem: PdeProblem):
    grid = problem.grid
    if problem.params is not None and not problem.override:
        gate = check_gate(problem.params)
        if not gate.weak_ok:
            raise GateError(f"parameters fail the weak well-posedness gate: {gate}")
    F = problem.drift
    if F.delta <= 0 and not F.is_constant_in_space and not problem.override:
        raise ValueError("the solver needs a mollified drift (delta > 0)")
    Fn = problem.drift_nodes()
    src = problem.source_nodes()
    k = _linear_terminal_component(problem)
    if k is not None:
        # u = x_k + w:  w solves the same equation with source f + F^k and g = 0
        src = src + Fn[:, k]
        ghat = np.zeros(grid.shape, dtype=complex)
    elif isinstance(problem.terminal, GridFunction):
        ghat = grid.fft(problem.terminal.values)
    elif problem.terminal == "zero":
        ghat = np.zeros(grid.shape, dtype=complex)
    else:
        raise ValueError(f"unsupported terminal condition {problem.terminal!r}")
    return Fn, src, ghat, k


def _picard_map(problem, psi, Fn, src, ghat, Du):
    grid = problem.grid
    times = problem.times
    dt = times[1] - times[0]
    phi = src + np.sum(Fn * Du, axis=1)
    ihat = _duhamel_integrals(psi, grid.fft(phi), dt)
    uhat = _terminal_part(psi, ghat, problem.T - times, grid.d) + ihat
    return grid.ifft(uhat), _spectral_gradient(grid, uhat)


def _terminal_part(psi, ghat, tau, d):
    return np.exp(-tau.reshape((-1,) + (1,) * d) * psi) * ghat


def solve_mild(problem: PdeProblem, tol: float = TOL, max_iter: int = MAX_ITER) -> MildSolution:
    """Picard iteration for the mild formulation until the sup change of (u, Du) <= tol.

    With a linear terminal x_k the returned u and Du include x_k and e_k.
    Raises NonContractionError when iterates grow or ``max_iter`` is hit.
    """
    grid = problem.grid
    psi = _psi_grid(problem.measure, grid)
    Fn, src, ghat, k = _setup(problem)
    M = problem.steps
    w = np.zeros((M + 1,) + grid.shape)
    Dw = np.zeros((M + 1, grid.d) + grid.shape)
    increments = []
    for it in range(1, max_iter + 1):
        w_new, Dw_new = _picard_map(problem, psi, Fn, src, ghat, Dw)
        inc = max(np.max(np.abs(w_new - w)), np.max(np.abs(Dw_new - Dw)))
        increments.append(float(inc))
        w, Dw = w_new, Dw_new
        if inc <= tol:
            break
        if it >= 4 and increments[-1] > increments[-2] > increments[-3] and inc > 1e6:
            raise NonContractionError(
                f"Picard iterates diverge (increment {inc:.3e})",
                increments[-1] / increments[-2], it, increments)
    else:
        ratio = increments[-1] / increments[-2] if len(increments) > 1 else np.nan
        raise NonContractionError(
            f"no convergence in {max_iter} iterations (last increment {increments[-1]:.3e})",
            ratio, max_iter, increments)
    sol = MildSolution(problem, problem.times, w, Dw, it, 0.0, increments)
    sol.residual = duhamel_residual(sol, _internal=(psi, Fn, src, ghat))
    if k is not None:
        x = grid.coords[k]
        sol.u = w + x[None]
        sol.Du = Dw.copy()
        sol.Du[:, k] += 1.0
    return sol


def duhamel_residual(sol: MildSolution, _internal=None) -> float:
    """sup over nodes and grid of |u - RHS(u, Du)| (u without the linear part)."""
    problem = sol.problem
    grid = problem.grid
    if _internal is None:
        psi = _psi_grid(problem.measure, grid)
        Fn, src, ghat, k = _setup(problem)
        w, Dw = sol.u, sol.Du
        if k is not None:
            w = sol.u - grid.coords[k][None]
            Dw = sol.Du.copy()
            Dw[:, k] -= 1.0
    else:
        psi, Fn, src, ghat = _internal
        w, Dw = sol.u, sol.Du
    w2, _ = _picard_map(problem, psi, Fn, src, ghat, Dw)
    return float(np.max(np.abs(w2 - w)))


def zvonkin_problem(measure, drift, grid, T=0.05, steps=128, component=0,
                    params=None, override=False) -> PdeProblem:
    """Problem with g = 0 and source -F_m^k (the k-th drift component)."""
    base = drift.on_grid(grid, drift.T).values[component]
    sig = drift.sigma(np.linspace(0.0, T, steps + 1))
    src = -sig.reshape((-1,) + (1,) * grid.d) * base[None]
    return PdeProblem(measure, drift, grid, T=T, steps=steps, source=src,
                      terminal="zero", params=params, override=override)


# -- Zvonkin transform -----------------------------------------------------

@dataclass
class ZvonkinMap:
    phi: np.ndarray = field(repr=False)
    det_min: float = 1.0
    grad_sup: float = 0.0

    @property
    def invertible(self) -> bool:
        return self.det_min > 0.5


def zvonkin_transform(solutions, t_index: Optional[int] = None) -> ZvonkinMap:
    """Phi(t, x) = x + u(t, x) from one solution per component, with min det(I + Du).

    ``t_index`` restricts the diagnostic to one node; by default all nodes count.
    """
    if isinstance(solutions, MildSolution):
        solutions = [solutions]
    grid = solutions[0].problem.grid
    d = grid.d
    if len(solutions) != d:
        raise ValueError(f"need {d} component solutions, got {len(solutions)}")
    sl = slice(None) if t_index is None else slice(t_index, t_index + 1)
    u = np.stack([s.u[sl] for s in solutions], axis=1)          # (M', d, ...)
    Du = np.stack([s.Du[sl] for s in solutions], axis=1)        # (M', d, d, ...)
    phi = grid.coords[None] + u
    jac = Du + np.eye(d).reshape((1, d, d) + (1,) * d)
    if d == 1:
        det = jac[:, 0, 0]
    else:
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    return ZvonkinMap(phi=phi, det_min=float(det.min()), grad_sup=float(np.abs(Du).max()))


# -- Schauder exponents ----------------------------------------------------

@dataclass
class SchauderReport:
    space_Du: HolderFit
    time_u: HolderFit
    time_Du: HolderFit
    targets: dict
    predicted: dict

    @property
    def passes(self) -> dict:
        fits = {"space_Du": self.space_Du, "time_u": self.time_u, "time_Du": self.time_Du}
        return {k: bool(f.slope >= self.targets[k] and f.reliable) for k, f in fits.items()}

    @property
    def passed(self) -> bool:
        return all(self.passes.values())


def default_space_lags(problem: PdeProblem, min_lags: int = 6) -> tuple:
    """Lags between the finest drift wavelength and the parabolic scale T^{1/a}.

    Below the finest wavelength Du is smooth and above T^{1/a} the semigroup
    has not regularized yet, so only this window shows the Schauder exponent.
    Widened dyadically when it holds fewer than ``min_lags`` lags.
    """
    grid = problem.grid
    k = np.linalg.norm(problem.drift.wavevectors, axis=1)
    lo = 2 * np.pi / k.max() if k.size and k.max() > 0 else grid.h
    lo = max(lo, grid.h)
    hi = max(problem.T ** (1.0 / problem.measure.alpha), lo)
    cap = grid.h * grid.N / 4
    while np.floor(np.log2(hi / lo) + 1e-9) + 1 < min_lags and (lo > grid.h or hi < cap):
        lo, hi = max(lo / 2, grid.h), min(hi * 2, cap)
    return lo, hi


def schauder_report(
    sol: MildSolution,
    params: RegularityParams,
    t_index: int = 0,
    space_lags: Optional[Sequence[float]] = None,
    time_lags: Optional[Sequence[float]] = None,
    slack: float = 0.1,
) -> SchauderReport:
    """Hoelder fits of Du in space and of u, Du in time against the Schauder targets.

    Targets: space(Du) >= theta - 1 - eps - slack, time(u) >= theta/a - slack,
    time(Du) >= (theta - 1)/a - slack.
    """
    problem = sol.problem
    grid = problem.grid
    dt = sol.times[1] - sol.times[0]
    if space_lags is None:
        space_lags = default_space_lags(problem)
    space = holder_exponent(sol.Du[t_index, 0], spacing=grid.h, lag_range=space_lags,
                            periodic=True, axis=-1)
    time_u = holder_exponent(sol.u, spacing=dt, lag_range=time_lags, axis=0)
    time_Du = holder_exponent(sol.Du, spacing=dt, lag_range=time_lags, axis=0)
    th, a, eps = params.theta, params.alpha, params.eps
    predicted = {"space_Du": th - 1 - eps, "time_u": th / a, "time_Du": (th - 1) / a}
    targets = {k: v - slack for k, v in predicted.items()}
    return SchauderReport(space, time_u, time_Du, targets, predicted)


def green_gradient_exponent(
    measure: SpectralMeasure,
    drift: DriftField,
    grid: Grid,
    T: float = 0.25,
    steps: int = 64,
) -> float:
    """Growth rate (per dyadic level) of sup|D G F| for the level-j atoms of F.

    Positive values mean the pointwise gradient of the Green kernel blows up
    as finer levels are added; negative values mean the level contributions
    are summable.
    """
    times = np.linspace(0.0, T, steps + 1)
    sig = drift.sigma(times)
    levels = np.unique(drift.levels)
    sups = []
    for j in levels:
        part = drift.truncated(j)
        keep = part.levels == j
        single = DriftField(drift.d, part.wavevectors[keep], part.components[keep],
                            part.amplitudes[keep], part.phases[keep], part.levels[keep],
                            drift.time_exponent, drift.T, drift.t_floor)
        base = single.on_grid(grid, drift.T).values[0]
        phi = sig.reshape((-1,) + (1,) * grid.d) * base[None]
        g = green_apply(measure, phi, times, grid, 0)
        grad = _spectral_gradient(grid, grid.fft(g.values)[None])[0]
        sups.append(np.abs(grad).max())
    return float(np.polyfit(levels * np.log(2.0), np.log(sups), 1)[0])


def green_gradient_scan(
    measure: SpectralMeasure,
    params: RegularityParams,
    offset: float = 0.15,
    grid: Optional[Grid] = None,
    T: float = 0.25,
    levels: int = 8,
    seed: int = 0,
) -> dict:
    """Gradient growth rates of the Green kernel at gamma = threshold -/+ offset.

    The pointwise gradient exists above gamma = 2 - a(1 - 1/r) + d/p, so the
    rate should be positive below and negative above.  Lacunary drifts are
    spread out in space and constant in time, so they only probe the
    threshold sharply at p = r = infinity.
    """
    from .drift import DriftSpec, build_drift

    if not (np.isinf(params.p) and np.isinf(params.r)):
        raise ValueError("the lacunary scan is only sharp for p = r = infinity")

    thr = params.green_gradient_threshold
    grid = Grid(measure.d, np.pi, 2048) if grid is None else grid
    rates = {}
    for gam in (thr - offset, thr + offset):
        spec = DriftSpec(gamma=gam, levels=levels, j_min=2, d=measure.d, T=T, seed=seed)
        rates[gam] = green_gradient_exponent(measure, build_drift(spec), grid, T=T)
    below, above = rates.values()
    return {"threshold": thr, "gammas": list(rates), "rates": [below, above],
            "flips": bool(below > 0 > above)}
