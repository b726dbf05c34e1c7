"""Parameter admissibility and derived exponents (theta, chi, eps')."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["RegularityParams", "GateReport", "check_gate"]


def _inv(x: float) -> float:
    return 0.0 if np.isinf(x) else 1.0 / x


@dataclass(frozen=True)
class RegularityParams:
    """Indices of the drift space L^r([0,T], B^{-1+gamma}_{p,q}) and the noise index."""

    alpha: float
    d: int
    p: float = np.inf
    q: float = np.inf
    r: float = np.inf
    gamma: float = 0.9
    eps: float = 0.02

    def __post_init__(self):
        if not (1.0 < self.alpha <= 2.0):
            raise ValueError("alpha must lie in (1, 2]")
        if min(self.p, self.q, self.r) < 1:
            raise ValueError("p, q, r must be >= 1")

    @property
    def theta(self) -> float:
        return self.gamma - 1.0 + self.alpha - self.d * _inv(self.p) - self.alpha * _inv(self.r)

    @property
    def chi(self) -> float:
        return 0.5 - (_inv(self.r) + self.d * _inv(self.p) / self.alpha
                      + (1.0 - self.gamma) / self.alpha)

    @property
    def eps_prime(self) -> float:
        return -_inv(self.r) + ((self.gamma - 1.0 + self.theta - 1.0) / self.alpha
                                - self.d * _inv(self.p) / self.alpha)

    @property
    def weak_alpha_threshold(self) -> float:
        if _inv(self.r) >= 1.0:
            return np.inf
        return (1.0 + self.d * _inv(self.p)) / (1.0 - _inv(self.r))

    @property
    def weak_gamma_threshold(self) -> float:
        return (3.0 - self.alpha + self.d * _inv(self.p) + self.alpha * _inv(self.r)) / 2.0

    @property
    def dyn_gamma_threshold(self) -> float:
        return (3.0 - self.alpha + 2 * self.d * _inv(self.p) + 2 * self.alpha * _inv(self.r)) / 2.0

    @property
    def green_gradient_threshold(self) -> float:
        """gamma above which D G^alpha Phi exists pointwise."""
        return 2.0 - self.alpha * (1.0 - _inv(self.r)) + self.d * _inv(self.p)

    def with_gamma(self, gamma: float) -> "RegularityParams":
        return RegularityParams(self.alpha, self.d, self.p, self.q, self.r, gamma, self.eps)

    def as_dict(self) -> dict:
        return {k: (None if np.isinf(v) else v) if isinstance(v, float) else v
                for k, v in asdict(self).items()}


@dataclass(frozen=True)
class GateReport:
    weak_ok: bool
    dyn_ok: bool
    theta: float
    chi: float
    eps_prime: float
    krylov_roeckner_ok: bool
    alpha_threshold: float
    weak_gamma_threshold: float
    dyn_gamma_threshold: float

    def as_dict(self) -> dict:
        return asdict(self)


def check_gate(params: RegularityParams) -> GateReport:
    """Weak well-posedness and dynamics-reconstruction conditions.

    weak: alpha > (1 + d/p)/(1 - 1/r) and gamma in ((3 - a + d/p + a/r)/2, 1);
    dynamics: additionally gamma > (3 - a + 2d/p + 2a/r)/2.
    """
    p = params
    alpha_ok = p.alpha > p.weak_alpha_threshold
    weak = bool(alpha_ok and p.weak_gamma_threshold < p.gamma < 1.0)
    dyn = bool(weak and p.gamma > p.dyn_gamma_threshold)
    kr = bool(p.d * _inv(p.p) + 2.0 * _inv(p.r) < 1.0)
    return GateReport(
        weak_ok=weak,
        dyn_ok=dyn,
        theta=p.theta,
        chi=p.chi,
        eps_prime=p.eps_prime,
        krylov_roeckner_ok=kr,
        alpha_threshold=p.weak_alpha_threshold,
        weak_gamma_threshold=p.weak_gamma_threshold,
        dyn_gamma_threshold=p.dyn_gamma_threshold,
    )
