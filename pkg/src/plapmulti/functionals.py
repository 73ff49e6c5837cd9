"""Energy functional of the three-power Dirichlet problem and its gradients.

The total energy of a field v splits into a gradient (kinetic) term and a
perturbation built from three power integrals,

    total = kinetic - (lam/alpha) * A - (1/beta) * B + (lam/gamma) * C,

where A, B, C integrate |v|**alpha, |v|**beta, |v|**gamma and the exponents
satisfy 1 < alpha < p < beta < gamma.  The gradients returned here are exact
derivatives of the discrete energy with respect to interior nodal values,
i.e. weak residuals of the discretized Euler-Lagrange equation.

A truncated variant feeds only the positive part of v into the power terms;
its critical points are nonnegative, which is how the mountain-pass solver
produces a nonnegative solution.
"""

import json
from dataclasses import dataclass

import numpy as np

from .mesh import (
    Mesh,
    dirichlet_p_energy,
    dirichlet_p_energy_gradient,
    integrate_power,
    rectify,
    weighted_norm,
)

__all__ = [
    "ExponentConfig",
    "Moments",
    "EnergyBreakdown",
    "moments",
    "perturbation_energy",
    "perturbation_gradient",
    "energy",
    "truncated_energy",
    "energy_gradient",
    "truncated_energy_gradient",
    "coercivity_bound",
]


@dataclass(frozen=True)
class ExponentConfig:
    """Exponent/parameter tuple (alpha, p, beta, gamma, lam) with validation.

    Requires 1 < alpha < p < beta < gamma, lam >= 0, and gamma below the
    critical Sobolev exponent p*N/(N-p) when p < N.
    """

    alpha: float
    p: float
    beta: float
    gamma: float
    lam: float
    dimension: int = 1

    def __post_init__(self):
        if not (1.0 < self.alpha < self.p < self.beta < self.gamma):
            raise ValueError(
                "exponents must satisfy 1 < alpha < p < beta < gamma, got "
                f"alpha={self.alpha}, p={self.p}, beta={self.beta}, gamma={self.gamma}"
            )
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.p < self.dimension:
            p_star = self.p * self.dimension / (self.dimension - self.p)
            if self.gamma >= p_star:
                raise ValueError(
                    f"gamma={self.gamma} must stay below the critical exponent {p_star}"
                )

    def with_lambda(self, lam: float) -> "ExponentConfig":
        return ExponentConfig(self.alpha, self.p, self.beta, self.gamma, lam, self.dimension)


@dataclass(frozen=True)
class Moments:
    """Power integrals (A, B, C) of |v| at exponents alpha, beta, gamma."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.c < 0:
            raise ValueError(f"moments must be nonnegative, got {self}")

    def scaled(self, t: float, cfg: ExponentConfig) -> "Moments":
        """Moments of t*v given the moments of v (exact power scaling)."""
        return Moments(
            t**cfg.alpha * self.a, t**cfg.beta * self.b, t**cfg.gamma * self.c
        )

    @property
    def degenerate(self) -> bool:
        return self.a == 0.0 and self.b == 0.0 and self.c == 0.0


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy of one field, split by term, with the weak-residual norm."""

    kinetic: float
    term_a: float
    term_b: float
    term_c: float
    total: float
    residual_norm: float

    def to_json_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "termA": self.term_a,
            "termB": self.term_b,
            "termC": self.term_c,
            "total": self.total,
            "residual": self.residual_norm,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def moments(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig) -> Moments:
    """Power integrals of |v| at the three configured exponents."""
    return Moments(
        integrate_power(mesh, v, cfg.alpha),
        integrate_power(mesh, v, cfg.beta),
        integrate_power(mesh, v, cfg.gamma),
    )


def perturbation_energy(m: Moments, cfg: ExponentConfig) -> float:
    """Non-kinetic part -(lam/alpha)A - (1/beta)B + (lam/gamma)C."""
    return -(cfg.lam / cfg.alpha) * m.a - m.b / cfg.beta + (cfg.lam / cfg.gamma) * m.c


def perturbation_gradient(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig) -> np.ndarray:
    """Exact nodal derivative of perturbation_energy(moments(v)); zero on the boundary."""
    v = np.asarray(v, dtype=float)
    absv = np.abs(v)
    sgn = np.sign(v)
    nonlin = (
        -cfg.lam * absv ** (cfg.alpha - 1)
        - absv ** (cfg.beta - 1)
        + cfg.lam * absv ** (cfg.gamma - 1)
    ) * sgn
    out = mesh.weights * nonlin
    out[mesh.boundary] = 0.0
    return out


def _breakdown(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig, residual: float) -> EnergyBreakdown:
    kin = dirichlet_p_energy(mesh, v, cfg.p)
    m = moments(mesh, v, cfg)
    term_a = -(cfg.lam / cfg.alpha) * m.a
    term_b = -m.b / cfg.beta
    term_c = (cfg.lam / cfg.gamma) * m.c
    return EnergyBreakdown(
        kinetic=kin,
        term_a=term_a,
        term_b=term_b,
        term_c=term_c,
        total=kin + term_a + term_b + term_c,
        residual_norm=residual,
    )


def energy(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig) -> EnergyBreakdown:
    """Full energy breakdown of v, including the weak-residual norm."""
    res = weighted_norm(mesh, energy_gradient(mesh, v, cfg))
    return _breakdown(mesh, v, cfg, res)


def energy_gradient(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig) -> np.ndarray:
    """Exact nodal gradient of the discrete energy; zero at boundary nodes."""
    return dirichlet_p_energy_gradient(mesh, v, cfg.p) + perturbation_gradient(mesh, v, cfg)


def truncated_energy(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig) -> float:
    """Kinetic term of v plus the perturbation evaluated at the positive part."""
    plus = rectify(v, "positive-part")
    return dirichlet_p_energy(mesh, v, cfg.p) + perturbation_energy(moments(mesh, plus, cfg), cfg)


def truncated_energy_gradient(mesh: Mesh, v: np.ndarray, cfg: ExponentConfig) -> np.ndarray:
    """Gradient of truncated_energy: kinetic gradient of v, power terms at max(v, 0).

    Pairing this gradient with the negative part of v isolates the gradient
    energy of the negative part; the identity is exact on the discrete level
    when sign changes happen at zero-valued nodes and acquires O(h) quadrature
    terms on edges that straddle a sign change.
    """
    plus = rectify(v, "positive-part")
    return dirichlet_p_energy_gradient(mesh, v, cfg.p) + perturbation_gradient(mesh, plus, cfg)


def coercivity_bound(cfg: ExponentConfig, domain_measure: float) -> float:
    """Finite lower bound for the perturbation energy over all fields.

    Interpolation between power integrals gives, with s the gamma-integral
    scale, the pointwise bound

        perturbation >= (lam/gamma) s**gamma - c1 s**beta - lam c2 s**alpha,

    c1 = |Omega|**(1-beta/gamma)/beta and c2 = |Omega|**(1-alpha/gamma)/alpha.
    The right-hand side is minimized over s >= 0 by a log-grid scan refined
    with golden-section search.  Requires lam > 0.
    """
    if cfg.lam <= 0:
        raise ValueError("coercivity bound requires lambda > 0")
    if domain_measure <= 0:
        raise ValueError("domain measure must be positive")
    c1 = domain_measure ** (1.0 - cfg.beta / cfg.gamma) / cfg.beta
    c2 = domain_measure ** (1.0 - cfg.alpha / cfg.gamma) / cfg.alpha

    def profile(s):
        return (cfg.lam / cfg.gamma) * s**cfg.gamma - c1 * s**cfg.beta - cfg.lam * c2 * s**cfg.alpha

    # beyond s_hi the gamma term dominates both others; bracket then refine
    s_hi = max(
        (cfg.gamma * c1 / cfg.lam) ** (1.0 / (cfg.gamma - cfg.beta)),
        (cfg.gamma * c2) ** (1.0 / (cfg.gamma - cfg.alpha)),
        1.0,
    )
    grid = np.geomspace(1e-12, 10.0 * s_hi, 2001)
    vals = profile(grid)
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    phi_ratio = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - phi_ratio * (b - a)
    x2 = a + phi_ratio * (b - a)
    f1, f2 = profile(x1), profile(x2)
    for _ in range(200):
        if b - a < 1e-14 * max(1.0, b):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi_ratio * (b - a)
            f1 = profile(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi_ratio * (b - a)
            f2 = profile(x2)
    return float(min(vals[k], profile(0.5 * (a + b)), 0.0))
