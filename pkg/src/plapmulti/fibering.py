"""Radial stationarity equation along rays of fields and its root structure.

Dividing the radial derivative of the energy along t -> t*v by t**(alpha-1)
gives the fiber equation

    F(t) = t**(p-alpha) - B t**(beta-alpha) + lam C t**(gamma-alpha) - lam A = 0,

whose positive roots mark the radial critical points of the energy along the
ray of v.  The exponent ordering alpha < p < beta < gamma limits the sign
changes, so F has at most three positive roots t1 < t2 < t3.  Directions
whose equation has exactly three simple roots form the triple-root region;
the first and third roots index the two negative-energy solution branches.

Root finding is structural rather than scan based: the derivative F' reduces
to a three-term function with a single interior minimum, so its (at most
two) zeros split (0, inf) into monotone pieces of F.  Each piece is bisected
to machine precision.  No grid density is involved, so closely spaced roots
are found whenever they are distinguishable in floating point; roots closer
than 1e-6 relative are flagged degenerate and excluded from the triple-root
region, which is open.
"""

from dataclasses import dataclass

import numpy as np

from .functionals import ExponentConfig, Moments, moments, perturbation_energy, perturbation_gradient
from .mesh import Mesh

__all__ = [
    "FiberingRoots",
    "TruncatedRoots",
    "fiber_equation",
    "fiber_equation_derivative",
    "truncated_fiber_equation",
    "find_roots",
    "truncated_roots",
    "in_triple_root_region",
    "interlacing",
    "branch_value",
    "branch_gradient",
    "roots_csv_rows",
]

BRANCHES = ("first", "third")

_DEGENERATE_GAP = 1e-6
_DEGENERATE_SLOPE = 1e-10


@dataclass(frozen=True)
class FiberingRoots:
    """Ordered positive roots of the fiber equation with slope classification.

    slopes holds the sign of dF/dt at each root (+1, -1, or 0); for three
    simple roots the pattern is (+1, -1, +1).  degenerate is set when two
    roots nearly collide or a root has nearly vanishing slope.
    """

    roots: tuple[float, ...]
    slopes: tuple[int, ...]
    degenerate: bool

    @property
    def count(self) -> int:
        return len(self.roots)


@dataclass(frozen=True)
class TruncatedRoots:
    """The two roots of the C-free truncated fiber equation."""

    t1: float
    t2: float


def _check_t(t: float) -> float:
    t = float(t)
    if t <= 0:
        raise ValueError(f"fiber parameter t must be > 0, got {t}")
    return t


def fiber_equation(t: float, m: Moments, cfg: ExponentConfig) -> float:
    """Value of F(t) = t**(p-a) - B t**(b-a) + lam C t**(g-a) - lam A."""
    t = _check_t(t)
    pa, ba, ga = cfg.p - cfg.alpha, cfg.beta - cfg.alpha, cfg.gamma - cfg.alpha
    return t**pa - m.b * t**ba + cfg.lam * m.c * t**ga - cfg.lam * m.a


def fiber_equation_derivative(t: float, m: Moments, cfg: ExponentConfig) -> float:
    """Analytic dF/dt."""
    t = _check_t(t)
    pa, ba, ga = cfg.p - cfg.alpha, cfg.beta - cfg.alpha, cfg.gamma - cfg.alpha
    return pa * t ** (pa - 1) - ba * m.b * t ** (ba - 1) + cfg.lam * ga * m.c * t ** (ga - 1)


def truncated_fiber_equation(t: float, m: Moments, cfg: ExponentConfig) -> float:
    """F with the C term dropped: t**(p-a) - B t**(b-a) - lam A."""
    t = _check_t(t)
    pa, ba = cfg.p - cfg.alpha, cfg.beta - cfg.alpha
    return t**pa - m.b * t**ba - cfg.lam * m.a


def _bisect(f, lo: float, hi: float) -> float:
    """Bisection to machine precision; f(lo) and f(hi) must differ in sign."""
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("bisection bracket does not change sign")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fhi > 0):
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
        if hi - lo <= 1e-16 * hi:
            break
    return 0.5 * (lo + hi)


def _shrink_until(f, t0: float, predicate, factor: float = 10.0, limit: int = 400) -> float:
    t = t0
    for _ in range(limit):
        t /= factor
        if predicate(f(t)):
            return t
    raise ValueError("could not bracket root toward zero")


def _grow_until(f, t0: float, predicate, factor: float = 10.0, limit: int = 400) -> float:
    t = t0
    for _ in range(limit):
        t *= factor
        if predicate(f(t)):
            return t
    raise ValueError("could not bracket root toward infinity")


def _concave_profile_roots(mb: float, lam_a: float, pa: float, ba: float) -> list[float]:
    """Roots of t**pa - mb t**ba - lam_a (increasing then decreasing when mb > 0)."""
    f = lambda t: t**pa - mb * t**ba - lam_a
    if mb == 0.0:
        return [lam_a ** (1.0 / pa)] if lam_a > 0 else []
    t_peak = (pa / (ba * mb)) ** (1.0 / (ba - pa))
    if lam_a == 0.0:
        # positive near zero, single descending crossing
        return [mb ** (-1.0 / (ba - pa))]
    peak = f(t_peak)
    if peak < 0:
        return []
    if peak == 0.0:
        return [t_peak, t_peak]
    lo = _shrink_until(f, t_peak, lambda y: y < 0)
    hi = _grow_until(f, t_peak, lambda y: y < 0)
    return [_bisect(f, lo, t_peak), _bisect(f, t_peak, hi)]


def find_roots(m: Moments, cfg: ExponentConfig) -> FiberingRoots:
    """All positive roots of the fiber equation, ordered, with classification.

    Raises ValueError for an all-zero moment triple (zero field).  The root
    count is 0-3; the triple-root pattern carries slopes (+1, -1, +1).
    """
    if m.degenerate:
        raise ValueError("all moments vanish: the zero field has no fiber equation")
    pa, ba, ga = cfg.p - cfg.alpha, cfg.beta - cfg.alpha, cfg.gamma - cfg.alpha
    lam_a = cfg.lam * m.a
    lam_c = cfg.lam * m.c
    f = lambda t: t**pa - m.b * t**ba + lam_c * t**ga - lam_a

    if lam_c == 0.0:
        roots = _concave_profile_roots(m.b, lam_a, pa, ba)
    elif m.b == 0.0:
        # both power terms increase: strictly monotone, at most one root
        roots = []
        if lam_a > 0:
            t0 = lam_a ** (1.0 / pa)
            lo = t0 if f(t0) < 0 else _shrink_until(f, t0, lambda y: y < 0)
            hi = _grow_until(f, lo, lambda y: y > 0)
            roots = [_bisect(f, lo, hi)]
    else:
        # reduced derivative psi(t) = pa - ba*B*t**(beta-p) + ga*lamC*t**(gamma-p)
        # has a unique minimum; its sign there decides the monotone structure.
        bp, gp = cfg.beta - cfg.p, cfg.gamma - cfg.p
        psi = lambda t: pa - ba * m.b * t**bp + ga * lam_c * t**gp
        t_m = (ba * m.b * bp / (ga * lam_c * gp)) ** (1.0 / (gp - bp))
        if psi(t_m) >= 0:
            # F strictly nondecreasing: at most one root
            roots = []
            if lam_a > 0:
                fm = f(t_m)
                if fm == 0.0:
                    roots = [t_m]
                else:
                    lo = t_m if fm < 0 else _shrink_until(f, t_m, lambda y: y < 0)
                    hi = t_m if fm > 0 else _grow_until(f, t_m, lambda y: y > 0)
                    roots = [_bisect(f, lo, hi)]
        else:
            lo_psi = _shrink_until(psi, t_m, lambda y: y > 0)
            hi_psi = _grow_until(psi, t_m, lambda y: y > 0)
            tau1 = _bisect(psi, lo_psi, t_m)
            tau2 = _bisect(psi, t_m, hi_psi)
            f1, f2 = f(tau1), f(tau2)
            roots = []
            if lam_a > 0 and f1 > 0:
                lo = _shrink_until(f, tau1, lambda y: y < 0)
                roots.append(_bisect(f, lo, tau1))
            elif f1 == 0.0:
                roots.append(tau1)
            if f1 > 0 > f2:
                roots.append(_bisect(f, tau1, tau2))
            if f2 < 0:
                hi = _grow_until(f, tau2, lambda y: y > 0)
                roots.append(_bisect(f, tau2, hi))
            elif f2 == 0.0 and f1 != 0.0:
                roots.append(tau2)

    roots = sorted(roots)
    slopes = []
    degenerate = False
    for r in roots:
        d = fiber_equation_derivative(r, m, cfg)
        scale = (
            pa * r ** (pa - 1) + ba * m.b * r ** (ba - 1) + ga * lam_c * r ** (ga - 1)
        )
        if abs(d) <= _DEGENERATE_SLOPE * scale:
            slopes.append(0)
            degenerate = True
        else:
            slopes.append(1 if d > 0 else -1)
    for r_prev, r_next in zip(roots, roots[1:]):
        if r_next - r_prev < _DEGENERATE_GAP * r_next:
            degenerate = True
    return FiberingRoots(tuple(roots), tuple(slopes), degenerate)


def truncated_roots(m: Moments, cfg: ExponentConfig) -> TruncatedRoots:
    """The two roots of the truncated equation; raises if they do not exist."""
    if m.degenerate:
        raise ValueError("all moments vanish")
    pa, ba = cfg.p - cfg.alpha, cfg.beta - cfg.alpha
    rts = _concave_profile_roots(m.b, cfg.lam * m.a, pa, ba)
    if len(rts) != 2 or rts[0] == rts[1]:
        raise ValueError(
            "truncated fiber equation does not have two distinct roots "
            "(lambda too large for this direction)"
        )
    return TruncatedRoots(rts[0], rts[1])


def in_triple_root_region(m: Moments, cfg: ExponentConfig) -> bool:
    """True when the fiber equation has exactly three simple roots."""
    r = find_roots(m, cfg)
    return r.count == 3 and not r.degenerate


def interlacing(m: Moments, cfg: ExponentConfig) -> tuple[TruncatedRoots, bool]:
    """Truncated roots and whether t1 < tt1 < tt2 < t2 holds strictly.

    Requires a triple-root moment tuple and a C moment > 0 (otherwise the
    two equations coincide and the comparison is void).
    """
    if m.c == 0.0 or cfg.lam == 0.0:
        raise ValueError("interlacing needs a nonzero C term; the equations coincide")
    full = find_roots(m, cfg)
    if full.count != 3 or full.degenerate:
        raise ValueError("interlacing requires a triple-root moment tuple")
    tr = truncated_roots(m, cfg)
    t1, t2 = full.roots[0], full.roots[1]
    ok = t1 < tr.t1 < tr.t2 < t2
    return tr, bool(ok)


def _branch_root(m: Moments, cfg: ExponentConfig, branch: str) -> float:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    r = find_roots(m, cfg)
    if branch == "first":
        if r.count == 0:
            raise ValueError("fiber equation has no positive root along this direction")
        return r.roots[0]
    if r.count != 3 or r.degenerate:
        raise ValueError("third branch needs a direction in the triple-root region")
    return r.roots[2]


def ray_energy(t: float, m: Moments, cfg: ExponentConfig) -> float:
    """Energy along the ray at scale t, from moments alone: t**p/p + perturbation.

    Matches the true energy of t*v exactly when v has unit gradient norm.
    """
    return t**cfg.p / cfg.p + perturbation_energy(m.scaled(t, cfg), cfg)


def branch_value(mesh: Mesh, v: np.ndarray, branch: str, cfg: ExponentConfig) -> float:
    """Ray energy at the first or third fiber root of the direction v.

    The value equals the true energy of t_i(v) * v for unit-norm v.  Raises
    on the zero field, and for the third branch when v leaves the
    triple-root region.
    """
    m = moments(mesh, v, cfg)
    t = _branch_root(m, cfg, branch)
    return ray_energy(t, m, cfg)


def branch_gradient(mesh: Mesh, v: np.ndarray, branch: str, cfg: ExponentConfig) -> np.ndarray:
    """Exact nodal gradient of branch_value via the envelope identity.

    Radial stationarity kills the t-sensitivity, leaving
    t_i(v) * (perturbation gradient at t_i(v) * v).  Raises when the root is
    nearly degenerate (the implicit root function would blow up there).
    """
    m = moments(mesh, v, cfg)
    t = _branch_root(m, cfg, branch)
    d = fiber_equation_derivative(t, m, cfg)
    pa, ba, ga = cfg.p - cfg.alpha, cfg.beta - cfg.alpha, cfg.gamma - cfg.alpha
    scale = pa * t ** (pa - 1) + ba * m.b * t ** (ba - 1) + cfg.lam * ga * m.c * t ** (ga - 1)
    if abs(d) <= _DEGENERATE_SLOPE * scale:
        raise ValueError("fiber root is nearly degenerate; branch gradient undefined")
    return t * perturbation_gradient(mesh, t * v, cfg)


def roots_csv_rows(entries) -> list[str]:
    """CSV rows (lambda, A, B, C, t1, t2, t3, in_region) for (cfg, moments) pairs."""
    rows = ["lambda,A,B,C,t1,t2,t3,in_region"]
    for cfg, m in entries:
        r = find_roots(m, cfg)
        padded = list(r.roots) + [float("nan")] * (3 - r.count)
        in_region = r.count == 3 and not r.degenerate
        vals = [cfg.lam, m.a, m.b, m.c, *padded]
        rows.append(
            ",".join(format(x, ".17g") for x in vals) + f",{str(in_region).lower()}"
        )
    return rows
