"""Critical-point solvers: two fibered branches, a mountain pass, and Newton polish.

The two negative-energy solutions come from minimizing the branch value
(energy at the first or third fiber root) over the unit sphere of the
gradient norm with projected descent: envelope gradient, tangential
projection, Armijo backtracking with a Barzilai-Borwein initial step,
nodewise absolute value, re-projection.  The positive-energy solution comes
from a discrete mountain-pass algorithm on the truncated energy: a
piecewise-linear path from zero to a low-energy endpoint is relaxed by
pushing its maximal-energy point downhill until the path maximum is
critical.  All solvers finish with a damped Newton polish of the weak
residual, guarded so a failed polish never replaces a good iterate.

Threshold estimation reproduces the smallness conditions on lambda under
which the three branches and the mountain geometry coexist, turning each
condition into a closed-form scalar maximization or a bisection in lambda.
"""

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fibering
from .functionals import (
    EnergyBreakdown,
    ExponentConfig,
    energy,
    energy_gradient,
    moments,
    perturbation_gradient,
    truncated_energy,
    truncated_energy_gradient,
)
from .mesh import (
    Mesh,
    bump_field,
    dirichlet_p_energy_gradient,
    gradient,
    integrate_power,
    project_sphere,
    rectify,
    save_field,
    w1p_norm,
    weighted_norm,
)

__all__ = [
    "SolverOptions",
    "SolveResult",
    "LambdaStarEstimate",
    "maximize_b_on_sphere",
    "estimate_lambda_star",
    "minimize_branch",
    "mountain_pass",
    "refine_critical_point",
    "save_result",
]


@dataclass(frozen=True)
class SolverOptions:
    """Iteration limits, step control, and tolerances shared by all solvers."""

    max_iterations: int = 20000
    step_init: float = 1.0
    armijo: float = 1e-4
    residual_tolerance: float = 1e-8
    stationarity_tolerance: float = 1e-7
    path_points: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.step_init <= 0:
            raise ValueError("step_init must be > 0")
        if not 0.0 < self.armijo < 1.0:
            raise ValueError("armijo factor must lie in (0, 1)")
        if self.residual_tolerance <= 0 or self.stationarity_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        if self.path_points < 5:
            raise ValueError("path_points must be >= 5")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class SolveResult:
    """One computed critical point with its energy breakdown and provenance.

    For the fibered branches, solution == t * direction nodewise with
    direction on the unit sphere; the pass branch reports t = 0 and no
    direction.
    """

    solution: np.ndarray
    energy: EnergyBreakdown
    branch: str
    iterations: int
    converged: bool
    t: float
    direction: np.ndarray | None = None
    message: str = ""

    def summary_dict(self) -> dict:
        return {
            "branch": self.branch,
            "energy": self.energy.to_json_dict(),
            "iterations": self.iterations,
            "t_scale": self.t,
            "converged": self.converged,
            "message": self.message,
        }


# ---------------------------------------------------------------------------
# Newton polish


def _regularized_hessian(mesh: Mesh, u: np.ndarray, cfg: ExponentConfig, truncated: bool):
    """Sparse Hessian of the discrete energy with regularized kernels.

    The gradient kernel |g|**(p-2) and the nonlinearity diagonal |u|**(q-2)
    are evaluated as (x**2 + eps**2)**((q-2)/2) with eps tied to the mean
    magnitude, which only matters for exponents below 2.
    """
    g = gradient(mesh, u)
    eps_g = 1e-10 * (np.mean(np.abs(g)) + 1e-300)
    kernel = (g * g + eps_g * eps_g) ** ((cfg.p - 2.0) / 2.0)
    c_edge = (cfg.p - 1.0) * mesh.edge_weight * kernel / mesh.edge_h**2

    i, j = mesh.edge_tail, mesh.edge_head
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([c_edge, c_edge, -c_edge, -c_edge])

    base = rectify(u, "positive-part") if truncated else np.abs(u)
    eps_v = 1e-10 * (np.mean(base) + 1e-300)
    reg = base * base + eps_v * eps_v
    fprime = (
        -cfg.lam * (cfg.alpha - 1.0) * reg ** ((cfg.alpha - 2.0) / 2.0)
        - (cfg.beta - 1.0) * reg ** ((cfg.beta - 2.0) / 2.0)
        + cfg.lam * (cfg.gamma - 1.0) * reg ** ((cfg.gamma - 2.0) / 2.0)
    )
    if truncated:
        fprime = np.where(u > 0, fprime, 0.0)
    diag_idx = np.arange(mesh.n_nodes)
    rows = np.concatenate([rows, diag_idx])
    cols = np.concatenate([cols, diag_idx])
    vals = np.concatenate([vals, mesh.weights * fprime])

    h = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tolil()
    bnd = np.flatnonzero(mesh.boundary)
    h[bnd, :] = 0.0
    h[bnd, bnd] = 1.0
    return h.tocsr()


def _newton(mesh, u0, cfg, tol, truncated=False, max_iter=60):
    """Damped Newton on the weak residual; returns (u, residual, iters, converged)."""
    grad = truncated_energy_gradient if truncated else energy_gradient
    u = np.array(u0, dtype=float)
    g = grad(mesh, u, cfg)
    res = weighted_norm(mesh, g)
    for it in range(max_iter):
        if res <= tol:
            return u, res, it, True
        h = _regularized_hessian(mesh, u, cfg, truncated)
        try:
            delta = spla.spsolve(h, -g)
        except Exception:
            return u, res, it, False
        if not np.all(np.isfinite(delta)):
            return u, res, it, False
        step = 1.0
        improved = False
        while step >= 2.0**-40:
            u_t = u + step * delta
            g_t = grad(mesh, u_t, cfg)
            res_t = weighted_norm(mesh, g_t)
            if res_t <= (1.0 - 1e-4 * step) * res:
                u, g, res = u_t, g_t, res_t
                improved = True
                break
            step /= 2.0
        if not improved:
            return u, res, it, res <= tol
    return u, res, max_iter, res <= tol


def _polish_nonnegative(mesh, u, cfg, tol, truncated, floor=-1e-10, rounds=3):
    """Newton polish that clamps microscopic negative values and re-polishes.

    tol = 0 drives Newton until no step improves the residual (its floor).
    """
    total_it = 0
    res = np.inf
    for _ in range(rounds):
        u, res, it, _ = _newton(mesh, u, cfg, tol, truncated=truncated)
        total_it += it
        if u.min() >= floor:
            break
        u = np.where(u < 0, 0.0, u)
    else:
        u, res, it, _ = _newton(mesh, u, cfg, tol, truncated=truncated)
        total_it += it
    return u, res, total_it, res <= tol


def _residual_scale(mesh, u, cfg):
    """Magnitude of the gradient pieces before cancellation (scale reference)."""
    kin = weighted_norm(mesh, dirichlet_p_energy_gradient(mesh, u, cfg.p))
    per = weighted_norm(mesh, perturbation_gradient(mesh, u, cfg))
    return kin + per


def refine_critical_point(
    mesh: Mesh,
    u0: np.ndarray,
    cfg: ExponentConfig,
    opts: SolverOptions,
    branch: str = "first",
    truncated: bool = False,
) -> SolveResult:
    """Damped Newton polish of an approximate critical point.

    Requires the starting residual to be below 1e-2 of the gradient-piece
    scale (Newton is a local method).  Returns the input unchanged when the
    linearization is singular or no step improves the residual; the result
    is validated by the residual alone, since Newton does not descend the
    energy.
    """
    scale = _residual_scale(mesh, u0, cfg) + 1e-300
    grad = truncated_energy_gradient if truncated else energy_gradient
    res0 = weighted_norm(mesh, grad(mesh, u0, cfg))
    if res0 > 1e-2 * scale:
        raise ValueError(
            f"refine_critical_point needs a near-critical start: residual {res0:.3e} "
            f"exceeds 1e-2 of scale {scale:.3e}"
        )
    u, res, its, ok = _newton(mesh, u0, cfg, opts.residual_tolerance, truncated=truncated)
    if res > res0:
        u, res, ok = np.array(u0, dtype=float), res0, res0 <= opts.residual_tolerance
    t = w1p_norm(mesh, u, cfg.p) if branch in fibering.BRANCHES else 0.0
    direction = u / t if (branch in fibering.BRANCHES and t > 0) else None
    return SolveResult(
        solution=u,
        energy=energy(mesh, u, cfg),
        branch=branch,
        iterations=its,
        converged=bool(ok and res <= opts.residual_tolerance),
        t=t,
        direction=direction,
        message="" if ok else "newton stalled or singular linearization",
    )


# ---------------------------------------------------------------------------
# Sphere-constrained maximization of a power integral


def _tangential(g: np.ndarray, normal: np.ndarray) -> np.ndarray:
    nn = float(np.dot(normal, normal))
    if nn == 0.0:
        return np.array(g)
    return g - (float(np.dot(g, normal)) / nn) * normal


def _maximize_power_on_sphere(mesh, q, p, opts):
    """Projected ascent of the |v|**q integral over the unit gradient sphere."""
    v = project_sphere(mesh, bump_field(mesh), p)
    val = integrate_power(mesh, v, q)
    step = opts.step_init
    prev_v = prev_gt = None
    for it in range(opts.max_iterations):
        g = mesh.weights * q * np.abs(v) ** (q - 1.0) * np.sign(v)
        g[mesh.boundary] = 0.0
        normal = dirichlet_p_energy_gradient(mesh, v, p)
        gt = _tangential(g, normal)
        if weighted_norm(mesh, gt) <= opts.stationarity_tolerance:
            return v, it
        if prev_v is not None:
            dv = v - prev_v
            dg = gt - prev_gt
            denom = -float(np.dot(dv, dg))
            if denom > 0:
                step = float(np.dot(dv, dv)) / denom
        step = min(max(step, 1e-14), 1e14)
        gtn2 = float(np.dot(gt, gt))
        prev_v, prev_gt = v, gt
        s = step
        for _ in range(60):
            trial = project_sphere(mesh, rectify(v + s * gt, "absolute"), p)
            trial_val = integrate_power(mesh, trial, q)
            if trial_val >= val + opts.armijo * s * gtn2:
                v, val = trial, trial_val
                break
            s /= 2.0
        else:
            return v, it
    return v, opts.max_iterations


def maximize_b_on_sphere(mesh: Mesh, cfg: ExponentConfig, opts: SolverOptions) -> np.ndarray:
    """First-order maximizer of the beta-power integral on the unit sphere.

    Returns a nonnegative unit-norm field; the single-bump profile this
    produces seeds both fibered branches and the threshold estimate.
    """
    v, _ = _maximize_power_on_sphere(mesh, cfg.beta, cfg.p, opts)
    return v


# ---------------------------------------------------------------------------
# Threshold estimation


def _power_max(a: float, m: float, b: float, n: float) -> tuple[float, float]:
    """Closed-form (max value, argmax) of a*t**m - b*t**n over t > 0 for 0<m<n."""
    t_star = (a * m / (b * n)) ** (1.0 / (n - m))
    return a * t_star**m * (n - m) / n, t_star


@dataclass(frozen=True)
class LambdaStarEstimate:
    """Threshold estimate with the mountain radius and low-energy witness."""

    lambda_star: float
    rho: float
    witness: np.ndarray
    direction: np.ndarray
    lambda_root_margin: float
    lambda_ray_positive: float
    lambda_far_dip: float
    a_max: float
    b_star: float
    c_star: float


def _far_dip(b_star, c_star, cfg_lam, p, beta, gamma):
    """Dip critical point and value of t**p/p - B t**beta/beta + lam C t**gamma/gamma.

    Returns (t_dip, value) or None when the profile has no descending piece.
    """
    bp, gp = beta - p, gamma - p
    eta = lambda t: 1.0 - b_star * t**bp + cfg_lam * c_star * t**gp
    t_eta = (b_star * bp / (cfg_lam * c_star * gp)) ** (1.0 / (gp - bp))
    if eta(t_eta) >= 0:
        return None
    hi = fibering._grow_until(eta, t_eta, lambda y: y > 0)
    t_dip = fibering._bisect(eta, t_eta, hi)
    val = t_dip**p / p - b_star * t_dip**beta / beta + cfg_lam * c_star * t_dip**gamma / gamma
    return t_dip, val


def estimate_lambda_star(mesh: Mesh, cfg: ExponentConfig, opts: SolverOptions) -> LambdaStarEstimate:
    """Estimate the lambda threshold, mountain radius, and witness field.

    Ignores cfg.lam.  Three smallness conditions are made computable with
    the maximizers of the alpha- and beta-power integrals on the unit
    sphere:

    * root margin: max of t**(p-a) - B* t**(b-a) must exceed lam * Amax,
      so the truncated fiber equation keeps two roots on every direction;
    * ray positivity: max of t**(p-a)/p - B* t**(b-a)/beta must exceed
      (lam/alpha) * Amax, which makes the energy ridge positive and defines
      the mountain radius rho as its argmax;
    * far dip: the ray profile t**p/p - B* t**beta/beta + lam C* t**gamma/gamma
      must dip below zero past the ridge; the largest such lam is found by
      bisection.

    The returned threshold is 0.9 * min of the three, and the witness scales
    the beta-maximizer just past the far-dip minimizer while keeping its
    truncated energy nonpositive.
    """
    p, alpha, beta, gamma = cfg.p, cfg.alpha, cfg.beta, cfg.gamma
    v_star, _ = _maximize_power_on_sphere(mesh, beta, p, opts)
    v_alpha, _ = _maximize_power_on_sphere(mesh, alpha, p, opts)
    a_max = integrate_power(mesh, v_alpha, alpha)
    b_star = integrate_power(mesh, v_star, beta)
    c_star = integrate_power(mesh, v_star, gamma)

    pa, ba = p - alpha, beta - alpha
    val7, _ = _power_max(1.0, pa, b_star, ba)
    lam7 = val7 / a_max
    val9, rho = _power_max(1.0 / p, pa, b_star / beta, ba)
    lam9 = alpha * val9 / a_max

    def dips_negative(lam):
        out = _far_dip(b_star, c_star, lam, p, beta, gamma)
        return out is not None and out[1] < 0

    lam_hi = max(lam7, lam9)
    for _ in range(200):
        if not dips_negative(lam_hi):
            break
        lam_hi *= 2.0
    else:
        raise ValueError("far-dip condition never fails; check exponents")
    lam_lo = lam_hi / 2.0
    while not dips_negative(lam_lo):
        lam_lo /= 2.0
        if lam_lo < 1e-300:
            raise ValueError("far-dip condition cannot be satisfied for any lambda")
    for _ in range(200):
        mid = 0.5 * (lam_lo + lam_hi)
        if dips_negative(mid):
            lam_lo = mid
        else:
            lam_hi = mid
        if lam_hi - lam_lo <= 1e-12 * lam_hi:
            break
    lam10 = lam_lo

    lambda_star = 0.9 * min(lam7, lam9, lam10)
    cfg_star = cfg.with_lambda(lambda_star)
    dip = _far_dip(b_star, c_star, lambda_star, p, beta, gamma)
    if dip is None:
        raise ValueError("no dip at the estimated threshold; estimate inconsistent")
    t_dip, _ = dip
    witness = None
    for factor in (1.2, 1.15, 1.1, 1.05, 1.02, 1.0):
        cand = factor * t_dip * v_star
        if truncated_energy(mesh, cand, cfg_star) <= 0.0 and factor * t_dip > rho:
            witness = cand
            break
    if witness is None:
        raise ValueError("could not place a nonpositive-energy witness past the ridge")
    return LambdaStarEstimate(
        lambda_star=float(lambda_star),
        rho=float(rho),
        witness=witness,
        direction=v_star,
        lambda_root_margin=float(lam7),
        lambda_ray_positive=float(lam9),
        lambda_far_dip=float(lam10),
        a_max=float(a_max),
        b_star=float(b_star),
        c_star=float(c_star),
    )


# ---------------------------------------------------------------------------
# Fibered branch minimization


def minimize_branch(
    mesh: Mesh,
    v0: np.ndarray,
    branch: str,
    cfg: ExponentConfig,
    opts: SolverOptions,
) -> SolveResult:
    """Minimize the branch value over the unit sphere and return t * v*.

    Iterations take the envelope gradient, drop its component along the
    sphere normal, backtrack on the branch value, take nodewise absolute
    values, and re-project; third-branch steps that leave the triple-root
    region are rejected by halving.  A guarded Newton polish finishes the
    run; non-convergence returns the best iterate with converged=False.
    """
    if branch not in fibering.BRANCHES:
        raise ValueError(f"branch must be one of {fibering.BRANCHES}, got {branch!r}")
    v = project_sphere(mesh, rectify(v0, "absolute"), cfg.p)
    m = moments(mesh, v, cfg)
    if branch == "third" and not fibering.in_triple_root_region(m, cfg):
        raise ValueError("third-branch seed direction is outside the triple-root region")

    def branch_root(mom):
        roots = fibering.find_roots(mom, cfg)
        if branch == "first":
            return roots.roots[0] if roots.count else None
        if roots.count == 3 and not roots.degenerate:
            return roots.roots[2]
        return None

    t = branch_root(m)
    if t is None:
        raise ValueError("seed direction has no usable fiber root")
    val = fibering.ray_energy(t, m, cfg)
    step = opts.step_init
    prev_v = prev_gt = None
    best = None
    sweeps = 0
    polish_trigger = np.inf

    def record(u_curr, res_curr, t_curr, v_curr):
        nonlocal best
        if best is None or res_curr < best[1]:
            best = (u_curr, res_curr, t_curr, v_curr)

    for it in range(opts.max_iterations):
        sweeps = it
        u = t * v
        res = weighted_norm(mesh, energy_gradient(mesh, u, cfg))
        record(u, res, t, v)
        if res <= opts.residual_tolerance:
            # tighten toward the scale-relative floor before returning
            polished = _try_branch_polish(mesh, u, cfg, opts, branch_root)
            if polished is not None:
                record(*polished)
            break
        g = t * perturbation_gradient(mesh, u, cfg)
        normal = dirichlet_p_energy_gradient(mesh, v, cfg.p)
        gt = _tangential(g, normal)
        gt_norm = weighted_norm(mesh, gt)
        g_norm = weighted_norm(mesh, g) + 1e-300
        if gt_norm <= min(polish_trigger, max(1e-3 * g_norm, opts.stationarity_tolerance)):
            polished = _try_branch_polish(mesh, u, cfg, opts, branch_root)
            if polished is not None:
                u, res, t, v = polished
                record(u, res, t, v)
                if res <= opts.residual_tolerance:
                    break
                m = moments(mesh, v, cfg)
                val = fibering.ray_energy(t, m, cfg)
                prev_v = prev_gt = None
                continue
            polish_trigger = gt_norm / 4.0
        if prev_v is not None:
            dv = v - prev_v
            dg = gt - prev_gt
            denom = float(np.dot(dv, dg))
            if denom > 0:
                step = float(np.dot(dv, dv)) / denom
        step = min(max(step, 1e-16), 1e16)
        gtn2 = float(np.dot(gt, gt))
        if gtn2 == 0.0:
            break
        prev_v, prev_gt = v, gt
        s = step
        accepted = False
        for _ in range(80):
            try:
                trial = project_sphere(mesh, rectify(v - s * gt, "absolute"), cfg.p)
            except ValueError:
                s /= 2.0
                continue
            m_t = moments(mesh, trial, cfg)
            t_t = branch_root(m_t)
            if t_t is None:
                s /= 2.0
                continue
            val_t = fibering.ray_energy(t_t, m_t, cfg)
            if val_t <= val - opts.armijo * s * gtn2:
                v, m, t, val = trial, m_t, t_t, val_t
                accepted = True
                break
            s /= 2.0
        if not accepted:
            polished = _try_branch_polish(mesh, t * v, cfg, opts, branch_root)
            if polished is not None:
                u, res, t, v = polished
                record(u, res, t, v)
            break

    u, res, t, v = best
    converged = res <= opts.residual_tolerance
    total = energy(mesh, u, cfg)
    return SolveResult(
        solution=u,
        energy=total,
        branch=branch,
        iterations=sweeps + 1,
        converged=bool(converged),
        t=t,
        direction=v,
        message="" if converged else "descent stalled above tolerance",
    )


def _try_branch_polish(mesh, u, cfg, opts, branch_root):
    """Newton-polish a branch iterate to its floor; keep only root-consistent improvements."""
    res0 = weighted_norm(mesh, energy_gradient(mesh, u, cfg))
    u_p, res_p, _, _ = _polish_nonnegative(mesh, u, cfg, 0.0, truncated=False)
    if res_p >= res0 or u_p.min() < -1e-10:
        return None
    t_p = w1p_norm(mesh, u_p, cfg.p)
    if t_p <= 0:
        return None
    v_p = u_p / t_p
    root = branch_root(moments(mesh, v_p, cfg))
    if root is None or abs(root - t_p) > 1e-6 * max(t_p, 1e-300):
        return None
    if fibering.ray_energy(root, moments(mesh, v_p, cfg), cfg) >= 0:
        return None
    return u_p, res_p, t_p, v_p


# ---------------------------------------------------------------------------
# Mountain pass


def _redistribute(mesh, path):
    """Re-space path points uniformly in weighted-L2 arc length."""
    k = path.shape[0]
    seg = np.array([weighted_norm(mesh, path[i + 1] - path[i]) for i in range(k - 1)])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        return path
    targets = np.linspace(0.0, total, k)
    out = np.empty_like(path)
    out[0], out[-1] = path[0], path[-1]
    j = 0
    for i in range(1, k - 1):
        s = targets[i]
        while j < k - 2 and cum[j + 1] < s:
            j += 1
        span = cum[j + 1] - cum[j]
        frac = 0.0 if span == 0.0 else (s - cum[j]) / span
        out[i] = (1.0 - frac) * path[j] + frac * path[j + 1]
    return out


def mountain_pass(
    mesh: Mesh,
    w: np.ndarray,
    cfg: ExponentConfig,
    opts: SolverOptions,
    rho: float,
) -> SolveResult:
    """Saddle of the truncated energy between 0 and a low endpoint w.

    Requires truncated_energy(w) <= 0 and ||w|| > rho (w must sit past the
    mountain ridge).  A piecewise-linear path of opts.path_points fields
    from 0 to w is relaxed by pushing its maximal-energy point along the
    negative truncated gradient with backtracking, redistributing points by
    arc length every 10 sweeps; once the residual at the path maximum is
    small, a guarded Newton polish on the truncated residual finishes.  The
    result has positive truncated energy and is nonnegative down to -1e-10.
    """
    w = np.asarray(w, dtype=float)
    jw = truncated_energy(mesh, w, cfg)
    if jw > 0:
        raise ValueError(f"endpoint energy must be <= 0, got {jw:.6g}")
    if w1p_norm(mesh, w, cfg.p) <= rho:
        raise ValueError("endpoint lies inside the mountain radius")

    k = opts.path_points
    path = np.linspace(0.0, 1.0, k)[:, None] * w[None, :]
    energies = np.array([truncated_energy(mesh, q, cfg) for q in path])
    step = opts.step_init
    best = None
    polish_trigger = np.inf

    def try_polish(u):
        res0 = weighted_norm(mesh, truncated_energy_gradient(mesh, u, cfg))
        u_p, res_p, _, _ = _polish_nonnegative(mesh, u, cfg, 0.0, truncated=True)
        if res_p > min(res0, opts.residual_tolerance):
            return None
        if truncated_energy(mesh, u_p, cfg) <= 0 or u_p.min() < -1e-10:
            return None
        return u_p, res_p

    sweeps = 0
    for sweep in range(opts.max_iterations):
        sweeps = sweep
        k_max = 1 + int(np.argmax(energies[1:-1]))
        u = path[k_max]
        g = truncated_energy_gradient(mesh, u, cfg)
        res = weighted_norm(mesh, g)
        if best is None or res < best[1]:
            best = (np.array(u), res)
        if sweep == 0:
            # let the path dynamics move before trusting Newton's basin
            polish_trigger = res / 10.0
        elif res <= polish_trigger or res <= 10.0 * opts.residual_tolerance:
            polished = try_polish(u)
            if polished is not None:
                u_p, res_p = polished
                total = energy(mesh, u_p, cfg)
                return SolveResult(
                    solution=u_p,
                    energy=total,
                    branch="pass",
                    iterations=sweep + 1,
                    converged=bool(res_p <= opts.residual_tolerance),
                    t=0.0,
                    direction=None,
                )
            polish_trigger = res / 4.0
        # descend transversally to the path: pushing the raw gradient slides
        # the point off the ridge along the path, which redistribution undoes
        tangent = path[k_max + 1] - path[k_max - 1]
        tt = float(np.dot(tangent, tangent))
        d = g - (float(np.dot(g, tangent)) / tt) * tangent if tt > 0 else g
        dn2 = float(np.dot(g, d))
        if dn2 <= 0.0:
            d, dn2 = g, float(np.dot(g, g))
        if dn2 == 0.0:
            break
        s = step
        accepted = False
        for _ in range(60):
            trial = u - s * d
            e_t = truncated_energy(mesh, trial, cfg)
            if e_t <= energies[k_max] - opts.armijo * s * dn2:
                path[k_max] = trial
                energies[k_max] = e_t
                accepted = True
                step = min(s * 2.0, 1e12)
                break
            s /= 2.0
        if not accepted:
            step = max(step / 4.0, 1e-16)
        if (sweep + 1) % 10 == 0:
            path = _redistribute(mesh, path)
            energies = np.array([truncated_energy(mesh, q, cfg) for q in path])

    u, res = best if best is not None else (path[k // 2], np.inf)
    total = energy(mesh, u, cfg)
    return SolveResult(
        solution=u,
        energy=total,
        branch="pass",
        iterations=sweeps + 1,
        converged=False,
        t=0.0,
        direction=None,
        message="mountain pass did not reach tolerance",
    )


# ---------------------------------------------------------------------------
# Export


def save_result(mesh: Mesh, result: SolveResult, basepath) -> None:
    """Write <basepath>.csv (solution field) and <basepath>.json (summary)."""
    base = str(basepath)
    save_field(mesh, result.solution, base + ".csv")
    with open(base + ".json", "w") as fh:
        json.dump(result.summary_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
