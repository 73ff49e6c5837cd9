import time

import numpy as np
import pytest

import plapmulti as pm
from plapmulti.harness import ScenarioConfig, run_scenario

CANONICAL = dict(alpha=1.5, p=2.0, beta=3.0, gamma=4.0)


@pytest.fixture(scope="session")
def canonical_mesh():
    return pm.interval_mesh(1.0, 201)


@pytest.fixture(scope="session")
def fine_mesh():
    return pm.interval_mesh(1.0, 2001)


@pytest.fixture(scope="session")
def canonical(canonical_mesh):
    """Threshold estimate and half-threshold config on the canonical 1D mesh."""
    opts = pm.SolverOptions()
    cfg0 = pm.ExponentConfig(**CANONICAL, lam=0.0, dimension=1)
    est = pm.estimate_lambda_star(canonical_mesh, cfg0, opts)
    cfg = cfg0.with_lambda(0.5 * est.lambda_star)
    return {"mesh": canonical_mesh, "opts": opts, "cfg0": cfg0, "est": est, "cfg": cfg}


@pytest.fixture(scope="session")
def canonical_solutions(canonical):
    """The three converged canonical solutions (first, third, pass)."""
    mesh, opts, cfg, est = (
        canonical["mesh"],
        canonical["opts"],
        canonical["cfg"],
        canonical["est"],
    )
    r1 = pm.minimize_branch(mesh, est.direction, "first", cfg, opts)
    r3 = pm.minimize_branch(mesh, est.direction, "third", cfg, opts)
    w = 1.2 * r3.t * r3.direction
    r2 = pm.mountain_pass(mesh, w, cfg, opts, est.rho)
    return {"first": r1, "third": r3, "pass": r2, "w": w}


@pytest.fixture(scope="session")
def canonical_config():
    return ScenarioConfig(mesh=pm.MeshSpec(1, (1.0,), (201,)), **CANONICAL)


@pytest.fixture(scope="session")
def canonical_report(canonical_config):
    """Timed full canonical scenario run."""
    t0 = time.perf_counter()
    report = run_scenario(canonical_config)
    elapsed = time.perf_counter() - t0
    return report, elapsed


def scan_roots_oracle(m, cfg, points=100_000):
    """Independent root scan: dense log grid, sign changes, bisection to machine precision."""
    pa, ba, ga = cfg.p - cfg.alpha, cfg.beta - cfg.alpha, cfg.gamma - cfg.alpha
    lam_a, lam_c = cfg.lam * m.a, cfg.lam * m.c

    def f(t):
        return t**pa - m.b * t**ba + lam_c * t**ga - lam_a

    scales = [1.0]
    if lam_a > 0:
        scales.append(lam_a ** (1.0 / pa))
    if m.b > 0:
        scales.append(m.b ** (-1.0 / (cfg.beta - cfg.p)))
    if m.b > 0 and lam_c > 0:
        scales.append((m.b / lam_c) ** (1.0 / (cfg.gamma - cfg.beta)))
    if lam_c > 0:
        scales.append(lam_c ** (-1.0 / (cfg.gamma - cfg.p)))
    lo = min(scales) * 1e-5
    hi = max(scales) * 1e5
    grid = np.geomspace(lo, hi, points)
    vals = f(grid)
    sign = np.sign(vals)
    roots = []
    idx = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    for i in idx:
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            fm = f(mid)
            if fm == 0.0:
                a = b = mid
                break
            if (fm > 0) == (fb > 0):
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        roots.append(0.5 * (a + b))
    for i in np.flatnonzero(vals == 0.0):
        roots.append(grid[i])
    return sorted(roots)
