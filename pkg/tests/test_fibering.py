import numpy as np
import pytest

import plapmulti as pm
from plapmulti.fibering import (
    fiber_equation,
    fiber_equation_derivative,
    find_roots,
    in_triple_root_region,
    interlacing,
    ray_energy,
    roots_csv_rows,
    truncated_fiber_equation,
    truncated_roots,
)
from plapmulti.functionals import ExponentConfig, Moments

from conftest import scan_roots_oracle

CFG = ExponentConfig(alpha=1.5, p=2.0, beta=3.0, gamma=4.0, lam=0.1, dimension=1)
M121 = Moments(1.0, 2.0, 1.0)


def test_fiber_equation_values():
    assert fiber_equation(1.0, M121, CFG) == pytest.approx(-1.0, abs=1e-15)
    cfg0 = CFG.with_lambda(0.0)
    assert fiber_equation(1.0, Moments(1.0, 1.0, 0.5), cfg0) == pytest.approx(0.0, abs=1e-15)
    # A = 0: positive sign as t -> 0+
    m = Moments(0.0, 2.0, 1.0)
    assert fiber_equation(1e-9, m, CFG) > 0.0
    with pytest.raises(ValueError):
        fiber_equation(0.0, M121, CFG)
    with pytest.raises(ValueError):
        fiber_equation(-1.0, M121, CFG)


def test_derivative_matches_finite_differences():
    t, h = 0.7, 1e-7
    fd = (fiber_equation(t + h, M121, CFG) - fiber_equation(t - h, M121, CFG)) / (2 * h)
    got = fiber_equation_derivative(t, M121, CFG)
    assert abs(got - fd) <= 1e-7 * abs(fd)


def test_derivative_sign_structure():
    roots = find_roots(M121, CFG)
    assert roots.count == 3
    assert fiber_equation_derivative(roots.roots[1], M121, CFG) < 0.0
    assert roots.slopes == (1, -1, 1)
    # lam = 0, B = 0: derivative positive everywhere
    cfg0 = CFG.with_lambda(0.0)
    m = Moments(1.0, 0.0, 0.0)
    for t in np.geomspace(1e-6, 1e6, 50):
        assert fiber_equation_derivative(t, m, cfg0) > 0.0


def test_truncated_equation_identity():
    m_no_c = Moments(M121.a, M121.b, 0.0)
    for t in np.geomspace(1e-4, 1e2, 40):
        assert truncated_fiber_equation(t, M121, CFG) == fiber_equation(t, m_no_c, CFG)
        gap = fiber_equation(t, M121, CFG) - truncated_fiber_equation(t, M121, CFG)
        assert gap == pytest.approx(CFG.lam * M121.c * t ** (CFG.gamma - CFG.alpha), rel=1e-14)
        assert gap > 0.0


def _bisect_oracle(f, lo, hi, iters=200):
    flo, fhi = f(lo), f(hi)
    assert flo * fhi < 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if (fm > 0) == (fhi > 0):
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def test_truncated_roots_in_expected_windows():
    f = lambda t: truncated_fiber_equation(t, M121, CFG)
    tt1 = _bisect_oracle(f, 1e-6, 1.0 / 6.0)
    tt2 = _bisect_oracle(f, 1.0 / 6.0, 1.0)
    assert 0.010 < tt1 < 0.012
    assert 0.40 < tt2 < 0.45
    got = truncated_roots(M121, CFG)
    assert got.t1 == pytest.approx(tt1, abs=1e-12)
    assert got.t2 == pytest.approx(tt2, abs=1e-12)


def test_find_roots_canonical_triple():
    roots = find_roots(M121, CFG)
    assert roots.count == 3 and not roots.degenerate
    # sign pattern -, +, -, + on the probe points
    signs = [np.sign(fiber_equation(t, M121, CFG)) for t in (0.005, 0.1, 1.0, 20.0)]
    assert signs == [-1.0, 1.0, -1.0, 1.0]
    oracle = scan_roots_oracle(M121, CFG)
    assert len(oracle) == 3
    for got, want in zip(roots.roots, oracle):
        assert abs(got - want) <= 1e-10
    assert roots.roots[0] == pytest.approx(0.0104304, rel=1e-4)
    assert roots.roots[1] == pytest.approx(0.4334485, rel=1e-4)
    assert roots.roots[2] == pytest.approx(19.4987611, rel=1e-4)


def test_find_roots_single_root_lam_zero():
    cfg0 = CFG.with_lambda(0.0)
    roots = find_roots(Moments(1.0, 1.0, 0.7), cfg0)
    assert roots.count == 1
    assert roots.roots[0] == pytest.approx(1.0, abs=1e-13)


def test_find_roots_large_lambda_loses_region():
    cfg_big = CFG.with_lambda(1e3)
    roots = find_roots(M121, cfg_big)
    assert roots.count < 3
    assert not in_triple_root_region(M121, cfg_big)


def test_find_roots_rejects_zero_moments():
    with pytest.raises(ValueError):
        find_roots(Moments(0.0, 0.0, 0.0), CFG)


CFGS = [
    ExponentConfig(1.5, 2.0, 3.0, 4.0, 1.0, 1),
    ExponentConfig(1.2, 2.0, 2.5, 5.0, 1.0, 1),
    ExponentConfig(1.5, 3.0, 4.0, 6.0, 1.0, 1),
    ExponentConfig(2.5, 3.0, 3.5, 4.25, 1.0, 1),
]


def test_roots_agree_with_scan_oracle_small():
    rng = np.random.default_rng(2024)
    _compare_roots_with_oracle(rng, n_triples=200, points=20000)


def _compare_roots_with_oracle(rng, n_triples, points):
    checked = 0
    while checked < n_triples:
        base = CFGS[rng.integers(len(CFGS))]
        cfg = base.with_lambda(float(rng.uniform(0.01, 3.0)))
        m = Moments(*np.exp(rng.uniform(np.log(1e-2), np.log(3.0), size=3)))
        got = find_roots(m, cfg)
        assert got.count <= 3
        if got.degenerate:
            continue
        oracle = scan_roots_oracle(m, cfg, points=points)
        if len(oracle) >= 2 and min(
            b - a for a, b in zip(oracle, oracle[1:])
        ) < 1e-5 * max(oracle):
            continue
        assert got.count == len(oracle), (m, cfg.lam, got.roots, oracle)
        for a, b in zip(got.roots, oracle):
            assert abs(a - b) <= 1e-10
        checked += 1


def test_in_region_examples():
    assert in_triple_root_region(M121, CFG)
    assert not in_triple_root_region(Moments(1.0, 1.0, 0.7), CFG.with_lambda(0.0))
    assert not in_triple_root_region(Moments(1.0, 1.0, 1.0), CFG.with_lambda(50.0))


def test_interlacing_canonical():
    tr, ok = interlacing(M121, CFG)
    assert ok
    full = find_roots(M121, CFG)
    gaps = (
        tr.t1 - full.roots[0],
        tr.t2 - tr.t1,
        full.roots[1] - tr.t2,
    )
    assert all(g > 0 for g in gaps)


def test_interlacing_rejects_no_c():
    with pytest.raises(ValueError):
        interlacing(Moments(1.0, 2.0, 0.0), CFG)
    with pytest.raises(ValueError):
        interlacing(M121, CFG.with_lambda(0.0))


def sample_triple_root_members(rng, cfg, count, representable_gaps=False, ray_positive=False):
    """Random triple-root members satisfying the stated preconditions.

    representable_gaps keeps only members whose truncated-root gaps exceed
    float64 resolution (the first gap is sub-ulp when the first root is
    tiny, so strict ordering cannot be certified there).  ray_positive
    enforces the pointwise smallness condition
    max_t [t**(p-a)/p - t**(b-a) B/beta] > (lam/alpha) A, under which the
    energy is positive at the second root; triples violating it cannot
    arise from unit-ball fields below the threshold.
    """
    pa, ba = cfg.p - cfg.alpha, cfg.beta - cfg.alpha
    found = []
    while len(found) < count:
        m = Moments(*np.exp(rng.uniform(np.log(1e-2), np.log(3.0), size=3)))
        lam = float(rng.uniform(0.001, 0.5))
        c = cfg.with_lambda(lam)
        try:
            if not in_triple_root_region(m, c):
                continue
            truncated_roots(m, c)
        except ValueError:
            continue
        if ray_positive:
            t_star = ((1.0 / cfg.p) * pa / ((m.b / cfg.beta) * ba)) ** (1.0 / (ba - pa))
            margin = t_star**pa / cfg.p - m.b * t_star**ba / cfg.beta
            if margin <= (lam / cfg.alpha) * m.a:
                continue
        if representable_gaps:
            t1 = find_roots(m, c).roots[0]
            gap = (
                lam * m.c * t1 ** (c.gamma - c.alpha)
                / abs(fiber_equation_derivative(t1, m, c))
            )
            if gap < 1e-13 * t1:
                continue
        found.append((m, c))
    return found


def test_interlacing_random_members():
    rng = np.random.default_rng(55)
    for m, cfg in sample_triple_root_members(rng, CFGS[0], 50, representable_gaps=True):
        tr, ok = interlacing(m, cfg)
        assert ok
        full = find_roots(m, cfg)
        assert full.roots[0] < tr.t1 < tr.t2 < full.roots[1]


def test_region_is_open_under_moment_perturbation():
    for sgn_a in (-1, 1):
        for sgn_b in (-1, 1):
            for sgn_c in (-1, 1):
                m = Moments(
                    M121.a * (1 + sgn_a * 1e-6),
                    M121.b * (1 + sgn_b * 1e-6),
                    M121.c * (1 + sgn_c * 1e-6),
                )
                assert in_triple_root_region(m, CFG)


def test_energy_values_at_roots_sign_structure():
    rng = np.random.default_rng(66)
    for m, cfg in sample_triple_root_members(rng, CFGS[0], 25, ray_positive=True):
        t1, t2, t3 = find_roots(m, cfg).roots
        assert ray_energy(t1, m, cfg) < 0.0 < ray_energy(t2, m, cfg)
        # the ray energy is nondecreasing between the first two roots
        ts = np.linspace(t1, t2, 100)
        vals = np.array([ray_energy(t, m, cfg) for t in ts])
        assert np.all(np.diff(vals) >= -1e-12 * np.maximum(np.abs(vals[:-1]), 1e-300))


def test_branch_value_first_negative_on_random_fields(canonical):
    mesh, cfg = canonical["mesh"], canonical["cfg"]
    rng = np.random.default_rng(99)
    for _ in range(50):
        v = pm.random_field(mesh, rng)
        assert pm.branch_value(mesh, v, "first", cfg) < 0.0


def test_branch_value_third_negative_on_witness(canonical):
    mesh, cfg, est = canonical["mesh"], canonical["cfg"], canonical["est"]
    assert pm.branch_value(mesh, est.direction, "third", cfg) < 0.0


def test_branch_value_consistency_with_energy(canonical):
    mesh, cfg = canonical["mesh"], canonical["cfg"]
    rng = np.random.default_rng(33)
    v = pm.project_sphere(mesh, np.abs(pm.random_field(mesh, rng)), cfg.p)
    m = pm.moments(mesh, v, cfg)
    t1 = find_roots(m, cfg).roots[0]
    val = pm.branch_value(mesh, v, "first", cfg)
    total = pm.energy(mesh, t1 * v, cfg).total
    assert abs(val - total) <= 1e-10 * max(abs(total), 1e-300)


def test_branch_value_errors(canonical):
    mesh, cfg = canonical["mesh"], canonical["cfg"]
    with pytest.raises(ValueError):
        pm.branch_value(mesh, pm.zero_field(mesh), "first", cfg)
    with pytest.raises(ValueError):
        pm.branch_value(mesh, pm.sine_field(mesh, 1), "second", cfg)
    # high-frequency direction falls outside the triple-root region
    v_bad = pm.project_sphere(mesh, pm.sine_field(mesh, 30), cfg.p)
    assert not in_triple_root_region(pm.moments(mesh, v_bad, cfg), cfg)
    with pytest.raises(ValueError):
        pm.branch_value(mesh, v_bad, "third", cfg)


@pytest.mark.parametrize("branch", ["first", "third"])
def test_branch_gradient_finite_differences(canonical, branch):
    mesh, cfg, est = canonical["mesh"], canonical["cfg"], canonical["est"]
    rng = np.random.default_rng(17)
    v = est.direction
    g = pm.branch_gradient(mesh, v, branch, cfg)
    val0 = pm.branch_value(mesh, v, branch, cfg)
    for _ in range(5):
        d = pm.random_field(mesh, rng)
        h = 1e-6
        fd = (
            pm.branch_value(mesh, v + h * d, branch, cfg)
            - pm.branch_value(mesh, v - h * d, branch, cfg)
        ) / (2 * h)
        got = float(np.dot(g, d))
        assert abs(got - fd) <= 1e-5 * max(abs(fd), abs(got), 1e-12 * abs(val0))


@pytest.mark.parametrize("branch", ["first", "third"])
def test_branch_gradient_radial_identity(canonical, branch):
    # directional derivative along v equals -t**p at the fiber root
    mesh, cfg, est = canonical["mesh"], canonical["cfg"], canonical["est"]
    v = est.direction
    m = pm.moments(mesh, v, cfg)
    roots = find_roots(m, cfg)
    t = roots.roots[0] if branch == "first" else roots.roots[2]
    g = pm.branch_gradient(mesh, v, branch, cfg)
    got = float(np.dot(g, v))
    s = 1e-5
    fd = (
        pm.branch_value(mesh, (1 + s) * v, branch, cfg)
        - pm.branch_value(mesh, (1 - s) * v, branch, cfg)
    ) / (2 * s)
    assert got == pytest.approx(-t**cfg.p, rel=1e-9)
    assert fd == pytest.approx(-t**cfg.p, rel=1e-4)


def test_roots_csv_rows_format():
    rows = roots_csv_rows([(CFG, M121), (CFG.with_lambda(0.0), Moments(1.0, 1.0, 0.5))])
    assert rows[0] == "lambda,A,B,C,t1,t2,t3,in_region"
    assert len(rows) == 3
    assert rows[1].endswith(",true")
    assert rows[2].endswith(",false")
    assert "nan" in rows[2]
