"""Scenario orchestration: full three-solution runs, checks, and lambda sweeps.

A scenario fixes the mesh, the exponent quadruple, and how lambda is chosen
(explicitly or as a fraction of the estimated threshold).  Running it
estimates the threshold and mountain radius, solves the two fibered
branches and the mountain pass, polishes everything with Newton, and grades
the outcome with named checks: energy sign ordering, residuals, node
nonnegativity, pairwise distinctness, and the separation of the two fiber
scales.  Reports and sweep tables export deterministically to JSON/CSV so
identical configurations produce identical bytes.
"""

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import fibering
from .functionals import EnergyBreakdown, ExponentConfig, moments, truncated_energy
from .mesh import MeshSpec, build_mesh, save_field, w1p_norm
from .solvers import (
    LambdaStarEstimate,
    SolveResult,
    SolverOptions,
    estimate_lambda_star,
    minimize_branch,
    mountain_pass,
    refine_critical_point,
)

__all__ = [
    "ScenarioConfig",
    "CheckResult",
    "Report",
    "BifurcationTable",
    "run_scenario",
    "verify_main_theorem",
    "sweep_lambda",
    "export_report",
    "load_config",
    "load_report",
    "reverify_report",
]

DISTINCTNESS_RELATIVE_GAP = 1e-3
NONNEGATIVITY_FLOOR = -1e-10


@dataclass(frozen=True)
class ScenarioConfig:
    """One solvable scenario: mesh, exponents, lambda choice, solver options."""

    mesh: MeshSpec
    alpha: float
    p: float
    beta: float
    gamma: float
    lambda_mode: str = "fraction"  # "fraction" of the estimated threshold or "explicit"
    lambda_value: float = 0.5
    first_options: SolverOptions = field(default_factory=SolverOptions)
    third_options: SolverOptions = field(default_factory=SolverOptions)
    pass_options: SolverOptions = field(default_factory=SolverOptions)
    out_dir: str = "."
    seed: int = 0

    def __post_init__(self):
        ExponentConfig(self.alpha, self.p, self.beta, self.gamma, 0.0, self.mesh.dimension)
        if self.lambda_mode not in ("fraction", "explicit"):
            raise ValueError(f"lambda_mode must be 'fraction' or 'explicit', got {self.lambda_mode!r}")
        if self.lambda_mode == "fraction" and not 0.0 < self.lambda_value <= 1.0:
            raise ValueError(f"lambda fraction must lie in (0, 1], got {self.lambda_value}")
        if self.lambda_mode == "explicit" and self.lambda_value <= 0.0:
            raise ValueError(f"explicit lambda must be > 0, got {self.lambda_value}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    def exponents(self, lam: float) -> ExponentConfig:
        return ExponentConfig(self.alpha, self.p, self.beta, self.gamma, lam, self.mesh.dimension)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: dict

    def to_json_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "measured": self.measured}


@dataclass
class Report:
    """Outcome of one scenario: three results, threshold data, and checks."""

    config: ScenarioConfig
    lambda_used: float
    lambda_star: float
    rho: float
    results: dict  # branch name -> SolveResult
    distances: dict  # "first-third" etc. -> sup distance
    checks: list
    passed: bool
    error: str = ""


@dataclass
class BifurcationTable:
    """Per-lambda fibering indicators along a fixed direction plus solve rows."""

    lambda_star: float
    direction_moments: tuple
    rows: list  # dicts sorted by lambda
    lost_at_fraction: float | None = None

    COLUMNS = (
        "lambda,fraction,A,B,C,t1,t2,t3,in_region,"
        "J1,J2,J3,t_scale1,t_scale3,conv1,conv2,conv3"
    )


def _sup_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def verify_main_theorem(report: Report) -> list:
    """Named checks of the three-solution claims on a completed report.

    Checks: energy sign ordering, residuals within tolerance, nodewise
    nonnegativity, pairwise sup-norm distinctness, and first-vs-third fiber
    scale separation.  Returns the check list (does not raise on failure).
    """
    res = report.results
    checks = []
    have_all = all(k in res for k in ("first", "pass", "third"))
    if not have_all:
        return [CheckResult("results_present", False, {"present": sorted(res)})]

    j1 = res["first"].energy.total
    j2 = res["pass"].energy.total
    j3 = res["third"].energy.total
    checks.append(
        CheckResult(
            "energy_sign_ordering",
            max(j1, j3) < 0.0 < j2,
            {"J1": j1, "J2": j2, "J3": j3},
        )
    )

    tol = {
        "first": report.config.first_options.residual_tolerance,
        "third": report.config.third_options.residual_tolerance,
        "pass": report.config.pass_options.residual_tolerance,
    }
    residuals = {k: res[k].energy.residual_norm for k in res}
    checks.append(
        CheckResult(
            "residuals_within_tolerance",
            all(residuals[k] <= tol[k] for k in res),
            {"residuals": residuals, "tolerances": tol},
        )
    )

    minima = {k: float(res[k].solution.min()) for k in res}
    checks.append(
        CheckResult(
            "nonnegativity",
            all(m >= NONNEGATIVITY_FLOOR for m in minima.values()),
            {"min_node_values": minima, "floor": NONNEGATIVITY_FLOOR},
        )
    )

    pairs = [("first", "pass"), ("first", "third"), ("pass", "third")]
    gaps = {}
    ok_pairs = True
    for a, b in pairs:
        d = _sup_distance(res[a].solution, res[b].solution)
        scale = max(
            float(np.max(np.abs(res[a].solution))),
            float(np.max(np.abs(res[b].solution))),
            1e-300,
        )
        gaps[f"{a}-{b}"] = d / scale
        ok_pairs &= d > DISTINCTNESS_RELATIVE_GAP * scale
    checks.append(
        CheckResult(
            "pairwise_distinctness",
            bool(ok_pairs),
            {"relative_sup_gaps": gaps, "threshold": DISTINCTNESS_RELATIVE_GAP},
        )
    )

    checks.append(
        CheckResult(
            "t_scale_separation",
            res["third"].t > res["first"].t > 0,
            {"t_first": res["first"].t, "t_third": res["third"].t},
        )
    )
    return checks


def _resolve_lambda(config: ScenarioConfig, estimate: LambdaStarEstimate) -> float:
    if config.lambda_mode == "fraction":
        return config.lambda_value * estimate.lambda_star
    return config.lambda_value


def _fail_report(config, lam, est, results, message) -> Report:
    checks = [CheckResult("pipeline_completed", False, {"error": message})]
    return Report(
        config=config,
        lambda_used=lam,
        lambda_star=est.lambda_star if est else float("nan"),
        rho=est.rho if est else float("nan"),
        results=results,
        distances={},
        checks=checks,
        passed=False,
        error=message,
    )


def run_scenario(config: ScenarioConfig) -> Report:
    """Estimate the threshold, solve all three branches, polish, and grade.

    Branch failures produce a failed report with diagnostics instead of an
    exception; configuration errors still raise.
    """
    mesh = build_mesh(config.mesh)
    est = None
    results: dict = {}
    try:
        cfg0 = config.exponents(0.0)
        est = estimate_lambda_star(mesh, cfg0, config.first_options)
        lam = _resolve_lambda(config, est)
        cfg = config.exponents(lam)

        r1 = minimize_branch(mesh, est.direction, "first", cfg, config.first_options)
        results["first"] = r1
        r3 = minimize_branch(mesh, est.direction, "third", cfg, config.third_options)
        results["third"] = r3

        w = _pass_endpoint(mesh, r3, cfg, est.rho)
        r2 = mountain_pass(mesh, w, cfg, config.pass_options, est.rho)
        results["pass"] = r2

        for name, opts in (("first", config.first_options), ("third", config.third_options)):
            r = results[name]
            if r.energy.residual_norm <= 1e-2 * _scale_of(mesh, r.solution, cfg):
                results[name] = _merge_refined(
                    r, refine_critical_point(mesh, r.solution, cfg, opts, branch=name)
                )
        rp = results["pass"]
        if rp.energy.residual_norm <= 1e-2 * _scale_of(mesh, rp.solution, cfg):
            results["pass"] = _merge_refined(
                rp,
                refine_critical_point(
                    mesh, rp.solution, cfg, config.pass_options, branch="pass", truncated=True
                ),
            )
    except ValueError as exc:
        return _fail_report(config, float("nan"), est, results, str(exc))

    distances = {
        "first-pass": _sup_distance(results["first"].solution, results["pass"].solution),
        "first-third": _sup_distance(results["first"].solution, results["third"].solution),
        "pass-third": _sup_distance(results["pass"].solution, results["third"].solution),
    }
    report = Report(
        config=config,
        lambda_used=lam,
        lambda_star=est.lambda_star,
        rho=est.rho,
        results=results,
        distances=distances,
        checks=[],
        passed=False,
    )
    report.checks = verify_main_theorem(report)
    report.passed = all(c.passed for c in report.checks)
    return report


def _scale_of(mesh, u, cfg):
    from .solvers import _residual_scale

    return _residual_scale(mesh, u, cfg) + 1e-300


def _merge_refined(original: SolveResult, refined: SolveResult) -> SolveResult:
    if refined.energy.residual_norm <= original.energy.residual_norm:
        refined.iterations += original.iterations
        if not refined.converged and original.converged:
            refined.converged = original.converged
        return refined
    return original


def _pass_endpoint(mesh, third_result: SolveResult, cfg, rho: float) -> np.ndarray:
    """Scale the third-branch direction just past the mountain (energy <= 0).

    The shortest valid endpoint sits slightly beyond the descending zero of
    the ray energy between the second and third fiber roots; a short path
    resolves the saddle much better than one reaching all the way to the
    third root.  Falls back to scaling past the third root itself.
    """
    if third_result.direction is None or third_result.t <= 0:
        raise ValueError("third-branch result lacks a usable direction for the pass endpoint")
    v = third_result.direction
    m = moments(mesh, v, cfg)
    roots = fibering.find_roots(m, cfg)
    if roots.count == 3:
        t2, t3 = roots.roots[1], roots.roots[2]
        if fibering.ray_energy(t2, m, cfg) > 0.0 > fibering.ray_energy(t3, m, cfg):
            lo, hi = t2, t3
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if fibering.ray_energy(mid, m, cfg) > 0.0:
                    lo = mid
                else:
                    hi = mid
            for factor in (1.2, 1.1, 1.05, 1.02):
                s = factor * hi
                if s <= t3 and s > rho:
                    w = s * v
                    if truncated_energy(mesh, w, cfg) <= 0:
                        return w
    for factor in (1.2, 1.15, 1.1, 1.05, 1.02, 1.0):
        w = factor * third_result.t * v
        if truncated_energy(mesh, w, cfg) <= 0 and w1p_norm(mesh, w, cfg.p) > rho:
            return w
    raise ValueError("could not scale the third-branch direction into a valid pass endpoint")


def sweep_lambda(config: ScenarioConfig, grid, solve_at=None) -> BifurcationTable:
    """Fibering indicators along the fixed extremal direction for each lambda.

    grid holds positive fractions of the estimated threshold and may exceed 1
    to probe loss of the triple-root region.  Full three-branch solves run at
    the fractions in solve_at (default: every grid value < 1); per-row solve
    failures are recorded inline, not raised.
    """
    grid = [float(g) for g in grid]
    if not grid or any(g <= 0 for g in grid):
        raise ValueError("grid must hold positive lambda fractions")
    mesh = build_mesh(config.mesh)
    cfg0 = config.exponents(0.0)
    est = estimate_lambda_star(mesh, cfg0, config.first_options)
    m_star = moments(mesh, est.direction, cfg0)
    if solve_at is None:
        solve_at = [g for g in grid if g < 1.0]
    solve_at = set(float(g) for g in solve_at)

    rows = []
    for frac in sorted(grid):
        lam = frac * est.lambda_star
        cfg = config.exponents(lam)
        roots = fibering.find_roots(m_star, cfg)
        padded = list(roots.roots) + [float("nan")] * (3 - roots.count)
        row = {
            "lambda": lam,
            "fraction": frac,
            "A": m_star.a,
            "B": m_star.b,
            "C": m_star.c,
            "t1": padded[0],
            "t2": padded[1],
            "t3": padded[2],
            "in_region": roots.count == 3 and not roots.degenerate,
            "J1": float("nan"),
            "J2": float("nan"),
            "J3": float("nan"),
            "t_scale1": float("nan"),
            "t_scale3": float("nan"),
            "conv1": False,
            "conv2": False,
            "conv3": False,
            "error": "",
        }
        if frac in solve_at:
            sub = replace(config, lambda_mode="explicit", lambda_value=lam)
            rep = run_scenario(sub)
            if rep.error:
                row["error"] = rep.error
            else:
                row["J1"] = rep.results["first"].energy.total
                row["J2"] = rep.results["pass"].energy.total
                row["J3"] = rep.results["third"].energy.total
                row["t_scale1"] = rep.results["first"].t
                row["t_scale3"] = rep.results["third"].t
                row["conv1"] = rep.results["first"].converged
                row["conv2"] = rep.results["pass"].converged
                row["conv3"] = rep.results["third"].converged
        rows.append(row)

    lost = None
    for row in rows:
        if not row["in_region"]:
            lost = row["fraction"]
            break
    return BifurcationTable(
        lambda_star=est.lambda_star,
        direction_moments=(m_star.a, m_star.b, m_star.c),
        rows=rows,
        lost_at_fraction=lost,
    )


# ---------------------------------------------------------------------------
# Serialization


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _config_dict(config: ScenarioConfig) -> dict:
    return {
        "mesh": {
            "dimension": config.mesh.dimension,
            "extents": list(config.mesh.extents),
            "nodes": list(config.mesh.nodes),
        },
        "alpha": config.alpha,
        "p": config.p,
        "beta": config.beta,
        "gamma": config.gamma,
        "lambda_mode": config.lambda_mode,
        "lambda_value": config.lambda_value,
        "seed": config.seed,
        "tolerances": {
            "first": config.first_options.residual_tolerance,
            "third": config.third_options.residual_tolerance,
            "pass": config.pass_options.residual_tolerance,
        },
    }


def _result_dict(r: SolveResult) -> dict:
    d = r.summary_dict()
    d["solution"] = [float(x) for x in r.solution]
    if r.direction is not None:
        d["direction"] = [float(x) for x in r.direction]
    return d


def report_json_dict(report: Report) -> dict:
    return {
        "config": _config_dict(report.config),
        "lambda": report.lambda_used,
        "lambda_star": report.lambda_star,
        "rho": report.rho,
        "results": {k: _result_dict(v) for k, v in report.results.items()},
        "distances": report.distances,
        "checks": [c.to_json_dict() for c in report.checks],
        "passed": report.passed,
        "error": report.error,
    }


def _report_csv(report: Report) -> str:
    lines = ["key,value"]
    lines.append(f"lambda,{_fmt(report.lambda_used)}")
    lines.append(f"lambda_star,{_fmt(report.lambda_star)}")
    lines.append(f"rho,{_fmt(report.rho)}")
    for k in sorted(report.results):
        r = report.results[k]
        lines.append(f"J_{k},{_fmt(r.energy.total)}")
        lines.append(f"residual_{k},{_fmt(r.energy.residual_norm)}")
        lines.append(f"t_scale_{k},{_fmt(r.t)}")
        lines.append(f"converged_{k},{str(r.converged).lower()}")
    for k in sorted(report.distances):
        lines.append(f"distance_{k},{_fmt(report.distances[k])}")
    for c in report.checks:
        lines.append(f"check_{c.name},{str(c.passed).lower()}")
    lines.append(f"passed,{str(report.passed).lower()}")
    return "\n".join(lines) + "\n"


def _table_csv(table: BifurcationTable) -> str:
    lines = [BifurcationTable.COLUMNS]
    for row in table.rows:
        cells = [
            _fmt(row["lambda"]),
            _fmt(row["fraction"]),
            _fmt(row["A"]),
            _fmt(row["B"]),
            _fmt(row["C"]),
            _fmt(row["t1"]),
            _fmt(row["t2"]),
            _fmt(row["t3"]),
            str(row["in_region"]).lower(),
            _fmt(row["J1"]),
            _fmt(row["J2"]),
            _fmt(row["J3"]),
            _fmt(row["t_scale1"]),
            _fmt(row["t_scale3"]),
            str(row["conv1"]).lower(),
            str(row["conv2"]).lower(),
            str(row["conv3"]).lower(),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def export_report(obj, fmt: str, path) -> None:
    """Write a Report or BifurcationTable as JSON or CSV with deterministic bytes."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")
    try:
        if isinstance(obj, Report):
            payload = (
                json.dumps(report_json_dict(obj), sort_keys=True, indent=2) + "\n"
                if fmt == "json"
                else _report_csv(obj)
            )
        elif isinstance(obj, BifurcationTable):
            if fmt == "json":
                payload = (
                    json.dumps(
                        {
                            "lambda_star": obj.lambda_star,
                            "direction_moments": list(obj.direction_moments),
                            "lost_at_fraction": obj.lost_at_fraction,
                            "rows": obj.rows,
                        },
                        sort_keys=True,
                        indent=2,
                    )
                    + "\n"
                )
            else:
                payload = _table_csv(obj)
        else:
            raise ValueError(f"cannot export object of type {type(obj).__name__}")
        with open(path, "w") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc


def save_report_fields(report: Report, out_dir) -> None:
    """Write each branch solution as a field CSV into out_dir."""
    mesh = build_mesh(report.config.mesh)
    os.makedirs(out_dir, exist_ok=True)
    for name, r in report.results.items():
        save_field(mesh, r.solution, os.path.join(out_dir, f"solution_{name}.csv"))


# ---------------------------------------------------------------------------
# Config files and stored-report re-verification


def _parse_scalar(text: str):
    text = text.strip()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def load_config(path) -> ScenarioConfig:
    """Read a flat key = value scenario file (TOML-compatible subset).

    Recognized keys: dimension, extent/extent_x/extent_y, nodes/nodes_x/nodes_y,
    alpha, p, beta, gamma, lambda or lambda_fraction, seed, out_dir,
    residual_tolerance, max_iterations, path_points.
    """
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, val = line.split("=", 1)
            raw[key.strip()] = _parse_scalar(val)

    dim = int(raw.get("dimension", 1))
    if dim == 1:
        extents = (float(raw.get("extent", 1.0)),)
        nodes = (int(raw.get("nodes", 201)),)
    else:
        extents = (
            float(raw.get("extent_x", raw.get("extent", 1.0))),
            float(raw.get("extent_y", raw.get("extent", 1.0))),
        )
        nodes = (
            int(raw.get("nodes_x", raw.get("nodes", 21))),
            int(raw.get("nodes_y", raw.get("nodes", 21))),
        )
    if "lambda" in raw:
        mode, value = "explicit", float(raw["lambda"])
    else:
        mode, value = "fraction", float(raw.get("lambda_fraction", 0.5))
    opts = SolverOptions(
        max_iterations=int(raw.get("max_iterations", SolverOptions.max_iterations)),
        residual_tolerance=float(
            raw.get("residual_tolerance", SolverOptions.residual_tolerance)
        ),
        path_points=int(raw.get("path_points", SolverOptions.path_points)),
        seed=int(raw.get("seed", 0)),
    )
    return ScenarioConfig(
        mesh=MeshSpec(dim, extents, nodes),
        alpha=float(raw["alpha"]),
        p=float(raw["p"]),
        beta=float(raw["beta"]),
        gamma=float(raw["gamma"]),
        lambda_mode=mode,
        lambda_value=value,
        first_options=opts,
        third_options=opts,
        pass_options=opts,
        out_dir=str(raw.get("out_dir", ".")),
        seed=int(raw.get("seed", 0)),
    )


def load_report(path) -> Report:
    """Reconstruct a Report (with recomputable fields) from its JSON export."""
    with open(path) as fh:
        data = json.load(fh)
    c = data["config"]
    opts = {
        k: SolverOptions(residual_tolerance=c["tolerances"][k])
        for k in ("first", "third", "pass")
    }
    config = ScenarioConfig(
        mesh=MeshSpec(c["mesh"]["dimension"], tuple(c["mesh"]["extents"]), tuple(c["mesh"]["nodes"])),
        alpha=c["alpha"],
        p=c["p"],
        beta=c["beta"],
        gamma=c["gamma"],
        lambda_mode=c["lambda_mode"],
        lambda_value=c["lambda_value"],
        first_options=opts["first"],
        third_options=opts["third"],
        pass_options=opts["pass"],
        seed=c["seed"],
    )
    results = {}
    for name, rd in data["results"].items():
        e = rd["energy"]
        results[name] = SolveResult(
            solution=np.array(rd["solution"], dtype=float),
            energy=EnergyBreakdown(
                kinetic=e["kinetic"],
                term_a=e["termA"],
                term_b=e["termB"],
                term_c=e["termC"],
                total=e["total"],
                residual_norm=e["residual"],
            ),
            branch=rd["branch"],
            iterations=rd["iterations"],
            converged=rd["converged"],
            t=rd["t_scale"],
            direction=np.array(rd["direction"], dtype=float) if "direction" in rd else None,
        )
    checks = [CheckResult(c2["name"], c2["passed"], c2["measured"]) for c2 in data["checks"]]
    return Report(
        config=config,
        lambda_used=data["lambda"],
        lambda_star=data["lambda_star"],
        rho=data["rho"],
        results=results,
        distances=data["distances"],
        checks=checks,
        passed=data["passed"],
        error=data.get("error", ""),
    )


def reverify_report(report: Report) -> Report:
    """Recompute energies and residuals from the stored fields, then re-check."""
    mesh = build_mesh(report.config.mesh)
    lam = report.lambda_used
    if not math.isfinite(lam):
        raise ValueError("stored report has no usable lambda")
    cfg = report.config.exponents(lam)
    from .functionals import energy

    for r in report.results.values():
        r.energy = energy(mesh, r.solution, cfg)
    report.checks = verify_main_theorem(report)
    report.passed = all(c.passed for c in report.checks)
    return report
