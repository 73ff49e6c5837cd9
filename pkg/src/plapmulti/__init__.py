"""Three positive solutions of a perturbed concave-convex p-Laplacian problem.

The library discretizes the Dirichlet problem

    -div(|grad u|^(p-2) grad u) = lam (|u|^(a-2) u - |u|^(g-2) u) + |u|^(b-2) u

on intervals and rectangles (1 < a < p < b < g), reduces its energy along
rays to a scalar fiber equation, and computes three distinct nonnegative
critical points for small lam > 0: two negative-energy minimizers over the
unit sphere (first and third fiber roots) and one positive-energy mountain
pass of the truncated energy.
"""

from .fibering import (
    FiberingRoots,
    TruncatedRoots,
    branch_gradient,
    branch_value,
    fiber_equation,
    fiber_equation_derivative,
    find_roots,
    in_triple_root_region,
    interlacing,
    ray_energy,
    truncated_fiber_equation,
    truncated_roots,
)
from .functionals import (
    EnergyBreakdown,
    ExponentConfig,
    Moments,
    coercivity_bound,
    energy,
    energy_gradient,
    moments,
    perturbation_energy,
    perturbation_gradient,
    truncated_energy,
    truncated_energy_gradient,
)
from .harness import (
    BifurcationTable,
    Report,
    ScenarioConfig,
    export_report,
    load_config,
    load_report,
    reverify_report,
    run_scenario,
    sweep_lambda,
    verify_main_theorem,
)
from .mesh import (
    Mesh,
    MeshSpec,
    build_mesh,
    bump_field,
    dirichlet_p_energy,
    dirichlet_p_energy_gradient,
    gradient,
    integrate_power,
    interval_mesh,
    load_field,
    project_sphere,
    random_field,
    rectangle_mesh,
    rectify,
    save_field,
    sine_field,
    w1p_norm,
    weighted_norm,
    zero_field,
)
from .solvers import (
    LambdaStarEstimate,
    SolveResult,
    SolverOptions,
    estimate_lambda_star,
    maximize_b_on_sphere,
    minimize_branch,
    mountain_pass,
    refine_critical_point,
    save_result,
)

__version__ = "0.1.0"
