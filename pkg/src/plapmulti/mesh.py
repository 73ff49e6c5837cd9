"""Uniform grids on intervals and rectangles with Dirichlet boundary handling.

A mesh bundles node coordinates, a boundary mask, nodal quadrature weights
(trapezoid type, so constants integrate exactly to the domain measure), and
an edge list used for finite-difference gradients.  Fields are plain 1D
numpy arrays with one value per node; every operation here keeps boundary
values at zero.

The discrete gradient energy is edge based: each edge contributes
``weight * |dv/h|**p``, per axis in 2D.  This makes the energy an exact
convex function of the nodal values with a closed-form derivative, which
the optimizers in :mod:`plapmulti.solvers` rely on.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MeshSpec",
    "Mesh",
    "build_mesh",
    "interval_mesh",
    "rectangle_mesh",
    "gradient",
    "integrate_power",
    "dirichlet_p_energy",
    "dirichlet_p_energy_gradient",
    "w1p_norm",
    "weighted_norm",
    "project_sphere",
    "rectify",
    "zero_field",
    "sine_field",
    "bump_field",
    "random_field",
    "save_field",
    "load_field",
]

_ZERO_NORM_FLOOR = 1e-200


@dataclass(frozen=True)
class MeshSpec:
    """Requested discretization: dimension, axis extents, nodes per axis."""

    dimension: int
    extents: tuple[float, ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        if len(self.extents) != self.dimension or len(self.nodes) != self.dimension:
            raise ValueError("extents and nodes must have one entry per axis")
        if any(e <= 0 for e in self.extents):
            raise ValueError(f"extents must be strictly positive, got {self.extents}")
        if any(n < 3 for n in self.nodes):
            raise ValueError(f"need at least 3 nodes per axis, got {self.nodes}")


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor grid with trapezoid weights and a per-axis edge list.

    Attributes:
        spec: the MeshSpec this mesh was built from.
        coordinates: node coordinates, shape (n_nodes, dimension).
        spacing: grid spacing per axis.
        boundary: boolean mask, True on Dirichlet boundary nodes.
        weights: nodal quadrature weights; sums to the domain measure.
        edge_tail, edge_head: node indices of each edge (tail -> head).
        edge_h: spacing along each edge.
        edge_weight: quadrature weight of each edge; per axis the edge
            weights also sum to the domain measure.
    """

    spec: MeshSpec
    coordinates: np.ndarray
    spacing: tuple[float, ...]
    boundary: np.ndarray
    weights: np.ndarray
    edge_tail: np.ndarray
    edge_head: np.ndarray
    edge_h: np.ndarray
    edge_weight: np.ndarray

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def n_nodes(self) -> int:
        return self.coordinates.shape[0]

    @property
    def measure(self) -> float:
        return float(np.prod(self.spec.extents))

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def build_mesh(spec: MeshSpec) -> Mesh:
    """Build a uniform grid mesh for the given spec.

    1D meshes discretize (0, L); 2D meshes discretize (0, Lx) x (0, Ly)
    with nodes ordered x-major (flat index = ix * ny + iy).
    """
    if spec.dimension == 1:
        (length,) = spec.extents
        (n,) = spec.nodes
        h = length / (n - 1)
        coords = np.linspace(0.0, length, n).reshape(-1, 1)
        boundary = np.zeros(n, dtype=bool)
        boundary[[0, -1]] = True
        weights = np.full(n, h)
        weights[[0, -1]] = h / 2
        tails = np.arange(n - 1)
        heads = tails + 1
        edge_h = np.full(n - 1, h)
        edge_w = np.full(n - 1, h)
        return Mesh(
            spec=spec,
            coordinates=_freeze(coords),
            spacing=(h,),
            boundary=_freeze(boundary),
            weights=_freeze(weights),
            edge_tail=_freeze(tails),
            edge_head=_freeze(heads),
            edge_h=_freeze(edge_h),
            edge_weight=_freeze(edge_w),
        )

    lx, ly = spec.extents
    nx, ny = spec.nodes
    hx = lx / (nx - 1)
    hy = ly / (ny - 1)
    x = np.linspace(0.0, lx, nx)
    y = np.linspace(0.0, ly, ny)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    coords = np.column_stack([xx.ravel(), yy.ravel()])

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    boundary = ((ix == 0) | (ix == nx - 1) | (iy == 0) | (iy == ny - 1)).ravel()

    wx = np.full(nx, hx)
    wx[[0, -1]] = hx / 2
    wy = np.full(ny, hy)
    wy[[0, -1]] = hy / 2
    weights = np.outer(wx, wy).ravel()

    def flat(i, j):
        return i * ny + j

    # x-edges: (ix, iy) -> (ix + 1, iy); area weight hx * wy
    ex_i, ex_j = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="ij")
    x_tails = flat(ex_i, ex_j).ravel()
    x_heads = flat(ex_i + 1, ex_j).ravel()
    x_w = (hx * wy[ex_j]).ravel()
    # y-edges: (ix, iy) -> (ix, iy + 1); area weight hy * wx
    ey_i, ey_j = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="ij")
    y_tails = flat(ey_i, ey_j).ravel()
    y_heads = flat(ey_i, ey_j + 1).ravel()
    y_w = (hy * wx[ey_i]).ravel()

    tails = np.concatenate([x_tails, y_tails])
    heads = np.concatenate([x_heads, y_heads])
    edge_h = np.concatenate([np.full(x_tails.size, hx), np.full(y_tails.size, hy)])
    edge_w = np.concatenate([x_w, y_w])
    return Mesh(
        spec=spec,
        coordinates=_freeze(coords),
        spacing=(hx, hy),
        boundary=_freeze(boundary),
        weights=_freeze(weights),
        edge_tail=_freeze(tails),
        edge_head=_freeze(heads),
        edge_h=_freeze(edge_h),
        edge_weight=_freeze(edge_w),
    )


def interval_mesh(length: float, n: int) -> Mesh:
    """Uniform mesh on the interval (0, length) with n nodes."""
    return build_mesh(MeshSpec(1, (length,), (n,)))


def rectangle_mesh(extents: tuple[float, float], nodes: tuple[int, int]) -> Mesh:
    """Uniform mesh on the rectangle (0, Lx) x (0, Ly)."""
    return build_mesh(MeshSpec(2, tuple(extents), tuple(nodes)))


def _check_field(mesh: Mesh, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise ValueError(f"field has shape {v.shape}, expected ({mesh.n_nodes},)")
    return v


def gradient(mesh: Mesh, v: np.ndarray) -> np.ndarray:
    """Forward difference along each edge, one value per edge (units 1/length)."""
    v = _check_field(mesh, v)
    return (v[mesh.edge_head] - v[mesh.edge_tail]) / mesh.edge_h


def integrate_power(mesh: Mesh, v: np.ndarray, q: float) -> float:
    """Nodal quadrature of |v|**q over the domain.

    Nonnegative, zero exactly when v is identically zero.  Requires q >= 1.
    """
    if q < 1:
        raise ValueError(f"power q must be >= 1, got {q}")
    v = _check_field(mesh, v)
    return float(np.dot(mesh.weights, np.abs(v) ** q))


def dirichlet_p_energy(mesh: Mesh, v: np.ndarray, p: float) -> float:
    """(1/p) * sum over edges of weight * |dv/h|**p; requires p > 1."""
    if p <= 1:
        raise ValueError(f"exponent p must be > 1, got {p}")
    g = gradient(mesh, v)
    return float(np.dot(mesh.edge_weight, np.abs(g) ** p)) / p


def dirichlet_p_energy_gradient(mesh: Mesh, v: np.ndarray, p: float) -> np.ndarray:
    """Exact nodal derivative of dirichlet_p_energy; zero at boundary nodes."""
    if p <= 1:
        raise ValueError(f"exponent p must be > 1, got {p}")
    g = gradient(mesh, v)
    # sign(g)*|g|**(p-1) stays finite at g = 0 for every p > 1
    flux = mesh.edge_weight * np.sign(g) * np.abs(g) ** (p - 1) / mesh.edge_h
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.edge_head, flux)
    np.add.at(out, mesh.edge_tail, -flux)
    out[mesh.boundary] = 0.0
    return out


def w1p_norm(mesh: Mesh, v: np.ndarray, p: float) -> float:
    """Dirichlet gradient norm (p * energy)**(1/p); degree-1 homogeneous."""
    return (p * dirichlet_p_energy(mesh, v, p)) ** (1.0 / p)


def weighted_norm(mesh: Mesh, g: np.ndarray) -> float:
    """Quadrature-weighted Euclidean norm sqrt(sum w * g**2) of a nodal vector."""
    g = _check_field(mesh, g)
    return float(np.sqrt(np.dot(mesh.weights, g * g)))


def project_sphere(mesh: Mesh, v: np.ndarray, p: float) -> np.ndarray:
    """Scale v onto the unit sphere of the gradient norm.

    Raises ValueError on the zero field (no direction to normalize).
    """
    nrm = w1p_norm(mesh, v, p)
    if nrm < _ZERO_NORM_FLOOR:
        raise ValueError("cannot project the zero field onto the unit sphere")
    return np.asarray(v, dtype=float) / nrm


def rectify(v: np.ndarray, mode: str = "absolute") -> np.ndarray:
    """Nodewise |v| (mode='absolute') or max(v, 0) (mode='positive-part')."""
    v = np.asarray(v, dtype=float)
    if mode == "absolute":
        return np.abs(v)
    if mode == "positive-part":
        return np.maximum(v, 0.0)
    raise ValueError(f"unknown rectify mode {mode!r}")


def zero_field(mesh: Mesh) -> np.ndarray:
    return np.zeros(mesh.n_nodes)


def sine_field(mesh: Mesh, modes: tuple[int, ...] | int = 1) -> np.ndarray:
    """Product of sine modes per axis; vanishes exactly on the boundary."""
    if isinstance(modes, int):
        modes = (modes,) * mesh.dimension
    if len(modes) != mesh.dimension:
        raise ValueError("one mode per axis required")
    out = np.ones(mesh.n_nodes)
    for axis, m in enumerate(modes):
        out = out * np.sin(m * np.pi * mesh.coordinates[:, axis] / mesh.spec.extents[axis])
    out[mesh.boundary] = 0.0
    return out


def bump_field(mesh: Mesh) -> np.ndarray:
    """Polynomial bump prod x(L - x), normalized to unit maximum."""
    out = np.ones(mesh.n_nodes)
    for axis in range(mesh.dimension):
        x = mesh.coordinates[:, axis]
        ext = mesh.spec.extents[axis]
        out = out * x * (ext - x) * 4.0 / ext**2
    out[mesh.boundary] = 0.0
    return out


def random_field(mesh: Mesh, rng: np.random.Generator, n_modes: int = 5) -> np.ndarray:
    """Random combination of low sine modes; smooth, boundary-compliant."""
    out = np.zeros(mesh.n_nodes)
    if mesh.dimension == 1:
        for m in range(1, n_modes + 1):
            out += rng.normal() / m * sine_field(mesh, m)
    else:
        for mx in range(1, n_modes + 1):
            for my in range(1, n_modes + 1):
                out += rng.normal() / (mx * my) * sine_field(mesh, (mx, my))
    return out


def save_field(mesh: Mesh, v: np.ndarray, path) -> None:
    """Write a field as CSV: metadata header, then one (coords..., value) row per node."""
    v = _check_field(mesh, v)
    spec = mesh.spec
    ext = ",".join(format(e, ".17g") for e in spec.extents)
    nds = ",".join(str(n) for n in spec.nodes)
    cols = ["x", "y"][: spec.dimension] + ["value"]
    lines = [
        f"# mesh dimension={spec.dimension} extents={ext} nodes={nds}",
        ",".join(cols),
    ]
    for i in range(mesh.n_nodes):
        row = [format(c, ".17g") for c in mesh.coordinates[i]]
        row.append(format(v[i], ".17g"))
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> tuple[Mesh, np.ndarray]:
    """Read a field CSV written by save_field; rebuilds the mesh from the header."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# mesh"):
        raise ValueError(f"{path}: missing mesh metadata header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    dim = int(meta["dimension"])
    extents = tuple(float(s) for s in meta["extents"].split(","))
    nodes = tuple(int(s) for s in meta["nodes"].split(","))
    mesh = build_mesh(MeshSpec(dim, extents, nodes))
    values = np.array([float(ln.split(",")[-1]) for ln in lines[2:]])
    if values.size != mesh.n_nodes:
        raise ValueError(f"{path}: expected {mesh.n_nodes} rows, found {values.size}")
    return mesh, values
