"""Taylor-Hood P2/P1 spaces on simplicial meshes.

Velocity lives in continuous piecewise quadratics (one scalar copy per
component, component-major global numbering), pressure in continuous
piecewise linears. Quadrature is a conical-product rule exact for total
degree 5, which makes the skew convection form exactly energy-neutral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

# local edges of the reference simplex, lexicographic by vertex pair
EDGE_VERTICES = {
    2: ((0, 1), (0, 2), (1, 2)),
    3: ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)),
}


@dataclass(eq=False)
class QuadratureRule:
    points: np.ndarray  # (nq, dim) on the reference simplex
    weights: np.ndarray  # (nq,), positive, summing to the simplex volume


def _gauss_01(npts, alpha):
    """Nodes/weights for integral over (0,1) with weight (1-x)^alpha."""
    x, w = roots_jacobi(npts, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1.0)


def simplex_quadrature(dim, degree=5):
    """Conical-product rule on the unit simplex, exact to `degree`.

    Built from Gauss-Jacobi rules so all weights are positive.
    """
    npts = (degree + 2) // 2  # per direction; exact to 2*npts - 1
    if dim == 2:
        xi, wxi = _gauss_01(npts, 1.0)
        eta, weta = _gauss_01(npts, 0.0)
        pts, wts = [], []
        for i in range(npts):
            for j in range(npts):
                pts.append((xi[i], eta[j] * (1.0 - xi[i])))
                wts.append(wxi[i] * weta[j])
    elif dim == 3:
        xi, wxi = _gauss_01(npts, 2.0)
        eta, weta = _gauss_01(npts, 1.0)
        zeta, wzeta = _gauss_01(npts, 0.0)
        pts, wts = [], []
        for i in range(npts):
            for j in range(npts):
                for k in range(npts):
                    x = xi[i]
                    y = eta[j] * (1.0 - x)
                    z = zeta[k] * (1.0 - x) * (1.0 - eta[j])
                    pts.append((x, y, z))
                    wts.append(wxi[i] * weta[j] * wzeta[k])
    else:
        raise ValueError(f"unsupported dimension {dim}")
    return QuadratureRule(np.asarray(pts), np.asarray(wts))


def _barycentric(points, dim):
    lam = np.empty((points.shape[0], dim + 1))
    lam[:, 0] = 1.0 - points.sum(axis=1)
    lam[:, 1:] = points
    return lam


def _barycentric_gradients(dim):
    grads = np.zeros((dim + 1, dim))
    grads[0, :] = -1.0
    grads[1:, :] = np.eye(dim)
    return grads


def p2_reference(dim, points):
    """P2 nodal basis values and gradients at reference points.

    Node order: vertices, then edge midpoints in EDGE_VERTICES order.
    Returns (values (nq, nb), gradients (nq, nb, dim)).
    """
    lam = _barycentric(points, dim)
    dlam = _barycentric_gradients(dim)
    edges = EDGE_VERTICES[dim]
    nb = (dim + 1) + len(edges)
    nq = points.shape[0]
    vals = np.empty((nq, nb))
    grads = np.empty((nq, nb, dim))
    for i in range(dim + 1):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    for e, (a, b) in enumerate(edges):
        j = dim + 1 + e
        vals[:, j] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, j, :] = 4.0 * (lam[:, a][:, None] * dlam[b] + lam[:, b][:, None] * dlam[a])
    return vals, grads


def p1_reference(dim, points):
    """P1 nodal basis values and gradients at reference points."""
    lam = _barycentric(points, dim)
    dlam = _barycentric_gradients(dim)
    return lam, np.broadcast_to(dlam, (points.shape[0], dim + 1, dim)).copy()


@dataclass(eq=False)
class CellTabulation:
    """Basis data on one physical cell at the quadrature points."""

    points: np.ndarray  # (nq, dim) physical coordinates
    weights: np.ndarray  # (nq,) reference weights times |det J|
    p2_values: np.ndarray  # (nq, nb2)
    p2_gradients: np.ndarray  # (nq, nb2, dim), physical derivatives
    p1_values: np.ndarray  # (nq, nb1)
    p1_gradients: np.ndarray  # (nq, nb1, dim)


@dataclass(eq=False)
class TaylorHoodSpace:
    """P2 vector velocity / P1 pressure pair with Dirichlet bookkeeping.

    Scalar P2 DOFs are vertices then edges (edges numbered lexicographically
    by sorted vertex pair). Velocity DOF (component c, scalar node s) has
    global index c * n_scalar + s, so each component occupies a contiguous
    block. Pressure DOFs are the mesh vertices.
    """

    mesh: object
    quadrature: QuadratureRule
    edges: np.ndarray  # (n_edges, 2) sorted vertex pairs
    cell_p2: np.ndarray  # (nc, nb2) scalar P2 dof map
    n_scalar: int
    n_pressure: int
    n_velocity: int
    p2_nodes: np.ndarray  # (n_scalar, dim) nodal coordinates
    dirichlet_scalar: np.ndarray  # sorted scalar node ids on tagged boundaries
    dirichlet_velocity_dofs: np.ndarray  # all components of the above
    p2_values: np.ndarray  # reference tabulations
    p2_ref_gradients: np.ndarray
    p1_values: np.ndarray
    p1_ref_gradients: np.ndarray
    jac_inv: np.ndarray  # (nc, dim, dim)
    det_jac: np.ndarray  # (nc,)
    cell_weights: np.ndarray  # (nc, nq) quadrature weights times |det J|
    p2_gradients: np.ndarray  # (nc, nq, nb2, dim) physical gradients
    p1_gradients: np.ndarray  # (nc, nq, nb1, dim)
    quad_points: np.ndarray  # (nc, nq, dim) physical quadrature points

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def velocity_dofs_per_component(self):
        return self.n_scalar


def build_taylor_hood(mesh, dirichlet_tags=None):
    """Build the P2/P1 pair on `mesh`.

    dirichlet_tags: facet tags treated as no-slip walls; None means every
    boundary facet.
    """
    dim = mesh.dim
    cells = mesh.cells
    nc = cells.shape[0]
    local_edges = EDGE_VERTICES[dim]

    pairs = {}
    for cell in cells:
        for a, b in local_edges:
            key = (min(cell[a], cell[b]), max(cell[a], cell[b]))
            pairs[key] = None
    edge_list = sorted(pairs)
    edge_index = {pair: i for i, pair in enumerate(edge_list)}
    edges = np.asarray(edge_list, dtype=np.int64)

    nv = mesh.num_vertices
    n_scalar = nv + len(edge_list)
    nb2 = dim + 1 + len(local_edges)
    cell_p2 = np.empty((nc, nb2), dtype=np.int64)
    cell_p2[:, : dim + 1] = cells
    for e, (a, b) in enumerate(local_edges):
        lo = np.minimum(cells[:, a], cells[:, b])
        hi = np.maximum(cells[:, a], cells[:, b])
        cell_p2[:, dim + 1 + e] = [nv + edge_index[(int(l), int(h))] for l, h in zip(lo, hi)]

    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    p2_nodes = np.vstack([mesh.vertices, midpoints])

    dirichlet = set()
    for facet, tag in mesh.boundary_facets:
        if dirichlet_tags is not None and tag not in dirichlet_tags:
            continue
        dirichlet.update(facet)
        for a, b in ((i, j) for i in range(len(facet)) for j in range(i + 1, len(facet))):
            key = (min(facet[a], facet[b]), max(facet[a], facet[b]))
            dirichlet.add(nv + edge_index[key])
    dirichlet_scalar = np.asarray(sorted(dirichlet), dtype=np.int64)
    dirichlet_velocity = np.concatenate(
        [c * n_scalar + dirichlet_scalar for c in range(dim)]
    ) if len(dirichlet_scalar) else np.empty(0, dtype=np.int64)

    quad = simplex_quadrature(dim, degree=5)
    p2v, p2g = p2_reference(dim, quad.points)
    p1v, p1g = p1_reference(dim, quad.points)

    pts = mesh.vertices[cells]  # (nc, dim+1, dim)
    jac = np.swapaxes(pts[:, 1:, :] - pts[:, :1, :], 1, 2)  # columns are edge vectors
    det = np.linalg.det(jac)
    if not (det > 0).all():
        raise ValueError("mesh contains degenerate or negatively oriented cells")
    jac_inv = np.linalg.inv(jac)
    cell_weights = quad.weights[None, :] * det[:, None]
    # physical gradient: grad phi = J^{-T} grad_ref phi
    p2_grad = np.einsum("qip,cpd->cqid", p2g, jac_inv)
    p1_grad = np.einsum("qip,cpd->cqid", p1g, jac_inv)
    quad_phys = pts[:, :1, :] + np.einsum("cdp,qp->cqd", jac, quad.points)

    return TaylorHoodSpace(
        mesh=mesh,
        quadrature=quad,
        edges=edges,
        cell_p2=cell_p2,
        n_scalar=n_scalar,
        n_pressure=nv,
        n_velocity=dim * n_scalar,
        p2_nodes=p2_nodes,
        dirichlet_scalar=dirichlet_scalar,
        dirichlet_velocity_dofs=np.sort(dirichlet_velocity),
        p2_values=p2v,
        p2_ref_gradients=p2g,
        p1_values=p1v,
        p1_ref_gradients=p1g,
        jac_inv=jac_inv,
        det_jac=det,
        cell_weights=cell_weights,
        p2_gradients=p2_grad,
        p1_gradients=p1_grad,
        quad_points=quad_phys,
    )


def evaluate_vector_function(g, points, t):
    """Evaluate g at an (m, dim) array of points, accepting vectorized or
    pointwise callables (g(points, t) or g(point, t))."""
    points = np.asarray(points, dtype=float)
    try:
        values = np.asarray(g(points, t), dtype=float)
        if values.shape == points.shape:
            return values
    except (TypeError, ValueError, IndexError):
        pass
    return np.asarray([g(p, t) for p in points], dtype=float)


def interpolate(space, g, t=0.0):
    """Nodal interpolation of a vector function into the velocity space.

    Returns the component-major coefficient vector; raises on non-finite
    nodal values.
    """
    values = evaluate_vector_function(g, space.p2_nodes, t)
    if values.shape != (space.n_scalar, space.dim):
        raise ValueError(
            f"function returned shape {values.shape}, expected {(space.n_scalar, space.dim)}"
        )
    if not np.isfinite(values).all():
        bad = int(np.argwhere(~np.isfinite(values))[0][0])
        raise ValueError(f"non-finite value at node {bad}: {space.p2_nodes[bad]}")
    return values.T.reshape(-1).copy()


def gradient_tabulation(space, cell):
    """Per-quadrature-point basis values and physical gradients on one cell."""
    nc = space.cell_p2.shape[0]
    if not 0 <= cell < nc:
        raise IndexError(f"cell index {cell} out of range [0, {nc})")
    if space.det_jac[cell] <= 0.0:
        raise ValueError(f"cell {cell} is degenerate")
    return CellTabulation(
        points=space.quad_points[cell],
        weights=space.cell_weights[cell],
        p2_values=space.p2_values,
        p2_gradients=space.p2_gradients[cell],
        p1_values=space.p1_values,
        p1_gradients=space.p1_gradients[cell],
    )
