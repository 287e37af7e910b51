"""Sparse operator assembly for the grad-div stabilized schemes.

All operators are CSR matrices over the component-major velocity numbering
(and vertex-numbered P1 pressure). Cell loops are vectorized; duplicate
COO entries are summed on CSR conversion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .fem_space import evaluate_vector_function


def _canonical(matrix):
    out = matrix.tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def _scatter_square(local, dof_map, n):
    rows = np.broadcast_to(dof_map[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(dof_map[:, None, :], local.shape).ravel()
    return _canonical(sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def assemble_scalar_mass(space):
    """Gram matrix of scalar P2 basis values."""
    local = np.einsum("cq,qi,qj->cij", space.cell_weights, space.p2_values, space.p2_values)
    return _scatter_square(local, space.cell_p2, space.n_scalar)


def assemble_scalar_stiffness(space):
    """Gram matrix of full scalar P2 gradients."""
    local = np.einsum(
        "cq,cqid,cqjd->cij", space.cell_weights, space.p2_gradients, space.p2_gradients
    )
    return _scatter_square(local, space.cell_p2, space.n_scalar)


def assemble_axis_stiffness(space, axis_row, axis_col=None):
    """Gram matrix (d phi_i / d x_a, d phi_j / d x_b) of scalar P2 derivatives."""
    if axis_col is None:
        axis_col = axis_row
    local = np.einsum(
        "cq,cqi,cqj->cij",
        space.cell_weights,
        space.p2_gradients[:, :, :, axis_row],
        space.p2_gradients[:, :, :, axis_col],
    )
    return _scatter_square(local, space.cell_p2, space.n_scalar)


def _block_diag(blocks):
    return _canonical(sparse.block_diag(blocks, format="csr"))


def assemble_mass(space):
    """Vector velocity mass matrix (u, v); SPD, block-diagonal per component."""
    return _block_diag([assemble_scalar_mass(space)] * space.dim)


def assemble_stiffness(space):
    """Viscous stiffness (grad u, grad v), unscaled by the viscosity."""
    return _block_diag([assemble_scalar_stiffness(space)] * space.dim)


def assemble_graddiv_diag(space):
    """Diagonal grad-div matrix: sum of same-component axis-derivative Grams.

    Strictly block-diagonal across components under component-major numbering.
    """
    return _block_diag([assemble_axis_stiffness(space, c) for c in range(space.dim)])


def assemble_graddiv_full(space):
    """Full grad-div matrix (div u, div v), coupling all velocity components."""
    dim = space.dim
    blocks = [[None] * dim for _ in range(dim)]
    for a in range(dim):
        for b in range(dim):
            blocks[a][b] = assemble_axis_stiffness(space, a, b)
    return _canonical(sparse.bmat(blocks, format="csr"))


def assemble_div_coupling(space):
    """Rectangular (pressure x velocity) matrix of (div u, q)."""
    dim = space.dim
    blocks = []
    for c in range(dim):
        local = np.einsum(
            "cq,qi,cqj->cij",
            space.cell_weights,
            space.p1_values,
            space.p2_gradients[:, :, :, c],
        )
        rows = np.broadcast_to(space.mesh.cells[:, :, None], local.shape).ravel()
        cols = np.broadcast_to(space.cell_p2[:, None, :], local.shape).ravel()
        blocks.append(
            sparse.coo_matrix(
                (local.ravel(), (rows, cols)), shape=(space.n_pressure, space.n_scalar)
            )
        )
    return _canonical(sparse.hstack(blocks, format="csr"))


def assemble_convection(space, w):
    """Skew-symmetrized convection matrix for transport field w.

    Builds N_ij = (w . grad phi_j, phi_i) on the scalar space and returns the
    per-component block replication of (N - N^T)/2, so v^T C(w) v vanishes
    identically for every v.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (space.n_velocity,):
        raise ValueError(f"velocity coefficient vector must have shape ({space.n_velocity},)")
    if not np.isfinite(w).all():
        raise ValueError("transport field has non-finite coefficients")
    n = space.n_scalar
    # w at quadrature points, per cell and component
    wc = w.reshape(space.dim, n)[:, space.cell_p2]  # (dim, nc, nb2)
    wq = np.einsum("dcb,qb->cqd", wc, space.p2_values)  # (nc, nq, dim)
    wdotgrad = np.einsum("cqd,cqjd->cqj", wq, space.p2_gradients)
    local = np.einsum("cq,qi,cqj->cij", space.cell_weights, space.p2_values, wdotgrad)
    advect = _scatter_square(local, space.cell_p2, n)
    skew = _canonical(0.5 * (advect - advect.T))
    return _block_diag([skew] * space.dim)


def assemble_load(space, f, t):
    """Load vector (f(., t), v) by quadrature.

    f takes an (m, dim) point array (or a single point) and the time.
    """
    nc, nq, dim = space.quad_points.shape
    values = evaluate_vector_function(f, space.quad_points.reshape(-1, dim), t)
    if not np.isfinite(values).all():
        raise ValueError(f"forcing produced non-finite values at t={t}")
    values = values.reshape(nc, nq, dim)
    local = np.einsum("cq,cqd,qi->dci", space.cell_weights, values, space.p2_values)
    load = np.zeros(space.n_velocity)
    for c in range(dim):
        np.add.at(load, c * space.n_scalar + space.cell_p2.ravel(), local[c].ravel())
    return load


def pressure_mean_vector(space):
    """Vector of (q, 1) pairings; borders the saddle system to pin mean pressure."""
    local = np.einsum("cq,qi->ci", space.cell_weights, space.p1_values)
    m = np.zeros(space.n_pressure)
    np.add.at(m, space.mesh.cells.ravel(), local.ravel())
    return m


@dataclass(eq=False)
class OperatorSet:
    """Assembled operators shared by every scheme on one space.

    M: velocity mass; K: viscous stiffness (unscaled); Dmat: (div u, q);
    Gfull: (div u, div v); Gdiag: diagonal grad-div; mean_vector: (q, 1);
    scalar_mass and axis_stiffness expose the per-component blocks.
    """

    space: object
    M: sparse.csr_matrix
    K: sparse.csr_matrix
    Dmat: sparse.csr_matrix
    Gfull: sparse.csr_matrix
    Gdiag: sparse.csr_matrix
    mean_vector: np.ndarray
    scalar_mass: sparse.csr_matrix
    axis_stiffness: tuple


def assemble_operator_set(space):
    """Assemble every time-constant operator once."""
    scalar_mass = assemble_scalar_mass(space)
    axis = tuple(assemble_axis_stiffness(space, c) for c in range(space.dim))
    return OperatorSet(
        space=space,
        M=_block_diag([scalar_mass] * space.dim),
        K=assemble_stiffness(space),
        Dmat=assemble_div_coupling(space),
        Gfull=assemble_graddiv_full(space),
        Gdiag=_block_diag(list(axis)),
        mean_vector=pressure_mean_vector(space),
        scalar_mass=scalar_mass,
        axis_stiffness=axis,
    )


def apply_dirichlet(matrix, rhs, dirichlet_dofs):
    """Symmetric elimination of homogeneous Dirichlet DOFs.

    Zeroes constrained rows and columns, puts 1 on their diagonal and 0 in
    the right side, so solutions carry exact zeros there. Works on bordered
    systems as long as the constrained indices address velocity DOFs.
    """
    matrix = matrix.tocsr()
    n = matrix.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("apply_dirichlet expects a square system")
    dofs = np.asarray(dirichlet_dofs, dtype=np.int64)
    if dofs.size and (dofs.min() < 0 or dofs.max() >= n):
        raise IndexError(f"dirichlet DOF out of range [0, {n})")
    keep = np.ones(n)
    keep[dofs] = 0.0
    mask = sparse.diags(keep)
    constrained = mask @ matrix @ mask
    if dofs.size:
        constrained = constrained + sparse.coo_matrix(
            (np.ones(dofs.size), (dofs, dofs)), shape=(n, n)
        )
    out_rhs = np.asarray(rhs, dtype=float).copy()
    out_rhs[dofs] = 0.0
    return _canonical(constrained), out_rhs


def write_matrix_market(matrix, path):
    """Dump a sparse matrix in MatrixMarket coordinate format (1-based)."""
    coo = sparse.coo_matrix(matrix)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
