"""Condition-number estimation for the relaxation-step component block.

The block for one velocity component is A = M1 + k(gamma+alpha) K_x with M1
the scalar P2 mass and K_x the same-axis derivative Gram, restricted to the
Dirichlet-constrained (interior) nodes. Its 2-norm condition number stays
bounded as k(gamma+alpha) grows, transitioning from mass-dominated O(1)
conditioning to elliptic O(h^-2) conditioning; `bound_shape` evaluates that
transition profile with unit constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import assemble_axis_stiffness, assemble_scalar_mass
from .sparse_linalg import extreme_eigenvalue_estimates, factorize


@dataclass(eq=False)
class ConditioningReport:
    h: float
    k: float
    gamma_plus_alpha: float
    lambda_max: float
    lambda_min: float
    cond2: float
    bound_shape: float
    converged: bool
    iterations_max: int
    iterations_min: int


def bound_shape(h, k_gamma_alpha):
    """(h^2 + k(gamma+alpha)) / ((1 + k(gamma+alpha)) h^2)."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    if k_gamma_alpha < 0.0:
        raise ValueError("k(gamma+alpha) must be nonnegative")
    return (h * h + k_gamma_alpha) / ((1.0 + k_gamma_alpha) * h * h)


def component_block(space, k, gamma_plus_alpha, axis=0):
    """Unconstrained scalar block M1 + k(gamma+alpha) K_axis."""
    return assemble_scalar_mass(space) + (k * gamma_plus_alpha) * assemble_axis_stiffness(
        space, axis
    )


def interior_block(space, k, gamma_plus_alpha, axis=0):
    """The component block restricted to non-Dirichlet scalar nodes."""
    block = component_block(space, k, gamma_plus_alpha, axis=axis)
    mask = np.ones(space.n_scalar, dtype=bool)
    mask[space.dirichlet_scalar] = False
    interior = np.where(mask)[0]
    if interior.size == 0:
        raise ValueError("no interior nodes: mesh too coarse for conditioning estimates")
    return block[interior, :][:, interior].tocsr()


def estimate_cond2(space, k, gamma_plus_alpha, tol=1e-9, maxit=20000):
    """Estimate cond_2 of the constrained component block.

    lambda_max comes from power iteration on A, lambda_min from inverse
    iteration through one LU factorization. Non-convergence is flagged in
    the report but estimates are still returned.
    """
    block = interior_block(space, k, gamma_plus_alpha)
    fact = factorize(block)
    est_max, est_min = extreme_eigenvalue_estimates(block, fact, tol=tol, maxit=maxit)
    h = space.mesh.h
    return ConditioningReport(
        h=h,
        k=k,
        gamma_plus_alpha=gamma_plus_alpha,
        lambda_max=est_max.value,
        lambda_min=est_min.value,
        cond2=est_max.value / est_min.value,
        bound_shape=bound_shape(h, k * gamma_plus_alpha),
        converged=est_max.converged and est_min.converged,
        iterations_max=est_max.iterations,
        iterations_min=est_min.iterations,
    )
