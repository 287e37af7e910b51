"""Direct solves, CG, and eigenvalue estimation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from sparsegd import sparse_linalg as sla


def _random_spd(n, seed, shift=1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return A @ A.T / n + shift * np.eye(n)


def test_to_csr_canonicalizes_duplicates():
    coo = sparse.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    out = sla.to_csr(coo)
    assert out.has_sorted_indices
    assert out.nnz == 2
    assert out[0, 1] == 3.0


def test_spmv_identity_and_zero():
    eye = sparse.identity(5, format="csr")
    x = np.arange(5.0)
    assert np.array_equal(sla.spmv(eye, x), x)
    zero = sparse.csr_matrix((5, 5))
    assert not sla.spmv(zero, x).any()


def test_spmv_shape_mismatch():
    eye = sparse.identity(5, format="csr")
    with pytest.raises(ValueError, match="shape mismatch"):
        sla.spmv(eye, np.ones(4))


@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_spmv_matches_dense(seed):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((10, 10))
    dense[rng.random((10, 10)) < 0.5] = 0.0
    x = rng.standard_normal(10)
    assert np.abs(sla.spmv(sla.to_csr(dense), x) - dense @ x).max() < 1e-14


def test_factorize_diagonal():
    d = np.array([2.0, 4.0, 8.0])
    fact = sla.factorize(sparse.diags(d).tocsc())
    b = np.ones(3)
    assert np.allclose(fact.solve(b), b / d)


def test_factorize_reports_empty_row():
    A = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(sla.SingularMatrixError, match="row 1|column 1"):
        sla.factorize(A)


def test_factorize_reports_numerical_singularity():
    A = sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(sla.SingularMatrixError, match="singular"):
        sla.factorize(A)


def test_factorize_rejects_nonsquare():
    with pytest.raises(ValueError):
        sla.factorize(sparse.csr_matrix(np.ones((2, 3))))


@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=100, deadline=None)
def test_factorize_solve_roundtrip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 200))
    A = _random_spd(n, seed)
    x = rng.standard_normal(n)
    b = A @ x
    got = sla.factorize(sla.to_csr(A)).solve(b)
    assert np.linalg.norm(got - x) <= 1e-10 * max(np.linalg.norm(x), 1.0)


def test_factorize_random_spd_against_dense_oracle():
    A = _random_spd(50, 123)
    rng = np.random.default_rng(321)
    b = rng.standard_normal(50)
    expected = np.linalg.solve(A, b)
    got = sla.factorize(sla.to_csr(A)).solve(b)
    assert np.abs(got - expected).max() < 1e-11 * np.abs(expected).max()


def test_factorization_residual_contract():
    A = _random_spd(80, 9)
    Acsr = sla.to_csr(A)
    rng = np.random.default_rng(10)
    b = rng.standard_normal(80)
    x = sla.factorize(Acsr).solve(b)
    res = np.linalg.norm(A @ x - b)
    bound = 1e-10 * (np.linalg.norm(A) * np.linalg.norm(x) + np.linalg.norm(b))
    assert res <= bound


def test_cg_identity_converges_in_one_iteration():
    eye = sparse.identity(8, format="csr")
    b = np.arange(1.0, 9.0)
    x, its = sla.cg_solve(eye, b, tol=1e-12)
    assert its == 1
    assert np.allclose(x, b)


def test_cg_zero_rhs():
    eye = sparse.identity(4, format="csr")
    x, its = sla.cg_solve(eye, np.zeros(4))
    assert its == 0
    assert not x.any()


@pytest.mark.parametrize("precondition", ["none", "jacobi"])
def test_cg_matches_direct_solve(precondition):
    A = sla.to_csr(_random_spd(60, 77))
    rng = np.random.default_rng(78)
    b = rng.standard_normal(60)
    expected = sla.factorize(A).solve(b)
    x, its = sla.cg_solve(A, b, tol=1e-12, preconditioner=precondition)
    assert np.linalg.norm(x - expected) < 1e-9 * np.linalg.norm(expected)
    assert its >= 1


def test_cg_breakdown_on_indefinite_matrix():
    A = sparse.diags([1.0, -1.0, 2.0]).tocsr()
    with pytest.raises(sla.CgBreakdownError):
        sla.cg_solve(A, np.array([1.0, 1.0, 1.0]), tol=1e-12)


def test_cg_nonconvergence_raises():
    A = sla.to_csr(_random_spd(40, 5, shift=1e-6))
    b = np.ones(40)
    with pytest.raises(sla.CgConvergenceError):
        sla.cg_solve(A, b, tol=1e-15, maxit=2)


def test_cg_step2_block_matches_direct():
    from sparsegd import assembly as asm
    from sparsegd import mesh as msh
    from sparsegd.fem_space import build_taylor_hood

    space = build_taylor_hood(msh.generate_unit_square(4))
    block = asm.assemble_scalar_mass(space) + 0.05 * asm.assemble_axis_stiffness(space, 0)
    block, _ = asm.apply_dirichlet(block, np.zeros(space.n_scalar), space.dirichlet_scalar)
    rng = np.random.default_rng(17)
    b = rng.standard_normal(space.n_scalar)
    direct = sla.factorize(block).solve(b)
    x, _ = sla.cg_solve(block, b, tol=1e-12, preconditioner="jacobi")
    assert np.linalg.norm(x - direct) < 1e-9 * np.linalg.norm(direct)


def test_cg_iterations_nonincreasing_toward_mass_limit():
    from sparsegd import assembly as asm
    from sparsegd import mesh as msh
    from sparsegd.fem_space import build_taylor_hood

    space = build_taylor_hood(msh.generate_unit_square(4))
    M1 = asm.assemble_scalar_mass(space)
    Kx = asm.assemble_axis_stiffness(space, 0)
    rng = np.random.default_rng(23)
    b = rng.standard_normal(space.n_scalar)
    counts = []
    for kga in (0.1, 0.01, 0.001):
        block, _ = asm.apply_dirichlet(M1 + kga * Kx, np.zeros(space.n_scalar), space.dirichlet_scalar)
        _, its = sla.cg_solve(block, b, tol=1e-10)
        counts.append(its)
    assert counts[0] >= counts[1] >= counts[2]


def test_eigen_estimates_on_explicit_spectrum():
    A = sparse.diags([1.0, 2.0, 5.0]).tocsr()
    lam_max, lam_min = sla.extreme_eigenvalue_estimates(A)
    assert lam_max.value == pytest.approx(5.0, abs=1e-8)
    assert lam_min.value == pytest.approx(1.0, abs=1e-8)
    assert lam_max.converged and lam_min.converged


def test_eigen_estimates_identity():
    eye = sparse.identity(6, format="csr")
    lam_max, lam_min = sla.extreme_eigenvalue_estimates(eye)
    assert lam_max.value == pytest.approx(1.0, rel=1e-12)
    assert lam_min.value == pytest.approx(1.0, rel=1e-12)


@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_eigen_estimates_match_dense_oracle(seed):
    # random orthogonal basis, spread spectrum (power-type iterations cannot
    # separate the near-continuum at a Wishart edge, so don't ask them to)
    rng = np.random.default_rng(seed)
    n = 30
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    spectrum = 1.0 + 9.0 * (np.arange(n) / (n - 1)) ** 2
    A = (q * spectrum) @ q.T
    A = 0.5 * (A + A.T)
    eigs = np.linalg.eigvalsh(A)
    lam_max, lam_min = sla.extreme_eigenvalue_estimates(sla.to_csr(A))
    assert abs(lam_max.value - eigs[-1]) < 1e-5 * eigs[-1]
    assert abs(lam_min.value - eigs[0]) < 1e-5 * eigs[0]
