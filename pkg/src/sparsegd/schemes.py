"""Time-stepping schemes for the grad-div stabilized flow problem.

Three one-step advances over a shared operator set:

* ``modular_sgd``: a standard linearly-implicit momentum/pressure solve
  followed by a separate relaxation solve whose matrix is block-diagonal
  per velocity component (the component blocks are factored once and
  reused every step).
* ``sgd1``: the one-step variant folding the decoupled grad-div term into
  the momentum solve, lagging the coupled remainder.
* ``coupled_graddiv``: the classical baseline with the full grad-div term
  in the momentum matrix.

The momentum solve is a bordered saddle-point system: velocity block,
pressure-divergence coupling, and a single scalar row pinning the mean
pressure (a multiplier rather than pinning a DOF, so the discrete
divergence constraint is preserved exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import diagnostics
from .assembly import (
    apply_dirichlet,
    assemble_convection,
    assemble_load,
    assemble_operator_set,
)
from .fem_space import build_taylor_hood, interpolate
from .sparse_linalg import SingularMatrixError, factorize

SCHEMES = ("modular_sgd", "sgd1", "coupled_graddiv")

#: Kinetic-energy cap beyond which a finite trajectory is classified unstable.
KE_BLOWUP_CAP = 1e12


class SimulationError(RuntimeError):
    """Solver failure during time stepping; carries the failing step index."""

    def __init__(self, message, step):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(eq=False)
class SolverOptions:
    cg_tol: float = 1e-10
    cg_maxit: int | None = None


@dataclass(eq=False)
class SchemeParams:
    """Time-stepping configuration.

    forcing takes an (m, dim) point array and a time; initial_velocity, when
    given, is interpolated for the start value (default: rest).
    """

    nu: float
    k: float
    t_end: float
    gamma: float = 0.0
    alpha: float = 0.0
    scheme: str = "modular_sgd"
    forcing: object = None
    initial_velocity: object = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.nu <= 0.0:
            raise ValueError("nu must be positive")
        if self.k <= 0.0:
            raise ValueError("k must be positive")
        if self.gamma < 0.0 or self.alpha < 0.0:
            raise ValueError("gamma and alpha must be nonnegative")
        if self.t_end < self.k:
            raise ValueError("t_end must be at least one step long")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    def num_steps(self):
        return math.ceil(self.t_end / self.k - 1e-9)


@dataclass(eq=False)
class FlowState:
    """Coefficient vectors around one time step.

    Dirichlet velocity DOFs are exactly zero in every velocity vector; any
    non-finite entry marks a blown-up trajectory.
    """

    u_prev: np.ndarray
    u_tilde: np.ndarray | None = None
    u_next: np.ndarray | None = None
    p: np.ndarray | None = None
    lam: float = 0.0
    n: int = 0
    t: float = 0.0


@dataclass(eq=False)
class SimulationResult:
    records: list
    blowup_step: int | None = None

    @property
    def blew_up(self):
        return self.blowup_step is not None


def build_bordered_matrix(velocity_block, ops):
    """Saddle-point matrix [[A, D^T, 0], [D, 0, m], [0, m^T, 0]]."""
    mean_col = sparse.csr_matrix(ops.mean_vector.reshape(-1, 1))
    return sparse.bmat(
        [
            [velocity_block, ops.Dmat.T, None],
            [ops.Dmat, None, mean_col],
            [None, mean_col.T, None],
        ],
        format="csr",
    )


def momentum_matrix(ops, params, w, graddiv_term=None):
    """(1/k) M + C(w) + nu K, plus an optional extra grad-div block."""
    block = (1.0 / params.k) * ops.M + assemble_convection(ops.space, w) + params.nu * ops.K
    if graddiv_term is not None:
        block = block + graddiv_term
    return block


def _solve_bordered(velocity_block, rhs_velocity, ops, step):
    space = ops.space
    n_u, n_p = space.n_velocity, space.n_pressure
    matrix = build_bordered_matrix(velocity_block, ops)
    rhs = np.concatenate([rhs_velocity, np.zeros(n_p + 1)])
    matrix, rhs = apply_dirichlet(matrix, rhs, space.dirichlet_velocity_dofs)
    try:
        solution = factorize(matrix).solve(rhs)
    except SingularMatrixError as exc:
        raise SimulationError(str(exc), step) from exc
    u = solution[:n_u]
    u[space.dirichlet_velocity_dofs] = 0.0
    return u, solution[n_u : n_u + n_p], float(solution[-1])


def step1_momentum(state, ops, params, load):
    """Momentum/pressure solve for the intermediate velocity.

    Independent of gamma and alpha; the returned velocity satisfies the
    discrete divergence constraint against every pressure test function.
    """
    rhs = (1.0 / params.k) * (ops.M @ state.u_prev) + load
    return _solve_bordered(
        momentum_matrix(ops, params, state.u_prev), rhs, ops, state.n + 1
    )


def build_step2_factors(ops, params):
    """Factor the per-component relaxation blocks M1 + k(gamma+alpha)Kc once.

    The blocks are constant in time, so one factorization serves the whole
    simulation.
    """
    space = ops.space
    scale = params.k * (params.gamma + params.alpha)
    factors = []
    for c in range(space.dim):
        block = ops.scalar_mass + scale * ops.axis_stiffness[c]
        block, _ = apply_dirichlet(block, np.zeros(space.n_scalar), space.dirichlet_scalar)
        factors.append(factorize(block))
    return tuple(factors)


def step2_sparse_graddiv(state, ops, params, factors=None):
    """Grad-div relaxation solve producing the end-of-step velocity.

    Solves [M + k(gamma+alpha) Gdiag] u = M u_tilde
    + k [(gamma+alpha) Gdiag - gamma Gfull] u_prev, which splits into one
    independent block per velocity component.
    """
    if factors is None:
        factors = build_step2_factors(ops, params)
    space = ops.space
    ga = params.gamma + params.alpha
    rhs = ops.M @ state.u_tilde + params.k * (
        ga * (ops.Gdiag @ state.u_prev) - params.gamma * (ops.Gfull @ state.u_prev)
    )
    rhs[space.dirichlet_velocity_dofs] = 0.0
    n = space.n_scalar
    u_next = np.empty(space.n_velocity)
    for c in range(space.dim):
        u_next[c * n : (c + 1) * n] = factors[c].solve(rhs[c * n : (c + 1) * n])
    u_next[space.dirichlet_velocity_dofs] = 0.0
    return u_next


def step_sgd1(state, ops, params, load):
    """One-step scheme: decoupled grad-div term implicit, coupled part lagged."""
    ga = params.gamma + params.alpha
    rhs = (
        (1.0 / params.k) * (ops.M @ state.u_prev)
        + ga * (ops.Gdiag @ state.u_prev)
        - params.gamma * (ops.Gfull @ state.u_prev)
        + load
    )
    block = momentum_matrix(ops, params, state.u_prev, graddiv_term=ga * ops.Gdiag)
    return _solve_bordered(block, rhs, ops, state.n + 1)


def step_coupled_graddiv(state, ops, params, load):
    """Baseline with the fully coupled grad-div term; alpha is ignored."""
    rhs = (1.0 / params.k) * (ops.M @ state.u_prev) + load
    block = momentum_matrix(ops, params, state.u_prev, graddiv_term=params.gamma * ops.Gfull)
    return _solve_bordered(block, rhs, ops, state.n + 1)


def _initial_velocity(space, params):
    if params.initial_velocity is None:
        return np.zeros(space.n_velocity)
    u0 = interpolate(space, params.initial_velocity, 0.0)
    u0[space.dirichlet_velocity_dofs] = 0.0
    return u0


def run_with_operators(space, ops, params, observers=(), max_steps=None):
    """Advance a flow from its initial state, collecting per-step diagnostics.

    Observers are called as observer(record, state) after each step. Halts
    early when the state goes non-finite or the kinetic energy passes
    KE_BLOWUP_CAP, recording the blow-up step. Returns a SimulationResult.
    """
    n_steps = params.num_steps()
    if max_steps is not None:
        n_steps = min(n_steps, max_steps)
    modular = params.scheme == "modular_sgd"
    factors = build_step2_factors(ops, params) if modular else None

    state = FlowState(u_prev=_initial_velocity(space, params))
    records = []
    blowup_step = None
    for n in range(n_steps):
        t_next = (n + 1) * params.k
        state.n = n
        if params.forcing is not None:
            load = assemble_load(space, params.forcing, t_next)
        else:
            load = np.zeros(space.n_velocity)

        if modular:
            state.u_tilde, state.p, state.lam = step1_momentum(state, ops, params, load)
            state.u_next = step2_sparse_graddiv(state, ops, params, factors)
            pairing_velocity = state.u_tilde
        elif params.scheme == "sgd1":
            state.u_tilde = None
            state.u_next, state.p, state.lam = step_sgd1(state, ops, params, load)
            pairing_velocity = state.u_next
        else:
            state.u_tilde = None
            state.u_next, state.p, state.lam = step_coupled_graddiv(state, ops, params, load)
            pairing_velocity = state.u_next

        load_pairing = float(load @ pairing_velocity)
        energy, dissipation, residual = diagnostics.energy_ledger(
            state, ops, params, load_pairing
        )
        ke = diagnostics.kinetic_energy(state.u_next, ops.M)
        pair_sum = (
            diagnostics.div_norm(state.u_next + state.u_prev, ops.Gfull)
            if np.isfinite(state.u_next).all()
            else float("nan")
        )
        record = diagnostics.StepRecord(
            n=n + 1,
            t=t_next,
            kinetic_energy=ke,
            div_norm=diagnostics.div_norm(state.u_next, ops.Gfull),
            div_norm_sum=pair_sum,
            E=energy,
            D=dissipation,
            identity_residual=residual,
            load_pairing=load_pairing,
        )
        records.append(record)
        for observer in observers:
            observer(record, state)

        if not np.isfinite(state.u_next).all() or not math.isfinite(ke) or ke > KE_BLOWUP_CAP:
            blowup_step = n + 1
            break

        state.u_prev = state.u_next
        state.t = t_next

    return SimulationResult(records=records, blowup_step=blowup_step)


def run_simulation(mesh, params, observers=()):
    """Build the discrete spaces/operators for `mesh` and run `params`."""
    space = build_taylor_hood(mesh)
    ops = assemble_operator_set(space)
    return run_with_operators(space, ops, params, observers=observers)
