"""Per-step scalar diagnostics and sweep statistics.

The energy/dissipation ledgers mirror the discrete stability identity of the
modular scheme in 3d: with the regime-appropriate bookkeeping,
E_next - E_prev + 2k D = 2k (f, u_tilde) holds to solver precision. All
quantities are quadratic forms in the assembled operators, so they stay
consistent with the solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Marker for steps where no stability ledger applies (wrong scheme/regime).
NO_GUARANTEE = float("nan")


@dataclass(eq=False)
class StepRecord:
    """Scalar diagnostics for one accepted time step."""

    n: int
    t: float
    kinetic_energy: float
    div_norm: float
    div_norm_sum: float  # ||div(u_next + u_prev)||, for the boundary regime
    E: float
    D: float
    identity_residual: float
    load_pairing: float


def kinetic_energy(u, M):
    """0.5 u^T M u."""
    u = np.asarray(u)
    if M.shape[1] != u.shape[0]:
        raise ValueError(f"shape mismatch: {M.shape} vs {u.shape}")
    return 0.5 * float(u @ (M @ u))


def div_norm(u, Gfull):
    """L2 norm of the divergence: sqrt(u^T Gfull u), clamped at 0."""
    u = np.asarray(u)
    val = float(u @ (Gfull @ u))
    return math.sqrt(max(val, 0.0))


def _quad_forms(v, ops):
    v = np.asarray(v)
    qd = float(v @ (ops.Gdiag @ v))
    qf = float(v @ (ops.Gfull @ v))
    return qd, qf


def _form_scale(qd, qf, gamma, alpha):
    return (gamma + alpha) * qd + gamma * qf + abs(alpha - 2.0 * gamma) / 3.0 * qf


def seminorm_b(v, ops, gamma, alpha):
    """Quadratic form (gamma+alpha) * diag-grad energy - gamma * div energy.

    May be negative for alpha < 2*gamma; in 3d it is bounded below by
    (alpha - 2*gamma)/3 * ||div v||^2.
    """
    qd, qf = _quad_forms(v, ops)
    return (gamma + alpha) * qd - gamma * qf


def seminorm_bstar(v, ops, gamma, alpha):
    """The shifted form, nonnegative in 3d for every gamma > 0, alpha >= 0.

    Tiny negatives (within 1e-10 of the form scale) are rounded to zero;
    anything materially negative signals an assembly bug and raises.
    """
    qd, qf = _quad_forms(v, ops)
    value = (gamma + alpha) * qd - gamma * qf - (alpha - 2.0 * gamma) / 3.0 * qf
    scale = max(_form_scale(qd, qf, gamma, alpha), 1.0)
    if value < -1e-10 * scale:
        raise ValueError(f"shifted grad-div form is materially negative: {value:g}")
    return max(value, 0.0)


def _regime(gamma, alpha):
    if alpha >= 2.0 * gamma:
        return "high"
    if alpha >= 0.5 * gamma:
        return "moderate"
    return None


def energy_ledger(state, ops, params, load_pairing, regime=None):
    """(E_next, D, identity_residual) for a modular-scheme 3d step.

    Selects the ledger by regime: alpha >= 2*gamma uses the plain lagged-form
    bookkeeping, 2*gamma > alpha >= 0.5*gamma the shifted one (which carries
    the pair-sum divergence term). Outside both regimes, or when the step has
    no intermediate velocity, returns NO_GUARANTEE sentinels.
    """
    gamma, alpha, k = params.gamma, params.alpha, params.k
    if regime is None:
        regime = _regime(gamma, alpha)
    if regime is None or state.u_tilde is None or ops.space.dim != 3:
        return NO_GUARANTEE, NO_GUARANTEE, NO_GUARANTEE

    u_prev, u_tilde, u_next = state.u_prev, state.u_tilde, state.u_next
    M, K, Gfull = ops.M, ops.K, ops.Gfull

    def msq(v):
        return float(v @ (M @ v))

    def divsq(v):
        return float(v @ (Gfull @ v))

    grad_tilde_sq = float(u_tilde @ (K @ u_tilde))
    diff_tilde = u_tilde - u_prev
    diff_next = u_next - u_tilde
    diff_step = u_next - u_prev

    if regime == "high":
        def energy(v):
            return msq(v) + k * seminorm_b(v, ops, gamma, alpha)

        dissipation = (
            params.nu * grad_tilde_sq
            + (msq(diff_tilde) + msq(diff_next)) / (2.0 * k)
            + gamma * divsq(u_next)
            + 0.5 * seminorm_b(diff_step, ops, gamma, alpha)
        )
    elif regime == "moderate":
        def energy(v):
            return (
                msq(v)
                + k * seminorm_bstar(v, ops, gamma, alpha)
                + k * (2.0 * gamma - alpha) / 3.0 * divsq(v)
            )

        dissipation = (
            params.nu * grad_tilde_sq
            + (msq(diff_tilde) + msq(diff_next)) / (2.0 * k)
            + 0.5 * seminorm_bstar(diff_step, ops, gamma, alpha)
            + 2.0 / 3.0 * (alpha - 0.5 * gamma) * divsq(u_next)
            + (2.0 * gamma - alpha) / 6.0 * divsq(u_next + u_prev)
        )
    else:
        raise ValueError(f"unknown regime {regime!r}")

    e_next = energy(u_next)
    e_prev = energy(u_prev)
    residual = e_next - e_prev + 2.0 * k * dissipation - 2.0 * k * load_pairing
    return e_next, dissipation, residual


def planar_estimate_residual(state, ops, params, load_pairing):
    """Left side minus right side of the 2d per-step stability estimate.

    For the modular scheme in 2d the estimate
    [||u||^2 + k*(gamma+alpha)*diag-grad]_next - [...]_prev
      + ||u_tilde - u_prev||^2 + ||u_next - u_tilde||^2
      + 2 k nu ||grad u_tilde||^2  <=  2 k (f, u_tilde)
    holds for every alpha >= 0; the return value should be <= 0 up to solver
    noise.
    """
    k = params.k
    M, K, Gdiag = ops.M, ops.K, ops.Gdiag
    scale = k * (params.gamma + params.alpha)

    def energy(v):
        return float(v @ (M @ v)) + scale * float(v @ (Gdiag @ v))

    diff_tilde = state.u_tilde - state.u_prev
    diff_next = state.u_next - state.u_tilde
    lhs = (
        energy(state.u_next)
        - energy(state.u_prev)
        + float(diff_tilde @ (M @ diff_tilde))
        + float(diff_next @ (M @ diff_next))
        + 2.0 * k * params.nu * float(state.u_tilde @ (K @ state.u_tilde))
    )
    return lhs - 2.0 * k * load_pairing


def time_average_div(records):
    """Mean of ||div u||^2 over the recorded steps (finite entries only)."""
    values = [r.div_norm**2 for r in records if math.isfinite(r.div_norm)]
    if not values:
        raise ValueError("no finite records to average")
    return sum(values) / len(values)


def rate(q1, q2, gamma1, gamma2):
    """Observed decay rate ln(q2/q1) / ln(gamma2/gamma1)."""
    if q1 <= 0.0 or q2 <= 0.0:
        raise ValueError("rate undefined for nonpositive quantities")
    if gamma1 <= 0.0 or gamma2 <= 0.0 or gamma1 == gamma2:
        raise ValueError("rate needs distinct positive gamma values")
    return math.log(q2 / q1) / math.log(gamma2 / gamma1)


@dataclass(eq=False)
class SweepRow:
    gamma: float
    alpha: float
    avg_div_sq: float
    final_div: float
    rate_avg: float | None
    rate_final: float | None
    blowup_step: int | None


@dataclass(eq=False)
class SweepSummary:
    rows: list


def summarize_sweep(entries):
    """Build sweep rows from (gamma, alpha, records, blowup_step) tuples.

    Rates are computed between consecutive entries with distinct gammas and
    positive quantities; otherwise left as None.
    """
    rows = []
    prev = None
    for gamma, alpha, records, blowup_step in entries:
        finite = [r for r in records if math.isfinite(r.div_norm)]
        avg = time_average_div(records) if finite else float("nan")
        final = finite[-1].div_norm if finite else float("nan")
        rate_avg = rate_final = None
        if prev is not None and prev.gamma != gamma and prev.gamma > 0 and gamma > 0:
            if prev.avg_div_sq > 0 and avg > 0:
                rate_avg = rate(prev.avg_div_sq, avg, prev.gamma, gamma)
            if prev.final_div > 0 and final > 0:
                rate_final = rate(prev.final_div, final, prev.gamma, gamma)
        row = SweepRow(gamma, alpha, avg, final, rate_avg, rate_final, blowup_step)
        rows.append(row)
        prev = row
    return SweepSummary(rows=rows)
