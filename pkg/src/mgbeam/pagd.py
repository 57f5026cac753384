"""Projected adaptive gradient descent on the dual of the surrogate subproblem.

For fixed auxiliary variables the beamformer subproblem is concave with a
non-smooth group-minimum objective.  Its Lagrange dual lives on per-group
hyperplanes ``{delta_g >= 0, sum_k delta_gk = zeta_g}``, and for any feasible
dual point the maximizing beamformer has the closed form

    w_g = (H Theta' H^H + S I)^{-1} H_g d'_g,

with per-user weights ``theta'_gk = delta_gk |eta_gk|^2``, right-hand side
``d'_gk = delta_gk eta_gk sqrt(1 + xi_gk)`` and noise mass
``S = sum_gk delta_gk |eta_gk|^2 sigma_gk^2 / P_t``.  Under a reduced basis
``w_g = T_g c_g`` the same stationarity logic gives

    c_g = (F_g Theta' F_g^H + S Q_g)^{-1} F_gg d'_g,      F_g = T_g^H H.

The dual descent subtracts each user's surrogate gap to its group minimum,
scaled by an adaptive step that keeps the iterate nonnegative, then projects
every group back onto its hyperplane.  The duality gap doubles as the
convergence certificate: at the optimum it vanishes by strong duality.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .model import EPS_DEN, Scenario
from .cm import CmState, surrogate_from_products
from .structures import StructureBasis, StructureKind, _chol_solve_spd

__all__ = [
    "DegenerateDualError",
    "DualState",
    "PagdOptions",
    "PagdReport",
    "KktCertificate",
    "PagdSolver",
    "beamformer_from_dual",
    "dual_objective",
    "pagd_step",
    "solve_subproblem",
    "kkt_certificate",
]


class DegenerateDualError(ValueError):
    """All dual mass and noise terms vanish; the subproblem system is singular."""


@dataclass(frozen=True)
class DualState:
    """Per-user dual variables with cached per-group sums."""

    delta: np.ndarray
    group_sums: np.ndarray

    @classmethod
    def from_delta(cls, scenario: Scenario, delta: np.ndarray) -> "DualState":
        delta = np.ascontiguousarray(delta, dtype=np.float64)
        if delta.shape != (scenario.K,):
            raise ValueError(f"delta must have length {scenario.K}")
        sums = np.add.reduceat(delta, scenario.group_starts)
        delta.setflags(write=False)
        sums.setflags(write=False)
        return cls(delta=delta, group_sums=sums)

    @classmethod
    def uniform(cls, scenario: Scenario) -> "DualState":
        """Centroid of the feasible hyperplanes: ``delta_gk = zeta_g / K_g``."""
        sizes = np.asarray(scenario.group_sizes, dtype=np.float64)
        delta = np.repeat(scenario.weights / sizes, scenario.group_sizes)
        return cls.from_delta(scenario, delta)


@dataclass(frozen=True)
class PagdOptions:
    eps: float = 1e-4
    max_iters: int = 2000
    rho_c: float = 1.0
    rho_v: float = 0.02
    init_delta: np.ndarray | None = None
    record_trace: bool = False


@dataclass(frozen=True)
class PagdReport:
    """Solution of one dual solve, with its optimality certificates."""

    coeffs: tuple[np.ndarray, ...]
    dual_state: DualState
    primal: float
    dual: float
    duality_gap: float
    rel_gap: float
    iterations: int
    converged: bool
    stop_reason: str
    stationarity_residual: float
    hyperplane_residual: float
    comp_slack_residual: float
    dual_feasibility_min: float
    trace: tuple[list, list] | None = None

    @property
    def delta(self) -> np.ndarray:
        return self.dual_state.delta

    def to_json_dict(self) -> dict:
        return {
            "primal": self.primal,
            "dual": self.dual,
            "duality_gap": self.duality_gap,
            "rel_gap": self.rel_gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "stationarity_residual": self.stationarity_residual,
            "hyperplane_residual": self.hyperplane_residual,
            "comp_slack_residual": self.comp_slack_residual,
            "dual_feasibility_min": self.dual_feasibility_min,
        }


def _dual_weights(cm_state: CmState, delta: np.ndarray, noise_over_pt: np.ndarray):
    """Per-user channel weights, noise mass and right-hand-side weights."""
    theta = delta * np.abs(cm_state.eta) ** 2
    noise_mass = float(np.dot(theta, noise_over_pt))
    rhs_w = delta * cm_state.eta * np.sqrt(1.0 + cm_state.xi)
    return theta, noise_mass, rhs_w


def _solve_dual_beamformer(scenario: Scenario, basis: StructureBasis,
                           theta: np.ndarray, noise_mass: float,
                           rhs_w: np.ndarray) -> tuple[np.ndarray, ...]:
    if noise_mass <= EPS_DEN and np.max(theta, initial=0.0) <= EPS_DEN:
        raise DegenerateDualError(
            "dual variables carry no channel or noise weight; system is singular")
    starts, ends = scenario.group_starts, scenario.group_ends
    if basis.shared:
        F = basis.eff_channels[0]
        M = (F * theta[None, :]) @ F.conj().T + noise_mass * basis.power_grams[0]
        rhs = np.column_stack([F[:, starts[g]:ends[g]] @ rhs_w[starts[g]:ends[g]]
                               for g in range(scenario.G)])
        C = _chol_solve_spd(M, rhs, "dual beamformer system")
        return tuple(np.ascontiguousarray(C[:, g]) for g in range(scenario.G))
    out = []
    for g in range(scenario.G):
        F = basis.eff_channels[g]
        M = (F * theta[None, :]) @ F.conj().T + noise_mass * basis.power_grams[g]
        rhs = F[:, starts[g]:ends[g]] @ rhs_w[starts[g]:ends[g]]
        out.append(_chol_solve_spd(M, rhs, "dual beamformer system"))
    return tuple(out)


def beamformer_from_dual(scenario: Scenario, basis: StructureBasis,
                         cm_state: CmState, delta: np.ndarray) -> tuple[np.ndarray, ...]:
    """Closed-form maximizer of the dual-weighted surrogate at ``delta``.

    Returns reduced coefficients, one vector per group; expand through the
    basis for the antenna-domain beamformers.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0):
        raise ValueError("delta must be entrywise nonnegative")
    noise_over_pt = scenario.noise_power / scenario.P_t
    theta, noise_mass, rhs_w = _dual_weights(cm_state, delta, noise_over_pt)
    return _solve_dual_beamformer(scenario, basis, theta, noise_mass, rhs_w)


def _products_and_power(scenario, basis, coeffs):
    U = np.column_stack([basis.eff_channels[i].conj().T @ coeffs[i]
                         for i in range(scenario.G)])
    power = 0.0
    for Q, c in zip(basis.power_grams, coeffs):
        power += float(np.real(np.vdot(c, Q @ c)))
    return U, power


def dual_objective(scenario: Scenario, basis: StructureBasis,
                   cm_state: CmState, delta: np.ndarray) -> float:
    """Dual function value ``sum_gk delta_gk h_gk(W*(delta))``."""
    coeffs = beamformer_from_dual(scenario, basis, cm_state, delta)
    U, power = _products_and_power(scenario, basis, coeffs)
    h = surrogate_from_products(scenario, U, power, cm_state.xi, cm_state.eta)
    return float(np.dot(np.asarray(delta, dtype=np.float64), h))


def _project_groups(scenario: Scenario, bar: np.ndarray) -> np.ndarray:
    """Project each group onto its hyperplane, clamping stray negatives.

    The mean-offset projection lands exactly on ``sum_k delta_gk = zeta_g``;
    if it produces negative entries they are clamped to zero and the excess is
    removed proportionally from the positive entries so the group sum is
    restored.
    """
    starts, ends = scenario.group_starts, scenario.group_ends
    sizes = ends - starts
    sums = np.add.reduceat(bar, starts)
    offset = (sums - scenario.weights) / sizes
    out = bar - np.repeat(offset, sizes)
    if np.any(out < 0):
        for g in range(scenario.G):
            seg = out[starts[g]:ends[g]]
            if np.any(seg < 0):
                seg = np.maximum(seg, 0.0)
                total = seg.sum()
                if total > EPS_DEN:
                    seg *= scenario.weights[g] / total
                else:
                    seg = np.full(sizes[g], scenario.weights[g] / sizes[g])
                out[starts[g]:ends[g]] = seg
    return out


def pagd_step(scenario: Scenario, h_values: np.ndarray, delta: np.ndarray,
              j: int, rho_c: float = 1.0, rho_v: float = 0.02) -> DualState:
    """One dual update at inner iteration ``j``.

    Each user descends along its surrogate gap to the group minimum with the
    adaptive step ``tau_gk = delta_gk / (gap_gk + rho_c + rho_v * j)``, which
    keeps the pre-projection iterate nonnegative, and the group is then
    projected back onto its hyperplane.
    """
    delta = np.asarray(delta, dtype=np.float64)
    h_values = np.asarray(h_values, dtype=np.float64)
    gmin = np.minimum.reduceat(h_values, scenario.group_starts)
    gap = h_values - np.repeat(gmin, scenario.group_ends - scenario.group_starts)
    rho = rho_c + rho_v * j
    tau = delta / (gap + rho)
    bar = delta - tau * gap
    return DualState.from_delta(scenario, _project_groups(scenario, bar))


class _SubproblemKernel:
    """Per-subproblem constants and the closed-form solve, precomputed once.

    Everything that depends only on ``(scenario, basis, cm_state)`` is hoisted
    out of the dual-descent loop; each iteration then costs one Hermitian
    solve plus a handful of length-``K`` vector operations.
    """

    def __init__(self, scenario: Scenario, basis: StructureBasis, cm_state: CmState):
        self.scenario = scenario
        self.basis = basis
        self.starts = scenario.group_starts
        self.sizes = scenario.group_ends - scenario.group_starts
        self.own_rows = np.arange(scenario.K)
        self.own_cols = scenario.group_index
        self.noise_over_pt = scenario.noise_power / scenario.P_t
        self.xi = cm_state.xi
        self.log1p_xi = np.log1p(cm_state.xi)
        self.abs_eta_sq = np.abs(cm_state.eta) ** 2
        self.rhs_base = cm_state.eta * np.sqrt(1.0 + cm_state.xi)
        self.two_lead = 2.0 * np.conj(self.rhs_base)
        self.eff_t = tuple(F.conj().T for F in basis.eff_channels)
        # Uniform per-group dimensions allow one batched factorization.
        self.batched = (not basis.shared and len(set(basis.dims)) == 1
                        and len(set(scenario.group_sizes)) == 1)
        if self.batched:
            self.F_stack = np.stack(basis.eff_channels)            # G x m x K
            self.F_stack_conj = np.conj(self.F_stack)
            self.Fown_stack = np.stack([
                basis.eff_channels[g][:, self.starts[g]:self.starts[g] + self.sizes[g]]
                for g in range(scenario.G)])                       # G x m x K_g
            self.Q_stack = np.stack(basis.power_grams)             # G x m x m

    def solve(self, delta: np.ndarray):
        """Closed-form beamformer at ``delta``; returns ``(columns, U, power)``."""
        theta = delta * self.abs_eta_sq
        noise_mass = float(np.dot(theta, self.noise_over_pt))
        rhs_w = delta * self.rhs_base
        if noise_mass <= EPS_DEN and np.max(theta, initial=0.0) <= EPS_DEN:
            raise DegenerateDualError(
                "dual variables carry no channel or noise weight; system is singular")
        basis = self.basis
        if basis.shared:
            F = basis.eff_channels[0]
            M = (F * theta[None, :]) @ self.eff_t[0] + noise_mass * basis.power_grams[0]
            rhs = np.add.reduceat(F * rhs_w[None, :], self.starts, axis=1)
            C = _chol_solve_spd(M, rhs, "dual beamformer system")
            U = self.eff_t[0] @ C
            power = float(np.real(np.vdot(C, basis.power_grams[0] @ C)))
            return C, U, power
        if self.batched:
            M = np.einsum("gmk,k,gnk->gmn", self.F_stack, theta, self.F_stack_conj)
            M += noise_mass * self.Q_stack
            rhs = np.einsum("gmk,gk->gm", self.Fown_stack,
                            rhs_w.reshape(self.scenario.G, -1))
            try:
                low = np.linalg.cholesky(M)
                y = np.linalg.solve(low, rhs[:, :, None])
                C = np.linalg.solve(np.conj(np.transpose(low, (0, 2, 1))), y)[:, :, 0]
            except np.linalg.LinAlgError:
                C = np.stack([
                    _chol_solve_spd(M[g], rhs[g], "dual beamformer system")
                    for g in range(self.scenario.G)])
            U = np.einsum("gmk,gm->kg", self.F_stack_conj, C)
            power = float(np.real(np.einsum("gm,gmn,gn->", np.conj(C), self.Q_stack, C)))
            return C, U, power
        cols = []
        U = np.empty((self.scenario.K, self.scenario.G), dtype=np.complex128)
        power = 0.0
        for g in range(self.scenario.G):
            F = basis.eff_channels[g]
            M = (F * theta[None, :]) @ self.eff_t[g] + noise_mass * basis.power_grams[g]
            lo, hi = self.starts[g], self.starts[g] + self.sizes[g]
            c = _chol_solve_spd(M, F[:, lo:hi] @ rhs_w[lo:hi], "dual beamformer system")
            cols.append(c)
            U[:, g] = self.eff_t[g] @ c
            power += float(np.real(np.vdot(c, basis.power_grams[g] @ c)))
        return cols, U, power

    def h_values(self, U: np.ndarray, power: float) -> np.ndarray:
        own = U[self.own_rows, self.own_cols]
        tot = np.einsum("ij,ij->i", U.real, U.real) + np.einsum("ij,ij->i", U.imag, U.imag)
        return (self.log1p_xi
                + np.real(self.two_lead * own)
                - self.abs_eta_sq * (tot + self.noise_over_pt * power)
                - self.xi)

    def coeff_tuple(self, cols) -> tuple[np.ndarray, ...]:
        if self.basis.shared:
            return tuple(np.ascontiguousarray(cols[:, g]) for g in range(self.scenario.G))
        return tuple(np.ascontiguousarray(c) for c in cols)


def solve_subproblem(scenario: Scenario, basis: StructureBasis, cm_state: CmState,
                     options: PagdOptions | None = None) -> PagdReport:
    """Run the dual descent until the duality-gap certificate is met.

    Stops when the relative duality gap drops below ``eps``, when the dual
    iterate stalls (max-abs movement below ``eps``), or at the iteration cap.
    ``converged`` certifies that the final relative gap is within an order of
    magnitude of ``eps``, so a stalled-but-uncertified run reports False.
    """
    opts = options or PagdOptions()
    if opts.init_delta is not None:
        delta = _project_groups(scenario, np.maximum(np.asarray(opts.init_delta, float), 0.0))
    else:
        delta = DualState.uniform(scenario).delta.copy()

    kernel = _SubproblemKernel(scenario, basis, cm_state)
    starts = scenario.group_starts
    sizes = kernel.sizes
    zeta = scenario.weights
    trace_primal: list[float] = []
    trace_dual: list[float] = []

    cols = None
    primal = dual = rel_gap = np.nan
    stop_reason = "max_iters"
    iterations = 0
    h = np.zeros(scenario.K)

    for j in range(opts.max_iters):
        iterations = j + 1
        cols, U, power = kernel.solve(delta)
        h = kernel.h_values(U, power)
        gmin = np.minimum.reduceat(h, starts)
        primal = float(np.dot(zeta, gmin))
        dual = float(np.dot(delta, h))
        rel_gap = (dual - primal) / max(abs(primal), EPS_DEN)
        if opts.record_trace:
            trace_primal.append(primal)
            trace_dual.append(dual)
        if rel_gap < opts.eps:
            stop_reason = "gap"
            break
        gap = h - np.repeat(gmin, sizes)
        rho = opts.rho_c + opts.rho_v * j
        bar = delta - (delta / (gap + rho)) * gap
        new_delta = _project_groups(scenario, bar)
        if np.max(np.abs(new_delta - delta)) < opts.eps:
            stop_reason = "movement"
            break
        delta = new_delta
    else:
        # Iteration cap: re-pair the reported solution with the final dual point.
        cols, U, power = kernel.solve(delta)
        h = kernel.h_values(U, power)
        primal = float(np.dot(zeta, np.minimum.reduceat(h, starts)))
        dual = float(np.dot(delta, h))
        rel_gap = (dual - primal) / max(abs(primal), EPS_DEN)

    if cols is None:
        raise ValueError("max_iters must be at least 1")
    coeffs = kernel.coeff_tuple(cols)
    state = DualState.from_delta(scenario, delta)
    stationarity = _stationarity_residual(scenario, basis, cm_state, delta, coeffs)
    comp_slack = float(np.max(np.abs(
        delta * (np.repeat(np.minimum.reduceat(h, starts), sizes) - h))))
    return PagdReport(
        coeffs=coeffs,
        dual_state=state,
        primal=primal,
        dual=dual,
        duality_gap=dual - primal,
        rel_gap=float(rel_gap),
        iterations=iterations,
        converged=bool(rel_gap <= 10.0 * opts.eps),
        stop_reason=stop_reason,
        stationarity_residual=stationarity,
        hyperplane_residual=float(np.max(np.abs(state.group_sums - zeta))),
        comp_slack_residual=comp_slack,
        dual_feasibility_min=float(np.min(delta)),
        trace=(trace_primal, trace_dual) if opts.record_trace else None,
    )


def _stationarity_residual(scenario, basis, cm_state, delta, coeffs) -> float:
    """Normalized residual of the subproblem's first-order condition.

    Plugs the coefficients into the explicit gradient
    ``2 F_gg d'_g - 2 (F_g Theta' F_g^H + S Q_g) c_g`` and reports the worst
    group's residual relative to the gradient's own scale.
    """
    noise_over_pt = scenario.noise_power / scenario.P_t
    theta, noise_mass, rhs_w = _dual_weights(cm_state, np.asarray(delta, float), noise_over_pt)
    starts, ends = scenario.group_starts, scenario.group_ends
    worst = 0.0
    for g in range(scenario.G):
        F = basis.eff_channels[g]
        lead = 2.0 * (F[:, starts[g]:ends[g]] @ rhs_w[starts[g]:ends[g]])
        curv = 2.0 * ((F * theta[None, :]) @ (F.conj().T @ coeffs[g])
                      + noise_mass * (basis.power_grams[g] @ coeffs[g]))
        scale = max(np.linalg.norm(lead), np.linalg.norm(curv), EPS_DEN)
        worst = max(worst, float(np.linalg.norm(lead - curv) / scale))
    return worst


@dataclass(frozen=True)
class KktCertificate:
    """Machine-checkable optimality record for one subproblem solution."""

    stationarity: float
    hyperplane: float
    comp_slack_abs: float
    comp_slack_rel: float
    dual_feasibility_min: float
    primal: float
    structure_fit: float | None = None
    structure_fit_identity: float | None = None


def kkt_certificate(scenario: Scenario, basis: StructureBasis, cm_state: CmState,
                    report: PagdReport) -> KktCertificate:
    """Re-derive every optimality residual from the report's own solution.

    For the full-dimension structure the certificate additionally rebuilds the
    beamformer from the converged duals through the closed-form solution map
    and reports the relative mismatch (after optimal rescaling), plus the same
    fit with the noise mass replaced by an identity regularizer; the latter is
    recorded for reference rather than asserted.
    """
    delta = report.delta
    coeffs = report.coeffs
    U, power = _products_and_power(scenario, basis, coeffs)
    h = surrogate_from_products(scenario, U, power, cm_state.xi, cm_state.eta)
    starts, sizes = scenario.group_starts, scenario.group_ends - scenario.group_starts
    gmin = np.minimum.reduceat(h, starts)
    primal = float(np.dot(scenario.weights, gmin))
    comp = delta * (np.repeat(gmin, sizes) - h)
    comp_abs = float(np.max(np.abs(comp)))
    cert = dict(
        stationarity=_stationarity_residual(scenario, basis, cm_state, delta, coeffs),
        hyperplane=float(np.max(np.abs(
            np.add.reduceat(delta, starts) - scenario.weights))),
        comp_slack_abs=comp_abs,
        comp_slack_rel=comp_abs / max(abs(primal), EPS_DEN),
        dual_feasibility_min=float(np.min(delta)),
        primal=primal,
    )
    if basis.kind is StructureKind.FULL:
        W = np.column_stack([basis.bases[g] @ coeffs[g] for g in range(scenario.G)])
        noise_over_pt = scenario.noise_power / scenario.P_t
        try:
            rebuilt = np.column_stack(_solve_dual_beamformer(
                scenario, basis, *_dual_weights(cm_state, delta, noise_over_pt)))
            cert["structure_fit"] = _scale_matched_residual(W, rebuilt)
        except (DegenerateDualError, np.linalg.LinAlgError):
            cert["structure_fit"] = None
        theta = delta * np.abs(cm_state.eta) ** 2
        rhs_w = delta * cm_state.eta * np.sqrt(1.0 + cm_state.xi)
        M = (scenario.H * theta[None, :]) @ scenario.H.conj().T + np.eye(scenario.L)
        rhs = np.column_stack([
            scenario.H[:, starts[g]:starts[g] + sizes[g]] @ rhs_w[starts[g]:starts[g] + sizes[g]]
            for g in range(scenario.G)])
        cert["structure_fit_identity"] = _scale_matched_residual(
            W, np.linalg.solve(M, rhs))
    return KktCertificate(**cert)


def _scale_matched_residual(W: np.ndarray, V: np.ndarray) -> float:
    """``min_c ||W - c V||_F / ||W||_F`` over real positive scalings."""
    wn = np.linalg.norm(W)
    vn = np.linalg.norm(V)
    if wn <= EPS_DEN or vn <= EPS_DEN:
        return float(wn > EPS_DEN or vn > EPS_DEN)
    c = max(float(np.real(np.vdot(V, W))) / vn**2, 0.0)
    return float(np.linalg.norm(W - c * V) / wn)


class PagdSolver:
    """Inner-solver adapter running the dual descent for each subproblem."""

    def __init__(self, options: PagdOptions | None = None):
        self.options = options or PagdOptions()

    def solve(self, scenario, basis, cm_state, coeffs=None,
              init_delta=None, record_trace=False) -> PagdReport:
        opts = dataclasses.replace(
            self.options,
            init_delta=init_delta if init_delta is not None else self.options.init_delta,
            record_trace=record_trace or self.options.record_trace,
        )
        return solve_subproblem(scenario, basis, cm_state, opts)
