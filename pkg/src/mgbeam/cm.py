"""Cyclic-maximization outer loop for weighted sum-rate beamforming.

The non-smooth WSR problem is first made power-unconstrained by folding the
budget into a normalized SINR, then minorized user by user with the concave
quadratic surrogate

    h_gk(W, xi, eta) = log(1 + xi) + 2 sqrt(1 + xi) Re{conj(eta) h_gk^H w_g}
                       - |eta|^2 (sum_i |h_gk^H w_i|^2
                                  + sigma_gk^2 / P_t * Tr(W W^H)) - xi,

which touches ``log(1 + gamma_hat_gk)`` exactly when ``xi = gamma_hat_gk`` and
``eta`` is the matched ratio below.  The outer loop alternates closed-form
updates of ``(xi, eta)`` with an inner convex solve over the beamformer, and
never accepts an inner candidate that lowers the surrogate of the incumbent,
so the true normalized WSR ascends monotonically.

All surrogate math uses natural logarithms; trajectory values are in the same
natural-log rate units as the benchmark tables this package reproduces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import EPS_DEN, Beamformer, Scenario, scale_to_power
from .structures import StructureBasis, StructureKind, expand, reduced_power

__all__ = [
    "CmState",
    "CmOptions",
    "InnerStats",
    "CmReport",
    "user_products",
    "gamma_hat_from_products",
    "surrogate_from_products",
    "wsr_natural",
    "update_xi",
    "update_eta",
    "surrogate_h",
    "surrogate_values",
    "mrt_init_coeffs",
    "run_cm",
]


@dataclass(frozen=True)
class CmState:
    """Auxiliary variables of one outer iteration (natural-log units)."""

    xi: np.ndarray
    eta: np.ndarray
    iteration: int
    surrogate_wsr: float

    def __post_init__(self):
        xi = np.ascontiguousarray(self.xi, dtype=np.float64)
        eta = np.ascontiguousarray(self.eta, dtype=np.complex128)
        if np.any(xi < 0):
            raise ValueError("xi entries must be nonnegative")
        xi.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class CmOptions:
    eps_outer: float = 1e-4
    max_outer: int = 500
    init_coeffs: tuple | None = None
    warm_start: bool = True
    trace_outer_index: int | None = None


@dataclass(frozen=True)
class InnerStats:
    iterations: int
    rel_duality_gap: float | None
    stationarity_residual: float | None
    hyperplane_residual: float | None
    comp_slack_rel: float | None
    converged: bool


@dataclass(frozen=True)
class CmReport:
    """Outcome of one CM run.

    ``wsr_trajectory`` holds the normalized WSR (natural-log units) at the
    initial point and after each outer iteration, and is nondecreasing up to
    round-off.  The final beamformer is scaled to the exact power budget.
    """

    beamformer: Beamformer
    wsr_trajectory: np.ndarray
    inner_stats: tuple[InnerStats, ...]
    converged: bool
    outer_iterations: int
    wall_time_s: float
    final_state: CmState
    final_inner: object | None = None
    inner_trace: dict | None = None

    @property
    def wsr(self) -> float:
        """Final WSR in natural-log rate units."""
        return float(self.wsr_trajectory[-1])

    @property
    def wsr_bits(self) -> float:
        return self.wsr / float(np.log(2.0))

    def to_json_dict(self) -> dict:
        d = {
            "wsr": self.wsr,
            "wsr_trajectory": [float(v) for v in self.wsr_trajectory],
            "converged": bool(self.converged),
            "outer_iterations": int(self.outer_iterations),
            "wall_time_s": float(self.wall_time_s),
            "inner_stats": [
                {
                    "iterations": s.iterations,
                    "rel_duality_gap": s.rel_duality_gap,
                    "stationarity_residual": s.stationarity_residual,
                    "hyperplane_residual": s.hyperplane_residual,
                    "comp_slack_rel": s.comp_slack_rel,
                    "converged": s.converged,
                }
                for s in self.inner_stats
            ],
        }
        if self.inner_trace is not None:
            d["inner_trace"] = self.inner_trace
        return d


# ---------------------------------------------------------------------------
# Reduced-space evaluation helpers, shared by every inner solver.
# ---------------------------------------------------------------------------

def user_products(basis: StructureBasis, coeffs) -> np.ndarray:
    """``K x G`` matrix of ``h_u^H w_i`` evaluated through effective channels."""
    cols = [basis.eff_channels[i].conj().T @ coeffs[i] for i in range(len(coeffs))]
    return np.column_stack(cols)


def gamma_hat_from_products(scenario: Scenario, U: np.ndarray, power: float) -> np.ndarray:
    """Power-normalized per-user SINR from precomputed received products."""
    tot = np.sum(np.abs(U) ** 2, axis=1)
    sig = np.abs(U[np.arange(scenario.K), scenario.group_index]) ** 2
    den = tot - sig + scenario.noise_power * (power / scenario.P_t)
    out = np.zeros(scenario.K)
    ok = den > EPS_DEN
    out[ok] = sig[ok] / den[ok]
    return out


def surrogate_from_products(scenario: Scenario, U: np.ndarray, power: float,
                            xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Per-user surrogate values ``h_gk`` from precomputed received products."""
    own = U[np.arange(scenario.K), scenario.group_index]
    tot = np.sum(np.abs(U) ** 2, axis=1)
    noise = scenario.noise_power * (power / scenario.P_t)
    return (np.log1p(xi)
            + 2.0 * np.sqrt(1.0 + xi) * np.real(np.conj(eta) * own)
            - np.abs(eta) ** 2 * (tot + noise)
            - xi)


def wsr_natural(scenario: Scenario, gamma: np.ndarray) -> float:
    """Weighted sum of worst-user rates, natural log, from per-user SINRs."""
    rates = np.minimum.reduceat(np.log1p(gamma), scenario.group_starts)
    return float(np.dot(scenario.weights, rates))


def _antenna_products(scenario: Scenario, W: np.ndarray):
    W = np.asarray(W, dtype=np.complex128)
    return scenario.H.conj().T @ W, float(np.sum(np.abs(W) ** 2))


# ---------------------------------------------------------------------------
# Auxiliary-variable updates.
# ---------------------------------------------------------------------------

def update_xi(scenario: Scenario, W: np.ndarray) -> np.ndarray:
    """Closed-form update: ``xi_gk`` equals the current normalized SINR."""
    U, power = _antenna_products(scenario, W)
    return gamma_hat_from_products(scenario, U, power)


def update_eta(scenario: Scenario, W: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Closed-form update of the matched ratio

    ``eta_gk = sqrt(1 + xi_gk) h_gk^H w_g / (sum_i |h_gk^H w_i|^2
    + sigma_gk^2 / P_t * Tr(W W^H))``; the denominator sums the received power
    of every stream, the user's own included.
    """
    U, power = _antenna_products(scenario, W)
    own = U[np.arange(scenario.K), scenario.group_index]
    tot = np.sum(np.abs(U) ** 2, axis=1)
    den = tot + scenario.noise_power * (power / scenario.P_t)
    return np.sqrt(1.0 + np.asarray(xi)) * own / np.maximum(den, EPS_DEN)


def surrogate_values(scenario: Scenario, W: np.ndarray,
                     xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Vector of per-user surrogate values at an antenna-domain beamformer."""
    U, power = _antenna_products(scenario, W)
    return surrogate_from_products(scenario, U, power, np.asarray(xi), np.asarray(eta))


def surrogate_h(scenario: Scenario, W: np.ndarray, xi_gk: float, eta_gk: complex,
                g: int, k: int) -> float:
    """Surrogate value of one user, scalar form."""
    u = int(scenario.group_starts[g] + k)
    xi = np.zeros(scenario.K)
    eta = np.zeros(scenario.K, dtype=np.complex128)
    xi[u] = xi_gk
    eta[u] = eta_gk
    return float(surrogate_values(scenario, W, xi, eta)[u])


# ---------------------------------------------------------------------------
# Outer loop.
# ---------------------------------------------------------------------------

def mrt_init_coeffs(scenario: Scenario, basis: StructureBasis) -> tuple[np.ndarray, ...]:
    """Initial coefficients: per-group least-squares fit of the MRT sum
    ``w_g = sum_k h_gk`` inside the active basis."""
    out = []
    for g in range(scenario.G):
        target = scenario.group_channels(g).sum(axis=1)
        if basis.kind is StructureKind.FULL:
            out.append(target.astype(np.complex128))
        else:
            c, *_ = np.linalg.lstsq(basis.bases[g], target, rcond=None)
            out.append(c)
    return tuple(out)


def run_cm(scenario: Scenario, basis: StructureBasis, inner_solver,
           options: CmOptions | None = None) -> CmReport:
    """Alternate auxiliary-variable updates with inner convex solves.

    ``inner_solver`` must expose ``solve(scenario, basis, cm_state, coeffs,
    init_delta=None, record_trace=False)`` returning an object with at least
    ``coeffs``; dual solvers additionally report ``delta``, ``rel_gap``,
    ``stationarity_residual`` and ``converged``.  Stops once the relative
    change of the normalized WSR falls below ``eps_outer``, then rescales the
    solution to the exact power budget.
    """
    opts = options or CmOptions()
    t0 = time.perf_counter()

    coeffs = opts.init_coeffs if opts.init_coeffs is not None else mrt_init_coeffs(scenario, basis)
    coeffs = tuple(np.asarray(c, dtype=np.complex128).ravel() for c in coeffs)
    U = user_products(basis, coeffs)
    power = reduced_power(basis, coeffs)
    gamma = gamma_hat_from_products(scenario, U, power)
    wsr_prev = wsr_natural(scenario, gamma)

    trajectory = [wsr_prev]
    stats: list[InnerStats] = []
    own_idx = (np.arange(scenario.K), scenario.group_index)
    delta_prev = None
    state = CmState(xi=gamma, eta=np.zeros(scenario.K, dtype=np.complex128),
                    iteration=0, surrogate_wsr=wsr_prev)
    final_inner = None
    inner_trace = None
    converged = False
    t = 0

    for t in range(opts.max_outer):
        xi = gamma
        tot = np.sum(np.abs(U) ** 2, axis=1)
        den = tot + scenario.noise_power * (power / scenario.P_t)
        eta = np.sqrt(1.0 + xi) * U[own_idx] / np.maximum(den, EPS_DEN)
        state = CmState(xi=xi, eta=eta, iteration=t, surrogate_wsr=wsr_prev)

        record = opts.trace_outer_index is not None and t == opts.trace_outer_index
        result = inner_solver.solve(
            scenario, basis, state, coeffs,
            init_delta=delta_prev if opts.warm_start else None,
            record_trace=record,
        )
        final_inner = result
        if record and getattr(result, "trace", None) is not None:
            inner_trace = {
                "outer_iteration": t,
                "primal": [float(v) for v in result.trace[0]],
                "dual": [float(v) for v in result.trace[1]],
            }
        delta_prev = getattr(result, "delta", None)
        if delta_prev is not None:
            delta_prev = np.asarray(delta_prev, dtype=np.float64)

        cand = tuple(np.asarray(c, dtype=np.complex128).ravel() for c in result.coeffs)
        U_cand = user_products(basis, cand)
        power_cand = reduced_power(basis, cand)
        h_cand = surrogate_from_products(scenario, U_cand, power_cand, xi, eta)
        phi_cand = float(np.dot(scenario.weights,
                                np.minimum.reduceat(h_cand, scenario.group_starts)))
        # The incumbent's surrogate equals wsr_prev by tightness; rejecting
        # worse candidates keeps the outer ascent monotone.
        if phi_cand >= wsr_prev - 1e-12:
            coeffs, U, power = cand, U_cand, power_cand

        gamma = gamma_hat_from_products(scenario, U, power)
        wsr_now = wsr_natural(scenario, gamma)
        trajectory.append(wsr_now)
        comp_abs = getattr(result, "comp_slack_residual", None)
        primal = getattr(result, "primal", None)
        stats.append(InnerStats(
            iterations=int(getattr(result, "iterations", 0)),
            rel_duality_gap=getattr(result, "rel_gap", None),
            stationarity_residual=getattr(result, "stationarity_residual", None),
            hyperplane_residual=getattr(result, "hyperplane_residual", None),
            comp_slack_rel=(comp_abs / max(abs(primal), EPS_DEN)
                            if comp_abs is not None and primal is not None else None),
            converged=bool(getattr(result, "converged", True)),
        ))
        if abs(wsr_now - wsr_prev) / max(wsr_prev, EPS_DEN) < opts.eps_outer:
            wsr_prev = wsr_now
            converged = True
            break
        wsr_prev = wsr_now

    beam = scale_to_power(expand(basis, coeffs), scenario.P_t)
    return CmReport(
        beamformer=beam,
        wsr_trajectory=np.asarray(trajectory),
        inner_stats=tuple(stats),
        converged=converged,
        outer_iterations=t + 1 if stats else 0,
        wall_time_s=time.perf_counter() - t0,
        final_state=state,
        final_inner=final_inner,
        inner_trace=inner_trace,
    )
