"""Baseline inner solvers for the surrogate subproblem.

Two primal ascent methods used for benchmark comparison against the dual
descent solver:

* subgradient ascent (SA): at each iterate the worst user of every group is
  selected and the ascent direction is the weighted sum of those users'
  surrogate gradients, with a diminishing step ``a / (b + j)``;
* log-sum-exp smoothing (LSE): the group minimum is replaced by the smooth
  underestimate ``-mu log sum_k exp(-h_gk / mu)`` and plain gradient ascent
  runs on the smoothed objective.

Both start from the incumbent beamformer and return the best iterate seen,
measured by the true (non-smooth) surrogate objective, so the outer loop
never regresses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EPS_DEN, Beamformer, Scenario
from .cm import CmState, mrt_init_coeffs, surrogate_from_products
from .structures import StructureBasis, expand

__all__ = [
    "BaselineOptions",
    "BaselineReport",
    "SaSolver",
    "LseSolver",
    "lse_group_values",
    "solve_subproblem_sa",
    "solve_subproblem_lse",
]


@dataclass(frozen=True)
class BaselineOptions:
    kind: str = "sa"
    a: float | None = None      # None: scaled so the first step moves ~10% of ||c||
    b: float = 10.0
    mu: float = 0.1
    max_iters: int = 500
    eps: float = 1e-4
    stall_iters: int = 25

    def __post_init__(self):
        if self.kind not in ("sa", "lse"):
            raise ValueError("kind must be 'sa' or 'lse'")
        if self.a is not None and not self.a > 0:
            raise ValueError("step constant a must be positive")
        if self.b < 0 or not self.mu > 0:
            raise ValueError("require b >= 0 and mu > 0")


@dataclass(frozen=True)
class BaselineReport:
    coeffs: tuple[np.ndarray, ...]
    beamformer: Beamformer
    value: float
    iterations: int
    converged: bool


def lse_group_values(scenario: Scenario, h: np.ndarray, mu: float):
    """Stable per-group smoothed minima and their softmin weights.

    Returns ``(lse, weights)`` where ``min_k h_gk - mu ln K_g <= lse_g <=
    min_k h_gk`` and ``weights`` sums to one within each group.
    """
    starts, ends = scenario.group_starts, scenario.group_ends
    sizes = ends - starts
    gmin = np.minimum.reduceat(h, starts)
    z = np.exp(-(h - np.repeat(gmin, sizes)) / mu)
    zsum = np.add.reduceat(z, starts)
    lse = gmin - mu * np.log(zsum)
    return lse, z / np.repeat(zsum, sizes)


def _products_power(scenario, basis, coeffs):
    U = np.column_stack([basis.eff_channels[i].conj().T @ coeffs[i]
                         for i in range(scenario.G)])
    power = sum(float(np.real(np.vdot(c, Q @ c)))
                for Q, c in zip(basis.power_grams, coeffs))
    return U, power


def _surrogate_gradient(scenario, basis, cm_state, coeffs, U, omega):
    """Gradient of ``sum_u omega_u h_u`` with respect to each group's
    coefficients, for arbitrary nonnegative per-user weights ``omega``."""
    starts, ends = scenario.group_starts, scenario.group_ends
    curve_w = omega * np.abs(cm_state.eta) ** 2
    noise_mass = float(np.dot(curve_w, scenario.noise_power / scenario.P_t))
    lead_w = omega * cm_state.eta * np.sqrt(1.0 + cm_state.xi)
    grads = []
    for i in range(scenario.G):
        F = basis.eff_channels[i]
        lead = F[:, starts[i]:ends[i]] @ lead_w[starts[i]:ends[i]]
        curv = (F * curve_w[None, :]) @ U[:, i] + noise_mass * (basis.power_grams[i] @ coeffs[i])
        grads.append(2.0 * (lead - curv))
    return grads


def _true_value(scenario, h):
    return float(np.dot(scenario.weights,
                        np.minimum.reduceat(h, scenario.group_starts)))


def _ascend(scenario, basis, cm_state, coeffs, opts, weight_fn):
    """Shared diminishing-step ascent loop with best-iterate bookkeeping."""
    coeffs = tuple(np.asarray(c, dtype=np.complex128).ravel() for c in coeffs)
    U, power = _products_power(scenario, basis, coeffs)
    h = surrogate_from_products(scenario, U, power, cm_state.xi, cm_state.eta)
    value = _true_value(scenario, h)
    best_value, best_coeffs = value, coeffs

    a = opts.a
    stall = 0
    iterations = 0
    converged = False
    for j in range(opts.max_iters):
        iterations = j + 1
        omega = weight_fn(h)
        grads = _surrogate_gradient(scenario, basis, cm_state, coeffs, U, omega)
        gnorm = np.sqrt(sum(float(np.sum(np.abs(g) ** 2)) for g in grads))
        if gnorm <= EPS_DEN:
            converged = True
            break
        if a is None:
            # Normalized-direction steps: the first move spans ~20% of the
            # starting coefficient norm, the tail decays like 1/j.
            cnorm = np.sqrt(sum(float(np.sum(np.abs(c) ** 2)) for c in coeffs))
            a = 2.0 * max(cnorm, 1.0)
        step = a / ((opts.b + j) * gnorm)
        coeffs = tuple(c + step * g for c, g in zip(coeffs, grads))
        U, power = _products_power(scenario, basis, coeffs)
        h = surrogate_from_products(scenario, U, power, cm_state.xi, cm_state.eta)
        prev = value
        value = _true_value(scenario, h)
        if value > best_value:
            best_value, best_coeffs = value, coeffs
        # Subgradient iterates oscillate; stop once progress stays negligible.
        if abs(value - prev) < opts.eps * max(abs(best_value), 1.0):
            stall += 1
            if stall >= opts.stall_iters:
                converged = True
                break
        else:
            stall = 0
    return BaselineReport(
        coeffs=best_coeffs,
        beamformer=expand(basis, best_coeffs),
        value=best_value,
        iterations=iterations,
        converged=converged,
    )


def solve_subproblem_sa(scenario: Scenario, basis: StructureBasis, cm_state: CmState,
                        init_coeffs=None, options: BaselineOptions | None = None) -> BaselineReport:
    """Projected subgradient ascent on the non-smooth surrogate objective.

    Each group contributes the gradient of its worst user (ties broken toward
    the lowest user index).
    """
    opts = options or BaselineOptions(kind="sa")
    coeffs = init_coeffs if init_coeffs is not None else mrt_init_coeffs(scenario, basis)
    starts = scenario.group_starts

    def worst_user_weights(h):
        omega = np.zeros(scenario.K)
        for g in range(scenario.G):
            seg = h[starts[g]:scenario.group_ends[g]]
            omega[starts[g] + int(np.argmin(seg))] = scenario.weights[g]
        return omega

    return _ascend(scenario, basis, cm_state, coeffs, opts, worst_user_weights)


def solve_subproblem_lse(scenario: Scenario, basis: StructureBasis, cm_state: CmState,
                         init_coeffs=None, options: BaselineOptions | None = None) -> BaselineReport:
    """Gradient ascent on the log-sum-exp smoothing of the group minima."""
    opts = options or BaselineOptions(kind="lse")
    coeffs = init_coeffs if init_coeffs is not None else mrt_init_coeffs(scenario, basis)

    def softmin_weights(h):
        _, s = lse_group_values(scenario, h, opts.mu)
        return np.repeat(scenario.weights, scenario.group_sizes) * s

    return _ascend(scenario, basis, cm_state, coeffs, opts, softmin_weights)


class _BaselineSolver:
    def __init__(self, options: BaselineOptions):
        self.options = options

    def solve(self, scenario, basis, cm_state, coeffs=None,
              init_delta=None, record_trace=False) -> BaselineReport:
        del init_delta, record_trace  # primal methods: nothing to warm-start
        return self._solve(scenario, basis, cm_state, coeffs, self.options)


class SaSolver(_BaselineSolver):
    """Inner-solver adapter for subgradient ascent."""

    _solve = staticmethod(solve_subproblem_sa)

    def __init__(self, options: BaselineOptions | None = None):
        super().__init__(options or BaselineOptions(kind="sa"))


class LseSolver(_BaselineSolver):
    """Inner-solver adapter for log-sum-exp smoothed ascent."""

    _solve = staticmethod(solve_subproblem_lse)

    def __init__(self, options: BaselineOptions | None = None):
        super().__init__(options or BaselineOptions(kind="lse"))
