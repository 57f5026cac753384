import numpy as np
import pytest
from numpy.testing import assert_allclose

from mgbeam.cm import CmState, run_cm, surrogate_values, update_eta, update_xi
from mgbeam.model import Scenario, generate_rayleigh_scenario, range_space_residual
from mgbeam.pagd import (DegenerateDualError, DualState, PagdOptions, PagdSolver,
                         beamformer_from_dual, dual_objective, kkt_certificate,
                         pagd_step, solve_subproblem)
from mgbeam.structures import StructureKind, build_basis, expand


def state_at(scenario, W, iteration=0):
    xi = update_xi(scenario, W)
    eta = update_eta(scenario, W, xi)
    return CmState(xi=xi, eta=eta, iteration=iteration, surrogate_wsr=0.0)


def random_state(scenario, seed=0):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((scenario.L, scenario.G)) \
        + 1j * rng.standard_normal((scenario.L, scenario.G))
    return state_at(scenario, W)


def wirtinger_gradient(scenario, cm_state, delta, W):
    """Explicit first-order condition of the dual-weighted surrogate in the
    antenna domain, written directly from its definition."""
    theta = delta * np.abs(cm_state.eta) ** 2
    noise_mass = float(np.sum(delta * np.abs(cm_state.eta) ** 2
                              * scenario.noise_power / scenario.P_t))
    d_acc = delta * cm_state.eta * np.sqrt(1.0 + cm_state.xi)
    grads = []
    for g in range(scenario.G):
        lo, hi = scenario.group_starts[g], scenario.group_ends[g]
        lead = 2.0 * scenario.H[:, lo:hi] @ d_acc[lo:hi]
        M = (scenario.H * theta[None, :]) @ scenario.H.conj().T \
            + noise_mass * np.eye(scenario.L)
        grads.append(lead - 2.0 * M @ W[:, g])
    return grads


class TestDualState:
    def test_uniform_initialization(self):
        sc = generate_rayleigh_scenario(4, 2, [2, 4], 10, seed=0)
        st = DualState.uniform(sc)
        assert_allclose(st.delta[:2], 0.5)
        assert_allclose(st.delta[2:], 0.25)
        assert_allclose(st.group_sums, sc.weights)


class TestBeamformerFromDual:
    def test_single_user_matched_filter_direction(self):
        sc = generate_rayleigh_scenario(8, 1, [1], 10, seed=1)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=1)
        coeffs = beamformer_from_dual(sc, basis, state, np.array([1.0]))
        w = coeffs[0]
        h = sc.H[:, 0]
        cos = abs(np.vdot(h, w)) / (np.linalg.norm(h) * np.linalg.norm(w))
        assert cos >= 1.0 - 1e-10

    def test_zero_dual_raises(self):
        sc = generate_rayleigh_scenario(4, 2, [1, 1], 10, seed=2)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=2)
        with pytest.raises(DegenerateDualError):
            beamformer_from_dual(sc, basis, state, np.zeros(2))

    def test_negative_dual_rejected(self):
        sc = generate_rayleigh_scenario(4, 2, [1, 1], 10, seed=2)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=2)
        with pytest.raises(ValueError):
            beamformer_from_dual(sc, basis, state, np.array([1.0, -0.1]))

    def test_stationarity_against_explicit_gradient(self):
        sc = generate_rayleigh_scenario(4, 2, [2, 2], 10, seed=3)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=3)
        delta = DualState.uniform(sc).delta
        coeffs = beamformer_from_dual(sc, basis, state, delta)
        W = expand(basis, coeffs).W
        for grad in wirtinger_gradient(sc, state, delta, W):
            assert np.linalg.norm(grad) <= 1e-8 * max(1.0, np.linalg.norm(W))

    def test_reduced_closed_form_matches_full_through_basis(self):
        # The range-space solution must expand to the full-dimension solution.
        sc = generate_rayleigh_scenario(16, 3, [2, 2, 2], 20, seed=4)
        state = random_state(sc, seed=4)
        delta = DualState.uniform(sc).delta
        full = build_basis(sc, StructureKind.FULL)
        rs = build_basis(sc, StructureKind.RS)
        W_full = expand(full, beamformer_from_dual(sc, full, state, delta)).W
        W_rs = expand(rs, beamformer_from_dual(sc, rs, state, delta)).W
        assert_allclose(W_rs, W_full, rtol=1e-8, atol=1e-12)


class TestDualObjective:
    def test_weak_duality_at_uniform_dual(self):
        for seed in range(10):
            sc = generate_rayleigh_scenario(8, 3, [2, 2, 2], 15, seed=seed)
            basis = build_basis(sc, StructureKind.FULL)
            state = random_state(sc, seed=seed)
            delta = DualState.uniform(sc).delta
            coeffs = beamformer_from_dual(sc, basis, state, delta)
            W = expand(basis, coeffs).W
            h = surrogate_values(sc, W, state.xi, state.eta)
            primal = float(np.dot(sc.weights,
                                  np.minimum.reduceat(h, sc.group_starts)))
            assert dual_objective(sc, basis, state, delta) >= primal - 1e-9

    def test_homogeneous_in_weights(self):
        # Fixed iteration budget: the whole dual trajectory scales linearly
        # with the weights while the beamformers stay unchanged.
        opts = PagdOptions(eps=1e-300, max_iters=60)
        sc = generate_rayleigh_scenario(8, 2, [2, 2], 15, seed=5)
        state = random_state(sc, seed=5)
        basis = build_basis(sc, StructureKind.FULL)
        rep1 = solve_subproblem(sc, basis, state, opts)
        scaled = Scenario(L=sc.L, G=sc.G, group_sizes=sc.group_sizes, H=sc.H,
                          noise_power=sc.noise_power, P_t=sc.P_t,
                          weights=3.0 * sc.weights)
        rep2 = solve_subproblem(scaled, basis, state, opts)
        assert rep1.iterations == rep2.iterations == 60
        assert rep2.dual == pytest.approx(3.0 * rep1.dual, rel=1e-9)
        assert rep2.primal == pytest.approx(3.0 * rep1.primal, rel=1e-9)
        assert_allclose(rep2.delta, 3.0 * rep1.delta, rtol=1e-9)


class TestPagdStep:
    def test_tied_group_is_fixed_point(self):
        sc = generate_rayleigh_scenario(4, 1, [3], 10, seed=6)
        delta = np.array([0.5, 0.3, 0.2])
        h = np.full(3, 1.7)
        out = pagd_step(sc, h, delta, j=0)
        assert_allclose(out.delta, delta, atol=1e-15)

    def test_hand_computed_step(self):
        # One group, two users, unit weight: delta = (1/2, 1/2), gaps (2, 0).
        # tau_1 = 0.5/3, pre-projection (1/6, 1/2), projection adds 1/6 each.
        sc = generate_rayleigh_scenario(4, 1, [2], 10, seed=7)
        out = pagd_step(sc, np.array([3.0, 1.0]), np.array([0.5, 0.5]),
                        j=0, rho_c=1.0, rho_v=0.02)
        assert_allclose(out.delta, [1.0 / 3.0, 2.0 / 3.0], rtol=1e-12)

    def test_hand_computed_projection(self):
        from mgbeam.pagd import _project_groups
        sc = generate_rayleigh_scenario(4, 1, [2], 10, seed=8)
        assert_allclose(_project_groups(sc, np.array([0.6, 0.2])), [0.7, 0.3])

    def test_projection_restores_group_sums_and_nonnegativity(self):
        rng = np.random.default_rng(9)
        sc = generate_rayleigh_scenario(6, 3, [2, 3, 1], 10, seed=9)
        delta = DualState.uniform(sc).delta
        for j in range(50):
            h = rng.standard_normal(sc.K)
            out = pagd_step(sc, h, delta, j)
            assert np.all(out.delta >= 0)
            assert_allclose(out.group_sums, sc.weights, atol=1e-12)
            delta = out.delta

    def test_pre_projection_iterate_nonnegative(self):
        rng = np.random.default_rng(10)
        sc = generate_rayleigh_scenario(6, 2, [3, 3], 10, seed=10)
        delta = DualState.uniform(sc).delta
        for j in range(50):
            h = 5.0 * rng.standard_normal(sc.K)
            gmin = np.minimum.reduceat(h, sc.group_starts)
            gap = h - np.repeat(gmin, sc.group_sizes)
            rho = 1.0 + 0.02 * j
            bar = delta - (delta / (gap + rho)) * gap
            assert np.all(bar >= 0)
            delta = pagd_step(sc, h, delta, j).delta

    def test_negative_safeguard_redistributes(self):
        from mgbeam.pagd import _project_groups
        sc = generate_rayleigh_scenario(4, 1, [3], 10, seed=11)
        # Mean-offset projection of (1.2, 0.9, 0) lands on (5/6, 8/15, -11/30);
        # the negative entry is clamped and the excess removed proportionally.
        out = _project_groups(sc, np.array([1.2, 0.9, 0.0]))
        assert np.all(out >= 0)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert out[2] == 0.0
        assert out[0] / out[1] == pytest.approx((5.0 / 6.0) / (8.0 / 15.0), rel=1e-12)

    def test_fixed_point_implies_complementary_slackness(self):
        # Near-fixed points satisfy the per-user dichotomy in product form:
        # the step algebra gives delta*gap <= 2*movement*(gap + rho).
        sc = generate_rayleigh_scenario(8, 2, [3, 3], 15, seed=12)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=12)
        rep = solve_subproblem(sc, basis, state,
                               PagdOptions(eps=1e-12, max_iters=30000))
        W = expand(basis, rep.coeffs).W
        h = surrogate_values(sc, W, state.xi, state.eta)
        out = pagd_step(sc, h, rep.delta, j=rep.iterations)
        move = np.max(np.abs(out.delta - rep.delta))
        assert move < 1e-11
        gmin = np.minimum.reduceat(h, sc.group_starts)
        gap = h - np.repeat(gmin, sc.group_sizes)
        rho = 1.0 + 0.02 * rep.iterations
        assert np.all(rep.delta * gap <= 4.0 * move * (gap + rho) + 1e-15)


class TestSolveSubproblem:
    def test_single_dual_variable_converges_immediately(self):
        sc = generate_rayleigh_scenario(8, 1, [1], 10, seed=13)
        basis = build_basis(sc, StructureKind.FULL)
        rep = solve_subproblem(sc, basis, random_state(sc, seed=13))
        assert rep.iterations == 1
        assert abs(rep.duality_gap) <= 1e-10
        assert rep.converged

    def test_certificates_on_random_instances(self):
        for seed in range(8):
            sc = generate_rayleigh_scenario(8, 3, [2, 2, 2], 15, seed=seed)
            basis = build_basis(sc, StructureKind.FULL)
            state = random_state(sc, seed=seed)
            rep = solve_subproblem(sc, basis, state)
            assert rep.duality_gap >= -1e-9
            assert rep.hyperplane_residual <= 1e-12
            assert rep.dual_feasibility_min >= 0.0
            if rep.converged:
                assert rep.rel_gap <= 1e-3
                assert rep.comp_slack_residual <= 1e-3 * abs(rep.primal)
            assert rep.stationarity_residual <= 1e-8

    def test_weak_duality_along_trace(self):
        sc = generate_rayleigh_scenario(10, 3, [2, 2, 2], 20, seed=14)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=14)
        rep = solve_subproblem(sc, basis, state, PagdOptions(record_trace=True))
        primal, dual = map(np.asarray, rep.trace)
        assert np.all(dual - primal >= -1e-9)
        # Inner-layer behavior: the gap shrinks toward zero overall.
        assert abs(dual[-1] - primal[-1]) < abs(dual[0] - primal[0])
        assert abs(rep.duality_gap) <= 1e-3 * abs(rep.primal)

    def test_respects_iteration_cap(self):
        sc = generate_rayleigh_scenario(10, 3, [3, 3, 3], 20, seed=15)
        basis = build_basis(sc, StructureKind.FULL)
        rep = solve_subproblem(sc, basis, random_state(sc, seed=15),
                               PagdOptions(max_iters=2))
        assert rep.iterations == 2
        assert rep.stop_reason == "max_iters"
        # Reported solution stays paired with the reported dual point.
        assert rep.stationarity_residual <= 1e-8

    def test_report_serializes_all_residuals(self):
        import json
        sc = generate_rayleigh_scenario(8, 2, [2, 2], 15, seed=21)
        basis = build_basis(sc, StructureKind.FULL)
        rep = solve_subproblem(sc, basis, random_state(sc, seed=21))
        doc = json.loads(json.dumps(rep.to_json_dict()))
        assert {"primal", "dual", "duality_gap", "rel_gap", "stationarity_residual",
                "hyperplane_residual", "comp_slack_residual",
                "dual_feasibility_min"} <= set(doc)

    def test_warm_start_option(self):
        sc = generate_rayleigh_scenario(8, 2, [2, 2], 15, seed=16)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=16)
        cold = solve_subproblem(sc, basis, state)
        warm = solve_subproblem(sc, basis, state,
                                PagdOptions(init_delta=cold.delta))
        assert warm.iterations <= cold.iterations
        assert warm.primal == pytest.approx(cold.primal, rel=1e-3)


class TestKktCertificate:
    def test_converged_run_certificates(self):
        sc = generate_rayleigh_scenario(16, 3, [4, 4, 4], 20, seed=17)
        basis = build_basis(sc, StructureKind.FULL)
        rep = run_cm(sc, basis, PagdSolver())
        cert = kkt_certificate(sc, basis, rep.final_state, rep.final_inner)
        assert cert.stationarity <= 1e-6
        assert cert.hyperplane <= 1e-12
        assert cert.comp_slack_rel <= 1e-3
        assert cert.dual_feasibility_min >= 0.0
        assert cert.structure_fit <= 1e-6
        assert cert.structure_fit_identity is not None
        # Full-structure optima live in the channel range space.
        assert range_space_residual(sc, rep.beamformer.W) <= 1e-6

    def test_reduced_basis_certificates(self):
        sc = generate_rayleigh_scenario(16, 3, [4, 4, 4], 20, seed=18)
        basis = build_basis(sc, StructureKind.MZF)
        rep = run_cm(sc, basis, PagdSolver())
        cert = kkt_certificate(sc, basis, rep.final_state, rep.final_inner)
        assert cert.stationarity <= 1e-6
        assert cert.structure_fit is None

    def test_flags_infeasible_dual(self):
        sc = generate_rayleigh_scenario(6, 2, [2, 2], 10, seed=19)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=19)
        rep = solve_subproblem(sc, basis, state)
        bad_delta = rep.delta.copy()
        bad_delta[0] = -0.05
        bad = DualState.from_delta(sc, bad_delta)
        import dataclasses
        doctored = dataclasses.replace(rep, dual_state=bad)
        cert = kkt_certificate(sc, basis, state, doctored)
        assert cert.dual_feasibility_min < 0

    def test_measures_hyperplane_violation(self):
        sc = generate_rayleigh_scenario(6, 2, [2, 2], 10, seed=20)
        basis = build_basis(sc, StructureKind.FULL)
        state = random_state(sc, seed=20)
        rep = solve_subproblem(sc, basis, state)
        off = rep.delta.copy()
        off[0] += 0.1
        import dataclasses
        doctored = dataclasses.replace(rep, dual_state=DualState.from_delta(sc, off))
        cert = kkt_certificate(sc, basis, state, doctored)
        assert cert.hyperplane == pytest.approx(0.1, abs=1e-12)
