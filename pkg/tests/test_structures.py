import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import subspace_angles

from mgbeam.model import Scenario, generate_rayleigh_scenario, transmit_power
from mgbeam.structures import (StructureInfeasibleError, StructureKind, build_basis,
                               expand, reduced_power)

ALL_KINDS = list(StructureKind)


def random_coeffs(rng, basis):
    return [rng.standard_normal(m) + 1j * rng.standard_normal(m) for m in basis.dims]


def test_parse_cli_names():
    for kind in ALL_KINDS:
        assert StructureKind.parse(kind.value) is kind
    assert StructureKind.parse(" ZF ") is StructureKind.ZF
    with pytest.raises(ValueError):
        StructureKind.parse("bogus")


def test_full_basis_is_identity():
    sc = generate_rayleigh_scenario(6, 2, [2, 2], 10, seed=0)
    basis = build_basis(sc, StructureKind.FULL)
    assert basis.dims == (6, 6)
    for T in basis.bases:
        assert_allclose(T, np.eye(6))
    # Effective channels reproduce the raw channels.
    for F in basis.eff_channels:
        assert_allclose(F, sc.H)


def test_rs_and_mrt_dimensions():
    sc = generate_rayleigh_scenario(16, 3, [4, 4, 4], 20, seed=1)
    rs = build_basis(sc, StructureKind.RS)
    assert rs.dims == (12, 12, 12) and rs.shared
    mrt = build_basis(sc, StructureKind.MRT)
    assert mrt.dims == (4, 4, 4)
    for g in range(3):
        assert_allclose(mrt.bases[g], sc.group_channels(g))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_power_identity_many_draws(kind):
    rng = np.random.default_rng(42)
    sc = generate_rayleigh_scenario(16, 3, [4, 4, 4], 20, seed=2)
    basis = build_basis(sc, kind)
    for _ in range(1000):
        coeffs = random_coeffs(rng, basis)
        expanded = expand(basis, coeffs)
        red = reduced_power(basis, coeffs)
        full = transmit_power(expanded.W)
        assert red == pytest.approx(full, rel=1e-10)


def test_expand_full_is_identity_map():
    rng = np.random.default_rng(3)
    sc = generate_rayleigh_scenario(5, 2, [1, 2], 0, seed=3)
    basis = build_basis(sc, StructureKind.FULL)
    coeffs = random_coeffs(rng, basis)
    bf = expand(basis, coeffs)
    assert_allclose(bf.W, np.column_stack(coeffs))


def test_expand_zero_coeffs():
    sc = generate_rayleigh_scenario(5, 2, [1, 2], 0, seed=3)
    basis = build_basis(sc, StructureKind.MRT)
    bf = expand(basis, [np.zeros(m, complex) for m in basis.dims])
    assert np.all(bf.W == 0)


def test_rs_block_diagonal_equals_mrt_expansion():
    rng = np.random.default_rng(4)
    sc = generate_rayleigh_scenario(8, 2, [2, 3], 10, seed=4)
    rs = build_basis(sc, StructureKind.RS)
    mrt = build_basis(sc, StructureKind.MRT)
    d = [rng.standard_normal(k) + 1j * rng.standard_normal(k) for k in sc.group_sizes]
    # Embed each group's MRT weights into the matching block of the RS vector.
    a = []
    for g in range(2):
        vec = np.zeros(sc.K, dtype=complex)
        vec[sc.group_starts[g]:sc.group_ends[g]] = d[g]
        a.append(vec)
    assert_allclose(expand(rs, a).W, expand(mrt, d).W, atol=1e-12)


def test_zf_orthogonalizes_every_user_on_square_channel():
    sc = generate_rayleigh_scenario(12, 3, [4, 4, 4], 20, seed=5)  # L == K
    basis = build_basis(sc, StructureKind.ZF)
    T_all = np.concatenate(basis.bases, axis=1)
    assert_allclose(sc.H.conj().T @ T_all, np.eye(12), atol=1e-8)


def test_mzf_nulls_intergroup_interference():
    rng = np.random.default_rng(6)
    for seed in range(20):
        sc = generate_rayleigh_scenario(14, 3, [2, 2, 2], 20, seed=seed)
        basis = build_basis(sc, StructureKind.MZF)
        coeffs = random_coeffs(rng, basis)
        W = expand(basis, coeffs).W
        for g in range(3):
            Hg = sc.group_channels(g)
            for i in range(3):
                if i == g:
                    continue
                leak = np.abs(Hg.conj().T @ W[:, i])
                bound = 1e-8 * np.linalg.norm(Hg, axis=0) * np.linalg.norm(W[:, i])
                assert np.all(leak <= bound)


def test_mzf_basis_null_property():
    sc = generate_rayleigh_scenario(16, 3, [4, 4, 4], 20, seed=7)
    basis = build_basis(sc, StructureKind.MZF)
    for g in range(3):
        Hg = sc.group_channels(g)
        for i in range(3):
            if i == g:
                continue
            rel = np.linalg.norm(Hg.conj().T @ basis.bases[i])
            assert rel <= 1e-10 * np.linalg.norm(Hg) * np.linalg.norm(basis.bases[i])


def test_rs_expressiveness():
    rng = np.random.default_rng(8)
    sc = generate_rayleigh_scenario(24, 3, [2, 2, 2], 20, seed=8)
    W = rng.standard_normal((24, 3)) + 1j * rng.standard_normal((24, 3))
    u, s, _ = np.linalg.svd(sc.H, full_matrices=False)
    projected = u @ (u.conj().T @ W)
    A, *_ = np.linalg.lstsq(sc.H, projected, rcond=None)
    assert np.linalg.norm(sc.H @ A - projected) <= 1e-8


def test_zf_and_mzf_bases():
    """ZF and MZF build genuinely different basis matrices (ZF vectors are
    orthogonal to every other user channel, own group included; MZF vectors
    are not), yet per group they span the same reduced subspace when L >= K.
    """
    sc = generate_rayleigh_scenario(16, 3, [4, 4, 4], 20, seed=9)
    zf = build_basis(sc, StructureKind.ZF)
    mzf = build_basis(sc, StructureKind.MZF)
    for g in range(3):
        assert np.linalg.norm(zf.bases[g] - mzf.bases[g]) > 1e-3 * np.linalg.norm(zf.bases[g])
        # In-group cross-user response: diagonal for ZF, dense for MZF.
        own_zf = sc.group_channels(g).conj().T @ zf.bases[g]
        own_mzf = sc.group_channels(g).conj().T @ mzf.bases[g]
        off_diag = own_zf - np.diag(np.diag(own_zf))
        assert np.linalg.norm(off_diag) < 1e-8 * np.linalg.norm(own_zf)
        assert np.linalg.norm(own_mzf - np.diag(np.diag(own_mzf))) > 1e-3 * np.linalg.norm(own_mzf)
        assert np.max(subspace_angles(zf.bases[g], mzf.bases[g])) < 1e-10


def test_zf_requires_enough_antennas():
    sc = generate_rayleigh_scenario(8, 3, [4, 4, 4], 20, seed=10)  # L=8 < K=12
    with pytest.raises(StructureInfeasibleError):
        build_basis(sc, StructureKind.ZF)
    # RZF stays well posed below K antennas.
    rzf = build_basis(sc, StructureKind.RZF)
    assert all(np.all(np.isfinite(T)) for T in rzf.bases)


def test_mzf_requires_null_space():
    sc = generate_rayleigh_scenario(8, 3, [4, 4, 4], 20, seed=11)  # K - min Kg = 8 >= L
    with pytest.raises(StructureInfeasibleError):
        build_basis(sc, StructureKind.MZF)


def test_zf_ridge_handles_duplicated_columns():
    sc0 = generate_rayleigh_scenario(6, 2, [2, 2], 10, seed=12)
    H = sc0.H.copy()
    H[:, 1] = H[:, 0]  # exactly repeated channel
    sc = Scenario(L=6, G=2, group_sizes=(2, 2), H=H, noise_power=np.ones(4),
                  P_t=10.0, weights=np.ones(2))
    basis = build_basis(sc, StructureKind.ZF)
    assert all(np.all(np.isfinite(T)) for T in basis.bases)


def test_single_group_mzf_reduces_to_mrt():
    sc = generate_rayleigh_scenario(8, 1, [3], 10, seed=13)
    mzf = build_basis(sc, StructureKind.MZF)
    assert_allclose(mzf.bases[0], sc.H, atol=1e-12)


def test_eff_channels_match_definition():
    sc = generate_rayleigh_scenario(9, 2, [2, 3], 10, seed=14)
    for kind in ALL_KINDS:
        basis = build_basis(sc, kind)
        for i in range(2):
            assert basis.eff_channels[i].shape == (basis.dims[i], sc.K)
            assert_allclose(basis.eff_channels[i], basis.bases[i].conj().T @ sc.H)
            assert_allclose(basis.power_grams[i],
                            basis.bases[i].conj().T @ basis.bases[i], atol=1e-12)
