"""Low-dimensional beamforming structures.

Each structure restricts group ``g``'s beamformer to ``w_g = T_g c_g`` for a
fixed basis matrix ``T_g`` and a reduced coefficient vector ``c_g``.  The
supported bases:

* ``FULL``  — ``T_g = I_L``: the unrestricted antenna-domain search.
* ``RS``    — ``T_g = H``: the column space of the complete channel matrix,
  which provably contains every optimal solution, with dimension ``K``
  independent of the antenna count.
* ``MRT``   — ``T_g = H_g``: linear combinations of the group's own channels
  (asymptotically optimal at low SNR).
* ``ZF``    — columns of ``H (H^H H)^{-1}`` belonging to group ``g``: each
  basis vector is orthogonal to every other user channel, including those of
  the same group.
* ``RZF``   — columns of ``H ((1/P_t) I_K + H^H H)^{-1}`` belonging to group
  ``g``: the regularized variant of ZF.
* ``MZF``   — projection of ``H_g`` onto the orthogonal complement of the
  other groups' channels ``H_{-g}``: nulls inter-group interference exactly
  while keeping intra-group flexibility (high-SNR asymptote).
* ``MRZF``  — ``((1/P_t) I_L + H_{-g} H_{-g}^H)^{-1} H_g``: the regularized
  multicast variant, approaching MZF as ``P_t`` grows.

Besides the bases themselves, a :class:`StructureBasis` carries the reduced
problem data reused on every solver iteration: effective channels
``F_i = T_i^H H`` and power Gram matrices ``Q_g = T_g^H T_g`` (so that
``Tr(W W^H) = sum_g c_g^H Q_g c_g``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import EPS_DEN, PINV_RTOL, Beamformer, Scenario

__all__ = [
    "StructureKind",
    "StructureBasis",
    "StructureInfeasibleError",
    "build_basis",
    "expand",
    "reduced_power",
]


class StructureInfeasibleError(ValueError):
    """The requested structure does not exist for the given dimensions."""


class StructureKind(enum.Enum):
    FULL = "full"
    RS = "rs"
    MRT = "mrt"
    ZF = "zf"
    RZF = "rzf"
    MZF = "mzf"
    MRZF = "mrzf"

    @classmethod
    def parse(cls, name: str) -> "StructureKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = "|".join(k.value for k in cls)
            raise ValueError(f"unknown structure {name!r}; expected one of {valid}") from None


@dataclass(frozen=True)
class StructureBasis:
    """Per-group basis matrices plus precomputed reduced problem data.

    Attributes:
        kind: which structure the bases realize.
        bases: ``G`` matrices ``T_g`` of shape ``L x m_g``.
        dims: reduced dimension ``m_g`` per group.
        eff_channels: ``G`` matrices ``F_i = T_i^H H`` (``m_i x K``); column
            ``u`` of ``F_i`` is the effective channel of user ``u`` seen
            through group ``i``'s basis.
        power_grams: ``G`` Hermitian PSD matrices ``Q_g = T_g^H T_g``.
        shared: True when all groups use one common basis matrix (FULL, RS),
            letting solvers factor a single system per iteration.
    """

    kind: StructureKind
    bases: tuple[np.ndarray, ...]
    dims: tuple[int, ...]
    eff_channels: tuple[np.ndarray, ...]
    power_grams: tuple[np.ndarray, ...]
    shared: bool

    def own_eff_channels(self, scenario: Scenario, g: int) -> np.ndarray:
        """Effective channels of group ``g``'s own users, ``m_g x K_g``."""
        return self.eff_channels[g][:, scenario.group_starts[g]:scenario.group_ends[g]]


def _chol_solve_spd(M: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    """Solve the Hermitian positive-definite system ``M X = B``.

    Retries once with a relative ridge when the factorization fails; random
    continuous channels are full rank almost surely, so the ridge only guards
    degenerate fixtures.
    """
    try:
        c = cho_factor(M, lower=True, check_finite=False)
        return cho_solve(c, B, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    ridge = PINV_RTOL * max(np.real(np.trace(M)) / M.shape[0], EPS_DEN)
    try:
        c = cho_factor(M + ridge * np.eye(M.shape[0]), lower=True, check_finite=False)
        return cho_solve(c, B, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular system while building {what}") from exc


def _orthonormal_range(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``col(M)`` with singular values below
    ``PINV_RTOL * smax`` treated as zero."""
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=np.complex128)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > PINV_RTOL * s[0])) if s.size and s[0] > 0 else 0
    return u[:, :rank]


def _complement_channels(scenario: Scenario, g: int) -> np.ndarray:
    """Channels of all users outside group ``g`` (``L x (K - K_g)``)."""
    lo, hi = scenario.group_starts[g], scenario.group_ends[g]
    return np.concatenate([scenario.H[:, :lo], scenario.H[:, hi:]], axis=1)


def build_basis(scenario: Scenario, kind: StructureKind) -> StructureBasis:
    """Construct the per-group bases and reduced problem data for ``kind``.

    Raises:
        StructureInfeasibleError: MZF with ``L <= K - min_g K_g`` (no null
            space to project into) or ZF with ``L < K`` (Gram matrix is
            structurally rank deficient).
    """
    H = scenario.H
    L, K, G = scenario.L, scenario.K, scenario.G
    kind = StructureKind(kind)

    if kind is StructureKind.FULL:
        T = np.eye(L, dtype=np.complex128)
        bases = tuple(T for _ in range(G))
        shared = True
    elif kind is StructureKind.RS:
        bases = tuple(H for _ in range(G))
        shared = True
    elif kind is StructureKind.MRT:
        bases = tuple(scenario.group_channels(g) for g in range(G))
        shared = False
    elif kind in (StructureKind.ZF, StructureKind.RZF):
        if kind is StructureKind.ZF and L < K:
            raise StructureInfeasibleError(
                f"ZF needs L >= K for an invertible Gram matrix (L={L}, K={K})")
        gram = H.conj().T @ H
        if kind is StructureKind.RZF:
            gram = gram + (1.0 / scenario.P_t) * np.eye(K)
        T_all = _chol_solve_spd(gram, H.conj().T, kind.value).conj().T
        bases = tuple(
            np.ascontiguousarray(T_all[:, scenario.group_starts[g]:scenario.group_ends[g]])
            for g in range(G))
        shared = False
    elif kind is StructureKind.MZF:
        min_kg = min(scenario.group_sizes)
        if L <= K - min_kg:
            raise StructureInfeasibleError(
                f"MZF needs L > K - min_g K_g for a nontrivial null space "
                f"(L={L}, K={K}, min K_g={min_kg})")
        bases = []
        for g in range(G):
            Hg = scenario.group_channels(g)
            u = _orthonormal_range(_complement_channels(scenario, g))
            bases.append(Hg - u @ (u.conj().T @ Hg))
        bases = tuple(bases)
        shared = False
    elif kind is StructureKind.MRZF:
        bases = []
        for g in range(G):
            Hc = _complement_channels(scenario, g)
            M = Hc @ Hc.conj().T + (1.0 / scenario.P_t) * np.eye(L)
            bases.append(_chol_solve_spd(M, scenario.group_channels(g), kind.value))
        bases = tuple(bases)
        shared = False
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unhandled structure {kind}")

    if shared:
        F = bases[0].conj().T @ H
        Q = bases[0].conj().T @ bases[0]
        eff = tuple(F for _ in range(G))
        grams = tuple(Q for _ in range(G))
    else:
        eff = tuple(T.conj().T @ H for T in bases)
        grams = tuple(T.conj().T @ T for T in bases)
    dims = tuple(T.shape[1] for T in bases)
    return StructureBasis(kind=kind, bases=bases, dims=dims, eff_channels=eff,
                          power_grams=grams, shared=shared)


def expand(basis: StructureBasis, coeffs) -> Beamformer:
    """Expand reduced coefficients into the antenna domain: ``w_g = T_g c_g``."""
    cols = []
    coeffs = tuple(np.asarray(c, dtype=np.complex128).ravel() for c in coeffs)
    for g, (T, c) in enumerate(zip(basis.bases, coeffs)):
        if c.shape != (T.shape[1],):
            raise ValueError(f"group {g}: expected {T.shape[1]} coefficients, got {c.shape}")
        cols.append(T @ c)
    return Beamformer(coeffs=coeffs, W=np.column_stack(cols))


def reduced_power(basis: StructureBasis, coeffs) -> float:
    """Transmit power evaluated in the reduced domain: ``sum_g c_g^H Q_g c_g``."""
    total = 0.0
    for Q, c in zip(basis.power_grams, coeffs):
        c = np.asarray(c, dtype=np.complex128).ravel()
        total += float(np.real(np.vdot(c, Q @ c)))
    return total
