"""Multi-group multicast downlink model: problem instances and physical-layer metrics.

A scenario describes a base station with ``L`` antennas serving ``G``
non-overlapping multicast groups over flat channels.  Users are indexed
group-major: the columns of the channel matrix ``H`` hold group 1's users
first, then group 2's, and so on.  All metric functions are pure and operate
on an explicit antenna-domain beamforming matrix ``W`` (``L x G``, one column
per group).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Universal denominator floor and pseudo-inverse relative tolerance.
EPS_DEN = 1e-30
PINV_RTOL = 1e-12

__all__ = [
    "EPS_DEN",
    "PINV_RTOL",
    "Scenario",
    "Beamformer",
    "generate_rayleigh_scenario",
    "sinr",
    "sinr_hat",
    "sinr_all",
    "group_rate",
    "wsr",
    "transmit_power",
    "scale_to_power",
    "range_space_residual",
    "scenario_to_dict",
    "scenario_from_dict",
    "scenario_to_json",
    "scenario_from_json",
]


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance.

    Attributes:
        L: number of transmit antennas.
        G: number of multicast groups.
        group_sizes: users per group, length ``G``.
        H: ``L x K`` complex channel matrix, columns ordered group-major.
        noise_power: per-user noise variances, length ``K``.
        P_t: total transmit power budget.
        weights: per-group utility weights, length ``G``.
    """

    L: int
    G: int
    group_sizes: tuple[int, ...]
    H: np.ndarray
    noise_power: np.ndarray
    P_t: float
    weights: np.ndarray

    # Derived, filled in __post_init__.
    K: int = field(init=False)
    group_index: np.ndarray = field(init=False)
    group_starts: np.ndarray = field(init=False)
    group_ends: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.L < 1 or self.G < 1:
            raise ValueError("L and G must be positive")
        sizes = tuple(int(k) for k in self.group_sizes)
        if len(sizes) != self.G or any(k < 1 for k in sizes):
            raise ValueError("group_sizes must hold G positive integers")
        K = sum(sizes)
        H = np.ascontiguousarray(self.H, dtype=np.complex128)
        if H.shape != (self.L, K):
            raise ValueError(f"H must be {self.L} x {K}, got {H.shape}")
        noise = np.ascontiguousarray(self.noise_power, dtype=np.float64)
        if noise.shape != (K,) or np.any(noise <= 0):
            raise ValueError("noise_power must be K strictly positive reals")
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if weights.shape != (self.G,) or np.any(weights <= 0):
            raise ValueError("weights must be G strictly positive reals")
        if not self.P_t > 0:
            raise ValueError("P_t must be positive")
        starts = np.cumsum([0] + list(sizes[:-1]))
        ends = starts + np.asarray(sizes)
        gidx = np.repeat(np.arange(self.G), sizes)
        for arr in (H, noise, weights, starts, ends, gidx):
            arr.setflags(write=False)
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "noise_power", noise)
        object.__setattr__(self, "P_t", float(self.P_t))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "group_index", gidx)
        object.__setattr__(self, "group_starts", starts)
        object.__setattr__(self, "group_ends", ends)

    def group_channels(self, g: int) -> np.ndarray:
        """Channel columns of group ``g`` (``L x K_g``)."""
        return self.H[:, self.group_starts[g]:self.group_ends[g]]


@dataclass(frozen=True)
class Beamformer:
    """Reduced coefficients together with their antenna-domain expansion.

    ``coeffs`` holds one coefficient vector per group (lengths depend on the
    active beamforming structure); ``W`` is the expanded ``L x G`` matrix.
    """

    coeffs: tuple[np.ndarray, ...]
    W: np.ndarray

    def __post_init__(self):
        W = np.ascontiguousarray(self.W, dtype=np.complex128)
        if not np.all(np.isfinite(W)):
            raise ValueError("beamformer entries must be finite")
        coeffs = tuple(np.ascontiguousarray(c, dtype=np.complex128) for c in self.coeffs)
        W.setflags(write=False)
        for c in coeffs:
            c.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "coeffs", coeffs)


def generate_rayleigh_scenario(L, G, group_sizes, snr_db, seed) -> Scenario:
    """Draw an i.i.d. Rayleigh-fading instance.

    Channel entries are circularly-symmetric complex Gaussian with unit
    variance, all noise powers are one, all group weights are one, and the
    power budget is set so the transmit SNR equals ``snr_db``:
    ``P_t = 10^(snr_db / 10)``.  Channels come from a counter-based generator,
    so a fixed seed reproduces the instance bit-for-bit.
    """
    sizes = tuple(int(k) for k in group_sizes)
    K = sum(sizes)
    rng = np.random.Generator(np.random.Philox(seed))
    H = (rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))) / np.sqrt(2.0)
    return Scenario(
        L=L,
        G=G,
        group_sizes=sizes,
        H=H,
        noise_power=np.ones(K),
        P_t=10.0 ** (snr_db / 10.0),
        weights=np.ones(G),
    )


def _received_products(scenario: Scenario, W: np.ndarray) -> np.ndarray:
    """``K x G`` matrix of inner products ``h_u^H w_i``."""
    W = np.asarray(W, dtype=np.complex128)
    if W.shape != (scenario.L, scenario.G):
        raise ValueError(f"W must be {scenario.L} x {scenario.G}, got {W.shape}")
    return scenario.H.conj().T @ W


def sinr_all(scenario: Scenario, W: np.ndarray, normalized: bool = False) -> np.ndarray:
    """Per-user SINR vector, group-major.

    With ``normalized=False`` the denominator uses each user's own noise
    power; with ``normalized=True`` the noise is replaced by
    ``sigma^2 / P_t * Tr(W W^H)``, which makes the value invariant to positive
    scaling of ``W``.  A 0/0 situation (all-zero beamformer) yields 0.
    """
    U = _received_products(scenario, W)
    tot = np.sum(np.abs(U) ** 2, axis=1)
    sig = np.abs(U[np.arange(scenario.K), scenario.group_index]) ** 2
    if normalized:
        noise = scenario.noise_power * (transmit_power(W) / scenario.P_t)
    else:
        noise = scenario.noise_power
    den = tot - sig + noise
    out = np.zeros(scenario.K)
    ok = den > EPS_DEN
    out[ok] = sig[ok] / den[ok]
    return out


def sinr(scenario: Scenario, W: np.ndarray, g: int, k: int) -> float:
    """SINR of user ``k`` in group ``g`` (0-based indices)."""
    return float(sinr_all(scenario, W, normalized=False)[scenario.group_starts[g] + k])


def sinr_hat(scenario: Scenario, W: np.ndarray, g: int, k: int) -> float:
    """Power-normalized SINR of user ``k`` in group ``g``.

    Equals the plain SINR whenever ``Tr(W W^H) = P_t``; invariant under
    ``W -> c W`` for any ``c > 0``.
    """
    return float(sinr_all(scenario, W, normalized=True)[scenario.group_starts[g] + k])


def group_rate(scenario: Scenario, W: np.ndarray, g: int, normalized: bool = False) -> float:
    """Multicast rate of group ``g`` in bits: worst user's ``log2(1 + SINR)``."""
    s = sinr_all(scenario, W, normalized=normalized)
    lo, hi = scenario.group_starts[g], scenario.group_ends[g]
    return float(np.min(np.log2(1.0 + s[lo:hi])))


def wsr(scenario: Scenario, W: np.ndarray, normalized: bool = False) -> float:
    """Weighted sum rate in bits."""
    s = sinr_all(scenario, W, normalized=normalized)
    rates = np.minimum.reduceat(np.log2(1.0 + s), scenario.group_starts)
    return float(np.dot(scenario.weights, rates))


def transmit_power(W) -> float:
    """Total transmit power ``Tr(W W^H)``; accepts a matrix or a Beamformer."""
    if isinstance(W, Beamformer):
        W = W.W
    return float(np.sum(np.abs(W) ** 2))


def scale_to_power(W, P_t: float):
    """Rescale to total power exactly ``P_t``.

    Accepts either a plain matrix (returns a matrix) or a :class:`Beamformer`
    (returns a Beamformer with both coefficients and expansion rescaled).
    Raises on an all-zero input, which admits no valid scaling.
    """
    p = transmit_power(W)
    if p <= EPS_DEN:
        raise ValueError("cannot scale a zero-power beamformer")
    s = np.sqrt(P_t / p)
    if isinstance(W, Beamformer):
        return Beamformer(coeffs=tuple(s * c for c in W.coeffs), W=s * W.W)
    return s * np.asarray(W, dtype=np.complex128)


def range_space_residual(scenario: Scenario, W: np.ndarray) -> float:
    """Relative distance of ``W``'s columns from the channel column space.

    Returns ``||W - P W||_F / max(||W||_F, eps)`` where ``P`` projects onto
    ``col(H)``; zero exactly when every column of ``W`` is a linear
    combination of user channels.
    """
    W = np.asarray(W, dtype=np.complex128)
    u, s, _ = np.linalg.svd(scenario.H, full_matrices=False)
    rank = int(np.sum(s > PINV_RTOL * s[0])) if s.size else 0
    u = u[:, :rank]
    resid = W - u @ (u.conj().T @ W)
    return float(np.linalg.norm(resid) / max(np.linalg.norm(W), EPS_DEN))


def _complex_to_pairs(M: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _pairs_to_complex(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def scenario_to_dict(scenario: Scenario) -> dict:
    """JSON-ready dict; complex entries become ``[re, im]`` pairs, row-major."""
    return {
        "L": scenario.L,
        "G": scenario.G,
        "group_sizes": list(scenario.group_sizes),
        "H": _complex_to_pairs(scenario.H),
        "noise_power": scenario.noise_power.tolist(),
        "P_t": scenario.P_t,
        "weights": scenario.weights.tolist(),
    }


def scenario_from_dict(d: dict) -> Scenario:
    return Scenario(
        L=int(d["L"]),
        G=int(d["G"]),
        group_sizes=tuple(int(k) for k in d["group_sizes"]),
        H=_pairs_to_complex(d["H"]),
        noise_power=np.asarray(d["noise_power"], dtype=np.float64),
        P_t=float(d["P_t"]),
        weights=np.asarray(d["weights"], dtype=np.float64),
    )


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario))


def scenario_from_json(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))
