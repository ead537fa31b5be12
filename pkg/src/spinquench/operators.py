"""Bit-encoded Zeeman product basis and matrix-free spin-pair Hamiltonians.

Basis states are integers: bit i set means spin i up, so the total
magnetic quantum number M_z = n_up - n/2 is a popcount away.  Both pair
Hamiltonians act by scalar-coefficient gathers along two-bit-flip index
maps:

  zz part      diagonal, coefficient (1/2) sum_{i<j} d_ij s_i s_j, s = +-1
  flip-flop    couples states differing in bits {i,j} with the two bits
               anti-aligned, amplitude -d_ij/2  (part of H_dd)
  flip-flip    same index map, bits aligned, amplitude -d_ij/2  (H_0,
               raises or lowers M_z by exactly 2)

The mixed generator of the quench protocol is H(p) = (1-p) H_0 + p H_dd.
In this basis every H(p) is real symmetric, and it never mixes the two
popcount-parity sectors, which the dense evolution path exploits.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import CapacityError, UndefinedSpectrumError
from .network import CouplingNetwork

MAX_SPINS = 24

_WORKSPACES: "weakref.WeakKeyDictionary[CouplingNetwork, _Workspace]" = weakref.WeakKeyDictionary()

#: precompute per-pair alignment tables only up to this many table entries
_DIFFER_TABLE_BUDGET = 2**24


@dataclass(frozen=True, eq=False)
class SpinBasis:
    """Zeeman product basis with M_z bookkeeping.

    mz_of[s] is the magnetic quantum number of basis state s; sector_index
    groups states by n_up (equivalently by M_z = n_up - n/2).
    """

    n_spins: int
    dimension: int
    states: np.ndarray
    n_up: np.ndarray
    mz_of: np.ndarray
    parity: np.ndarray
    sector_index: tuple

    def sector(self, n_up: int) -> np.ndarray:
        return self.sector_index[n_up]

    def parity_indices(self):
        even = self.states[self.parity == 0]
        odd = self.states[self.parity == 1]
        return even, odd


def build_basis(n_spins: int, max_spins: int = MAX_SPINS) -> SpinBasis:
    """Enumerate the 2^n product basis with sector bookkeeping.

    The cap exists because every array here is dimension-long; past ~20
    spins the bookkeeping alone dominates memory.
    """
    if not 1 <= n_spins <= max_spins:
        raise CapacityError(f"n_spins must be in [1, {max_spins}], got {n_spins}")
    dim = 1 << n_spins
    states = np.arange(dim, dtype=np.intp)
    n_up = np.bitwise_count(states).astype(np.uint8)
    mz = n_up.astype(np.float64) - 0.5 * n_spins
    parity = (n_up & 1).astype(np.uint8)
    sectors = []
    for k in range(n_spins + 1):
        idx = states[n_up == k]
        assert idx.size == comb(n_spins, k)
        idx.flags.writeable = False
        sectors.append(idx)
    for a in (states, n_up, mz, parity):
        a.flags.writeable = False
    return SpinBasis(n_spins, dim, states, n_up, mz, parity, tuple(sectors))


@dataclass(eq=False)
class StateVector:
    """Complex amplitudes over a SpinBasis."""

    basis: SpinBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != (self.basis.dimension,):
            raise ValueError(f"amplitudes must have shape ({self.basis.dimension},), got {amp.shape}")
        if not np.all(np.isfinite(amp.view(np.float64))):
            raise ValueError("non-finite amplitudes")
        self.amplitudes = amp

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes.copy())

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def basis_state(basis: SpinBasis, index: int) -> StateVector:
    amp = np.zeros(basis.dimension, dtype=np.complex128)
    amp[index] = 1.0
    return StateVector(basis, amp)


def gaussian_state(basis: SpinBasis, seed) -> StateVector:
    """Unnormalized complex Gaussian vector with E[v v†] = identity.

    The identity-covariance convention makes <v|M|v> an unbiased
    estimator of Tr M, which the typicality spectra rely on.
    """
    rng = np.random.default_rng(seed)
    amp = (rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)) / np.sqrt(2.0)
    return StateVector(basis, amp)


def _assert_hermitian(m: np.ndarray, tol: float):
    scale = max(1.0, float(np.abs(m).max())) if m.size else 1.0
    stripe = 256
    worst = 0.0
    for lo in range(0, m.shape[0], stripe):
        hi = min(lo + stripe, m.shape[0])
        worst = max(worst, float(np.abs(m[lo:hi, :] - m[:, lo:hi].conj().T).max()))
    if worst > tol * scale:
        raise ValueError(f"matrix not Hermitian: max deviation {worst:.3e} (scale {scale:.3e})")


@dataclass(eq=False)
class DensityMatrix:
    """Dense density operator over a SpinBasis.

    Hermiticity is enforced at construction; trace is whatever the
    constructor produced (0 for the Iz-derived initial state).
    """

    basis: SpinBasis
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.complex128)
        dim = self.basis.dimension
        if m.shape != (dim, dim):
            raise ValueError(f"entries must have shape ({dim}, {dim}), got {m.shape}")
        _assert_hermitian(m, 1e-12)
        self.entries = m

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    @property
    def purity(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))

    @classmethod
    def from_iz(cls, basis: SpinBasis) -> "DensityMatrix":
        """Initial state proportional to Iz: diagonal M_z, traceless."""
        return cls(basis, np.diag(basis.mz_of.astype(np.complex128)))


class _Workspace:
    """Per-network scratch: pair index maps and diagonal, built once."""

    __slots__ = ("basis", "pair_masks", "pair_amp", "diag", "bit_rows", "pair_bits", "differ")

    def __init__(self, network: CouplingNetwork):
        basis = build_basis(network.n_spins)
        self.basis = basis
        dim = basis.dimension
        states = basis.states
        bit_rows = np.empty((network.n_spins, dim), dtype=np.uint8)
        for i in range(network.n_spins):
            bit_rows[i] = (states >> i) & 1
        pairs = list(network.pairs())
        self.pair_masks = [(1 << i) | (1 << j) for i, j, _ in pairs]
        self.pair_amp = np.array([-0.5 * d for _, _, d in pairs])
        self.pair_bits = [(i, j) for i, j, _ in pairs]
        diag = np.zeros(dim)
        for i, j, d in pairs:
            si = 2.0 * bit_rows[i] - 1.0
            sj = 2.0 * bit_rows[j] - 1.0
            diag += (0.5 * d) * si * sj
        self.diag = diag
        self.bit_rows = bit_rows
        if len(pairs) * dim <= _DIFFER_TABLE_BUDGET:
            self.differ = [bit_rows[i] ^ bit_rows[j] for i, j, _ in pairs]
        else:
            self.differ = None

    def differ_row(self, k: int) -> np.ndarray:
        if self.differ is not None:
            return self.differ[k]
        i, j = self.pair_bits[k]
        return self.bit_rows[i] ^ self.bit_rows[j]


def workspace_for(network: CouplingNetwork) -> _Workspace:
    ws = _WORKSPACES.get(network)
    if ws is None:
        ws = _Workspace(network)
        _WORKSPACES[network] = ws
    return ws


def basis_for(network: CouplingNetwork) -> SpinBasis:
    return workspace_for(network).basis


def _apply_mixed_array(ws: _Workspace, p: float, v: np.ndarray) -> np.ndarray:
    """out = [(1-p) H_0 + p H_dd] v for v of shape (dim,) or (dim, k)."""
    states = ws.basis.states
    diag = p * ws.diag
    out = diag[:, None] * v if v.ndim == 2 else diag * v
    for k, mask in enumerate(ws.pair_masks):
        amp = ws.pair_amp[k]
        differ = ws.differ_row(k)
        # aligned pairs feel the double-quantum term, anti-aligned the flip-flop
        coef = amp * ((1.0 - p) + (2.0 * p - 1.0) * differ)
        w = v[states ^ mask]
        out += coef[:, None] * w if v.ndim == 2 else coef * w
    return out


def _check_match(network: CouplingNetwork, v: StateVector):
    if v.basis.n_spins != network.n_spins:
        raise ValueError(f"state has {v.basis.n_spins} spins, network has {network.n_spins}")


def apply_hdd(network: CouplingNetwork, v: StateVector) -> StateVector:
    """H_dd v, the M_z-conserving zz + flip-flop pair sum."""
    _check_match(network, v)
    ws = workspace_for(network)
    return StateVector(v.basis, _apply_mixed_array(ws, 1.0, v.amplitudes))


def apply_h0(network: CouplingNetwork, v: StateVector) -> StateVector:
    """H_0 v, the double-quantum flip-flip/flop-flop pair sum."""
    _check_match(network, v)
    ws = workspace_for(network)
    return StateVector(v.basis, _apply_mixed_array(ws, 0.0, v.amplitudes))


def apply_mixed(network: CouplingNetwork, p: float, v: StateVector) -> StateVector:
    """[(1-p) H_0 + p H_dd] v."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    _check_match(network, v)
    ws = workspace_for(network)
    return StateVector(v.basis, _apply_mixed_array(ws, float(p), v.amplitudes))


def dense_hamiltonian(network: CouplingNetwork, p: float, indices: np.ndarray | None = None) -> np.ndarray:
    """Dense real-symmetric H(p), optionally restricted to a basis subset.

    The restriction is only valid for subsets closed under all pair flips
    present in the coupling network (the popcount-parity sectors are).
    """
    ws = workspace_for(network)
    dim = ws.basis.dimension
    states = ws.basis.states
    h = np.zeros((dim, dim))
    h[states, states] = p * ws.diag
    for k, mask in enumerate(ws.pair_masks):
        amp = ws.pair_amp[k]
        coef = amp * ((1.0 - p) + (2.0 * p - 1.0) * ws.differ_row(k))
        h[states ^ mask, states] += coef
    if indices is not None:
        h = h[np.ix_(indices, indices)]
    return h


def coherence_order_weights(rho: np.ndarray, basis: SpinBasis) -> np.ndarray:
    """Unnormalized squared-magnitude weight per coherence order.

    Returns an array w of length 2n+1 with w[n_spins + order]; the total
    equals Tr[rho rho†] = sum |rho_rc|^2.
    """
    n = basis.n_spins
    weights = np.zeros(2 * n + 1)
    for r_up in range(n + 1):
        ri = basis.sector_index[r_up]
        for c_up in range(n + 1):
            ci = basis.sector_index[c_up]
            block = rho[np.ix_(ri, ci)]
            weights[n + (r_up - c_up)] += float(np.sum(block.real**2 + block.imag**2))
    return weights


def coherence_order_decompose(rho: DensityMatrix, *, time: float = 0.0, p: float = 0.0):
    """Normalized coherence-order distribution A(n) of a density matrix.

    A(n) sums |rho_rc|^2 over elements whose row and column M_z differ by
    n, normalized to unit total.  The squared-magnitude convention makes
    the total proportional to Tr[rho^2], which unitary evolution
    conserves, so the distribution is well-defined at every time.
    """
    from .mqc import MqcSpectrum

    basis = rho.basis
    weights = coherence_order_weights(rho.entries, basis)
    total = weights.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise UndefinedSpectrumError("zero (or non-finite) density matrix has no coherence distribution")
    orders = np.arange(-basis.n_spins, basis.n_spins + 1)
    return MqcSpectrum(orders=orders, weights=weights / total, time=time, p=p, estimator="exact")
