"""Qubit-chain states and the linear-algebra primitives everything else uses.

Sites are numbered 1..N. Site ``l`` is bit ``l - 1`` of the computational
basis index (little-endian), so the basis state ``|b_1 b_2 ... b_N>`` sits at
index ``sum_l b_l * 2**(l - 1)``.

Internally a state vector is viewed as a rank-N tensor whose axis ``l - 1``
belongs to site ``l``; :func:`as_tensor` and :func:`from_tensor` convert.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-12
HERM_TOL = 1e-12
PSD_TOL = 1e-10

PURE_FAMILIES = ("ghz", "product", "dicke", "w", "cluster", "rvb", "random")
MIXED_FAMILIES = ("ghz-mixture", "maximally-mixed")


class StateError(ValueError):
    """Invalid state construction or incompatible operands."""


class InfeasibleSize(ValueError):
    """System size beyond the dense-mode limit of an operation."""


def as_tensor(amps: np.ndarray, n: int) -> np.ndarray:
    """View a length-2**n vector as a tensor with axis ``l-1`` for site ``l``."""
    return np.asarray(amps).reshape((2,) * n).transpose(tuple(range(n - 1, -1, -1)))


def from_tensor(t: np.ndarray) -> np.ndarray:
    n = t.ndim
    return np.ascontiguousarray(t.transpose(tuple(range(n - 1, -1, -1)))).reshape(-1)


def _check_sites(sites: Iterable[int], n: int) -> tuple[int, ...]:
    members = tuple(int(s) for s in sites)
    if len(set(members)) != len(members):
        raise StateError(f"repeated site in {members}")
    for s in members:
        if not 1 <= s <= n:
            raise StateError(f"site {s} outside 1..{n}")
    return members


@dataclass(frozen=True)
class SiteSubset:
    """Ordered set of distinct site indices drawn from 1..n."""

    members: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(_check_sites(self.members, self.n))))

    @classmethod
    def of(cls, sites: Iterable[int], n: int) -> "SiteSubset":
        return cls(tuple(sites), n)

    def complement(self) -> "SiteSubset":
        return SiteSubset(tuple(s for s in range(1, self.n + 1) if s not in self.members), self.n)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, site):
        return site in self.members


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector over the 2**n computational basis."""

    n_sites: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.n_sites < 1 or amps.size != 2 ** self.n_sites:
            raise StateError(f"{amps.size} amplitudes do not describe {self.n_sites} qubits")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state not normalized (|psi|^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, n: int | None = None) -> "PureState":
        """Normalize ``vec`` and wrap it; ``n`` is inferred from the length."""
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        if n is None:
            n = int(round(np.log2(vec.size)))
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise StateError("zero vector cannot be normalized")
        return cls(n, vec / norm)

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    def tensor(self) -> np.ndarray:
        return as_tensor(self.amplitudes, self.n_sites)

    def density(self) -> "MixedState":
        return MixedState(self.n_sites, np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.overlap(other)) ** 2


@dataclass(frozen=True, eq=False)
class MixedState:
    """Hermitian, positive semidefinite, unit-trace density matrix."""

    n_sites: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = 2 ** self.n_sites
        if m.shape != (d, d):
            raise StateError(f"matrix shape {m.shape} does not match {self.n_sites} qubits")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERM_TOL:
            raise StateError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise StateError(f"density matrix trace {tr!r} != 1")
        m = 0.5 * (m + m.conj().T)
        if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
            raise StateError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    def density(self) -> "MixedState":
        return self


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, PureState):
        return np.outer(state.amplitudes, state.amplitudes.conj())
    return state.matrix


def reduced_density(state: PureState | MixedState, keep) -> MixedState:
    """Partial trace onto the sites in ``keep``.

    The result lives on ``len(keep)`` qubits; kept site ``keep[j]`` (sorted)
    becomes site ``j + 1`` of the reduced state.
    """
    n = state.n_sites
    if not isinstance(keep, SiteSubset):
        keep = SiteSubset.of(keep, n)
    k = len(keep)
    if k == 0:
        raise StateError("cannot reduce onto an empty subset")
    if k == n:
        raise StateError("reduced_density needs a proper subset; nothing to trace out")
    axes = [s - 1 for s in keep.members]
    rest = [a for a in range(n) if a not in axes]
    if isinstance(state, PureState):
        t = state.tensor().transpose(axes + rest).reshape(2 ** k, -1, order="F")
        # column-major reshape keeps site order little-endian in the row index
        rho = t @ t.conj().T
    else:
        t = state.matrix.reshape((2,) * (2 * n))
        # row axes n-1..0 correspond to sites 1..n (C-order reshape is big-endian)
        row = [n - 1 - a for a in axes]
        col = [2 * n - 1 - a for a in axes]
        row_rest = [n - 1 - a for a in rest]
        col_rest = [2 * n - 1 - a for a in rest]
        t = t.transpose(row[::-1] + row_rest + col[::-1] + col_rest)
        dk, dr = 2 ** k, 2 ** (n - k)
        t = t.reshape(dk, dr, dk, dr)
        rho = np.einsum("ijkj->ik", t)
    return MixedState(k, 0.5 * (rho + rho.conj().T))


def bipartition_matrix(psi: PureState, part) -> np.ndarray:
    """Amplitudes as a ``2**|part| x 2**(N-|part|)`` matrix.

    Row index is the little-endian index over ``part``; column index the same
    over the complement. Singular values are the Schmidt coefficients.
    """
    n = psi.n_sites
    members = part.members if isinstance(part, SiteSubset) else _check_sites(sorted(part), n)
    axes = [s - 1 for s in members]
    rest = [a for a in range(n) if a not in axes]
    return psi.tensor().transpose(axes + rest).reshape(2 ** len(axes), -1, order="F")


def from_bipartition(mat: np.ndarray, part, n: int) -> np.ndarray:
    """Inverse of :func:`bipartition_matrix`: flat amplitudes from the matrix."""
    members = part.members if isinstance(part, SiteSubset) else _check_sites(sorted(part), n)
    axes = [s - 1 for s in members]
    rest = [a for a in range(n) if a not in axes]
    t = np.asarray(mat).reshape((2,) * n, order="F")
    inv = np.argsort(axes + rest)
    return from_tensor(t.transpose(inv))


def entropy_bits(probs) -> float:
    """Shannon entropy in bits; entries below 1e-15 contribute nothing."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 1e-15]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def mix(states: Sequence[tuple[float, PureState]]) -> MixedState:
    """Convex combination of pure-state projectors."""
    if not states:
        raise StateError("mix needs at least one component")
    weights = np.array([w for w, _ in states], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORM_TOL:
        raise StateError(f"weights must be nonnegative and sum to 1, got {weights.tolist()}")
    n = states[0][1].n_sites
    if any(s.n_sites != n for _, s in states):
        raise StateError("mixed components have different site counts")
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for w, s in states:
        rho += w * np.outer(s.amplitudes, s.amplitudes.conj())
    return MixedState(n, rho)


def tensor_product(*states: PureState) -> PureState:
    """``states[0]`` on the first sites, ``states[1]`` on the next, and so on."""
    amps = np.ones(1, dtype=complex)
    n = 0
    for s in states:
        # later factors occupy higher bits
        amps = np.kron(s.amplitudes, amps)
        n += s.n_sites
    return PureState(n, amps)


def basis_state(bits: Sequence[int] | str) -> PureState:
    """Computational basis state; ``bits[0]`` is site 1."""
    bits = [int(b) for b in bits]
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[sum(b << i for i, b in enumerate(bits))] = 1.0
    return PureState(len(bits), amps)


def bloch_ket(v) -> np.ndarray:
    """Single-qubit ket whose Bloch vector points along ``v`` (normalized)."""
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v)
    if r == 0:
        raise StateError("Bloch vector must be nonzero")
    x, y, z = v / r
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def _ghz(n):
    amps = np.zeros(2 ** n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return amps


def _dicke(n, k):
    idx = np.arange(2 ** n)
    weights = np.array([bin(i).count("1") for i in idx])
    amps = (weights == k).astype(complex)
    return amps / np.sqrt(amps.sum().real)


def _product(n, blochs):
    if blochs is None:
        blochs = [(0.0, 0.0, 1.0)] * n
    blochs = np.asarray(blochs, dtype=float)
    if blochs.shape != (n, 3):
        raise StateError(f"product state needs {n} Bloch vectors, got shape {blochs.shape}")
    amps = np.ones(1, dtype=complex)
    for v in blochs:
        amps = np.kron(bloch_ket(v), amps)
    return amps


def ring_edges(n: int) -> list[tuple[int, int]]:
    """Nearest-neighbour edges of the periodic ring on sites 1..n."""
    edges = [(l, l + 1) for l in range(1, n)]
    if n > 2:
        edges.append((n, 1))
    return edges


def _cluster(n, edges=None):
    idx = np.arange(2 ** n)
    bits = (idx[:, None] >> np.arange(n)) & 1
    parity = np.zeros(2 ** n, dtype=int)
    for a, b in edges or ring_edges(n):
        parity ^= bits[:, a - 1] & bits[:, b - 1]
    return (1 - 2 * parity).astype(complex) / np.sqrt(2 ** n)


def _singlet() -> np.ndarray:
    """(|01> - |10>)/sqrt(2) as a 2x2 tensor, first index on the first site."""
    t = np.zeros((2, 2), dtype=complex)
    t[0, 1] = 1 / np.sqrt(2)
    t[1, 0] = -1 / np.sqrt(2)
    return t


def _valence_bond(n, pairs):
    t = np.ones((), dtype=complex)
    order = []
    for i, j in pairs:
        t = np.multiply.outer(t, _singlet())
        order += [i, j]
    # axis k of t belongs to site order[k]; permute to site order 1..n
    perm = [order.index(s) for s in range(1, n + 1)]
    return from_tensor(t.transpose(perm))


def _rvb(n):
    if n % 2 or n < 4:
        raise StateError(f"RVB ring needs even n >= 4, got {n}")
    first = [(l, l + 1) for l in range(1, n, 2)]
    second = [(l, l + 1) for l in range(2, n - 1, 2)] + [(n, 1)]
    amps = _valence_bond(n, first) + _valence_bond(n, second)
    return amps / np.linalg.norm(amps)


def random_haar(n: int, seed=None) -> PureState:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    return PureState.from_vector(v, n)


def make_state(kind: str, n: int, params: dict | None = None, seed=None) -> PureState:
    """Build a named pure-state family on ``n`` sites.

    Families: ``ghz``, ``product`` (``blochs``: n Bloch vectors, default all
    ``|0>``), ``dicke`` (``k`` excitations, default ``n // 2``), ``w``,
    ``cluster`` (periodic ring unless ``edges`` given), ``rvb`` (two dimer
    coverings of the ring), ``random`` (Haar, needs ``seed`` for
    reproducibility).
    """
    params = dict(params or {})
    n = int(n)
    if n < 2:
        raise StateError(f"state families need n >= 2, got {n}")
    if kind == "ghz":
        amps = _ghz(n)
    elif kind == "product":
        amps = _product(n, params.get("blochs"))
    elif kind == "dicke":
        k = int(params.get("k", n // 2))
        if not 0 <= k <= n:
            raise StateError(f"Dicke excitation count must be in 0..{n}, got {k}")
        amps = _dicke(n, k)
    elif kind == "w":
        amps = _dicke(n, 1)
    elif kind == "cluster":
        amps = _cluster(n, params.get("edges"))
    elif kind == "rvb":
        amps = _rvb(n)
    elif kind == "random":
        return random_haar(n, seed)
    else:
        raise StateError(f"unknown state family {kind!r}")
    return PureState(n, amps)


def make_mixed(kind: str, n: int, params: dict | None = None, seed=None) -> MixedState:
    """Mixed families plus every pure family as its projector.

    ``ghz-mixture`` is the incoherent half-half mixture of all-0 and all-1.
    """
    if kind == "ghz-mixture":
        zeros, ones = basis_state([0] * n), basis_state([1] * n)
        return mix([(0.5, zeros), (0.5, ones)])
    if kind == "maximally-mixed":
        d = 2 ** n
        return MixedState(n, np.eye(d) / d)
    return make_state(kind, n, params, seed).density()


def is_mixed_family(kind: str) -> bool:
    return kind in MIXED_FAMILIES


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> MixedState:
    """Random density matrix from a Ginibre matrix (Hilbert-Schmidt measure at full rank)."""
    d = 2 ** n
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return MixedState(n, rho / np.trace(rho).real)
