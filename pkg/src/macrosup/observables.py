"""Local and additive spin observables, correlations and the index-p estimator.

An additive observable is stored as an ``(N, 3)`` array of Bloch coefficients,
row ``l - 1`` giving ``a(l) = c_x sx(l) + c_y sy(l) + c_z sz(l)``. Identity
components are dropped since they cancel in every connected correlation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .qstate import PureState, StateError, make_state
from .scaling import ScalingFit, fit_power_law

BLOCH_TOL = 1e-12
AXES = "xyz"
DEGENERACY_TOL = 1e-9


@lru_cache(maxsize=32)
def _bits(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return ((idx[None, :] >> np.arange(n)[:, None]) & 1).astype(np.int8)


@lru_cache(maxsize=32)
def _flip_index(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return idx[None, :] ^ (1 << np.arange(n))[:, None]


def pauli_apply(amps: np.ndarray, n: int, site: int, axis: int) -> np.ndarray:
    """Return ``sigma_axis(site) |amps>`` with ``axis`` 0, 1, 2 for x, y, z."""
    b = _bits(n)[site - 1]
    if axis == 2:
        return amps * (1 - 2 * b)
    flipped = amps[_flip_index(n)[site - 1]]
    if axis == 0:
        return flipped
    return flipped * (1j * (2 * b - 1))


def pauli_stack(amps: np.ndarray, n: int) -> np.ndarray:
    """All single-site Pauli images, shape ``(N, 3, 2**N)``."""
    b = _bits(n)
    flipped = amps[_flip_index(n)]
    out = np.empty((n, 3, amps.size), dtype=complex)
    out[:, 0] = flipped
    out[:, 1] = flipped * (1j * (2 * b - 1))
    out[:, 2] = amps[None, :] * (1 - 2 * b)
    return out


@dataclass(frozen=True)
class LocalObservable:
    """``c . sigma`` acting on a single site."""

    site: int
    bloch: tuple[float, float, float]

    def __post_init__(self):
        b = tuple(float(c) for c in self.bloch)
        if len(b) != 3:
            raise ValueError("Bloch coefficients must be a triple")
        if b[0] ** 2 + b[1] ** 2 + b[2] ** 2 > 1 + BLOCH_TOL:
            raise ValueError(f"local observable {b} exceeds unit spectral norm")
        object.__setattr__(self, "bloch", b)

    def apply(self, amps: np.ndarray, n: int) -> np.ndarray:
        if not 1 <= self.site <= n:
            raise StateError(f"site {self.site} outside 1..{n}")
        out = np.zeros_like(amps, dtype=complex)
        for axis, c in enumerate(self.bloch):
            if c:
                out += c * pauli_apply(amps, n, self.site, axis)
        return out


@dataclass(frozen=True, eq=False)
class AdditiveObservable:
    """Sum of one local observable per site, coefficients shape ``(N, 3)``."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[1] != 3 or c.shape[0] < 1:
            raise ValueError(f"coefficients must have shape (N, 3), got {c.shape}")
        if np.any(np.sum(c ** 2, axis=1) > 1 + BLOCH_TOL):
            raise ValueError("a local term exceeds unit spectral norm")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_sites(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def uniform(cls, n: int, axis, sign_pattern=None) -> "AdditiveObservable":
        """``sum_l s_l n.sigma(l)``; ``axis`` is ``'x'``/``'y'``/``'z'`` or a 3-vector."""
        if isinstance(axis, str):
            v = np.eye(3)[AXES.index(axis)]
        else:
            v = np.asarray(axis, dtype=float)
            v = v / np.linalg.norm(v)
        s = np.ones(n) if sign_pattern is None else np.asarray(sign_pattern, dtype=float)
        return cls(s[:, None] * v[None, :])

    @classmethod
    def staggered(cls, n: int, axis) -> "AdditiveObservable":
        """``sum_l (-1)^l n.sigma(l)`` with sites numbered from 1."""
        return cls.uniform(n, axis, [(-1) ** l for l in range(1, n + 1)])

    @classmethod
    def from_local(cls, n: int, terms) -> "AdditiveObservable":
        c = np.zeros((n, 3))
        for t in terms:
            c[t.site - 1] += t.bloch
        return cls(c)

    def term(self, site: int) -> LocalObservable:
        return LocalObservable(site, tuple(self.coeffs[site - 1]))

    def apply(self, amps: np.ndarray, n: int | None = None) -> np.ndarray:
        n = self.n_sites if n is None else n
        if n != self.n_sites:
            raise StateError(f"observable on {self.n_sites} sites applied to {n}-site state")
        return apply_coeffs(self.coeffs, amps, n)

    def matrix(self) -> np.ndarray:
        """Dense ``2**N x 2**N`` matrix."""
        return coeffs_matrix(self.coeffs)


def apply_coeffs(coeffs: np.ndarray, amps: np.ndarray, n: int) -> np.ndarray:
    """Apply the additive operator with raw ``(N, 3)`` coefficients (unvalidated)."""
    return np.einsum("la,lai->i", coeffs, pauli_stack(amps, n))


def coeffs_matrix(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[0]
    d = 2 ** n
    b, flip = _bits(n), _flip_index(n)
    rows = np.arange(d)
    m = np.zeros((d, d), dtype=complex)
    for l, (cx, cy, cz) in enumerate(coeffs):
        m[rows, rows] += cz * (1 - 2 * b[l])
        m[rows, flip[l]] += cx + cy * 1j * (2 * b[l] - 1)
    return m


M_X = lambda n: AdditiveObservable.uniform(n, "x")  # noqa: E731
M_Y = lambda n: AdditiveObservable.uniform(n, "y")  # noqa: E731
M_Z = lambda n: AdditiveObservable.uniform(n, "z")  # noqa: E731


def _apply(op, psi: PureState) -> np.ndarray:
    if isinstance(op, LocalObservable):
        return op.apply(psi.amplitudes, psi.n_sites)
    if isinstance(op, AdditiveObservable):
        return op.apply(psi.amplitudes, psi.n_sites)
    raise TypeError(f"not an observable: {op!r}")


def correlation(x, y, state: PureState) -> float:
    """Symmetrized connected correlation ``<{dX, dY}>/2`` in a pure state.

    Equals ``<XY> - <X><Y>`` whenever X and Y commute, and the variance of X
    when ``y is x``.
    """
    xa = _apply(x, state)
    ya = xa if y is x else _apply(y, state)
    psi = state.amplitudes
    ex = np.vdot(psi, xa).real
    ey = np.vdot(psi, ya).real
    return float(np.vdot(xa, ya).real - ex * ey)


@dataclass(frozen=True, eq=False)
class FluctuationMatrix:
    """Symmetrized covariance of all single-site Paulis, indexed ``3*(l-1) + axis``."""

    n_sites: int
    entries: np.ndarray = field(repr=False)

    def eigh(self):
        return np.linalg.eigh(self.entries)

    @property
    def top_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[-1])

    def quadratic_form(self, obs: AdditiveObservable | np.ndarray) -> float:
        c = obs.coeffs if isinstance(obs, AdditiveObservable) else np.asarray(obs)
        c = c.reshape(-1)
        return float(c @ self.entries @ c)


def build_fluctuation_matrix(state: PureState) -> FluctuationMatrix:
    n = state.n_sites
    phi = pauli_stack(state.amplitudes, n).reshape(3 * n, -1)
    mean = (phi @ state.amplitudes.conj()).real
    v = (phi.conj() @ phi.T).real - np.outer(mean, mean)
    return FluctuationMatrix(n, 0.5 * (v + v.T))


@dataclass(frozen=True, eq=False)
class FluctuationResult:
    """Outcome of :func:`max_fluctuation`.

    ``value`` is the relaxed maximum ``N * e1`` attained by ``relaxed_coeffs``
    (total squared norm N). ``argmax`` is the per-site normalized projection
    of those coefficients and ``feasible_value`` its actual fluctuation.
    """

    value: float
    top_eigenvalue: float
    relaxed_coeffs: np.ndarray = field(repr=False)
    argmax: AdditiveObservable
    feasible_value: float


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def _canonical_top(w: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    """Top eigenvector, made reproducible when the top eigenvalue is degenerate.

    Inside a degenerate eigenspace the LAPACK choice is arbitrary, so the
    uniform z, x, y directions (then staggered, then single-site ones) are
    projected onto the space and the first nonzero projection is used.
    """
    space = u[:, w >= w[-1] - DEGENERACY_TOL * max(1.0, abs(w[-1]))]
    if space.shape[1] == 1:
        return _sign_fix(space[:, 0])
    stagger = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    # single-site probes span everything, so the loop always returns
    patterns = [np.ones(n), stagger] + list(np.eye(n))
    for pattern in patterns:
        for axis in (2, 0, 1):
            probe = np.zeros((n, 3))
            probe[:, axis] = pattern
            proj = space @ (space.T @ probe.ravel())
            if np.linalg.norm(proj) > 1e-6:
                return _sign_fix(proj / np.linalg.norm(proj))
    raise AssertionError("unreachable: probes span the coefficient space")


def max_fluctuation(state: PureState) -> FluctuationResult:
    """Maximize ``C(A, A)`` over additive A with ``sum_l |c_l|^2 = N``."""
    n = state.n_sites
    fm = build_fluctuation_matrix(state)
    w, u = fm.eigh()
    e1 = float(w[-1])
    top = _canonical_top(w, u, n)
    relaxed = np.sqrt(n) * top.reshape(n, 3)
    relaxed[np.abs(relaxed) < 1e-12] = 0.0
    norms = np.linalg.norm(relaxed, axis=1)
    feasible = np.divide(relaxed, norms[:, None], out=np.zeros_like(relaxed), where=norms[:, None] > 1e-12)
    argmax = AdditiveObservable(feasible)
    return FluctuationResult(n * e1, e1, relaxed, argmax, correlation(argmax, argmax, state))


def estimate_index_p(family: str, n_grid, params: dict | None = None, seed=None) -> ScalingFit:
    """Fit ``max_fluctuation ~ N**p`` across ``n_grid``."""
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3:
        raise ValueError("index fits need at least three system sizes")
    values = [max_fluctuation(make_state(family, n, params, seed)).value for n in n_grid]
    return fit_power_law(family, n_grid, values, measure="p")


@dataclass(frozen=True)
class Census:
    r1_pairs: list[tuple[int, int]]
    r1_count: int
    r2_count: int
    threshold: float


def pair_correlations(state: PureState, a: AdditiveObservable) -> np.ndarray:
    """``N x N`` matrix of ``C(a(l), a(l'))`` (sites 1-based, array 0-based)."""
    n = state.n_sites
    if a.n_sites != n:
        raise StateError("observable and state have different site counts")
    phi = np.einsum("la,lai->li", a.coeffs, pauli_stack(state.amplitudes, n))
    mean = (phi @ state.amplitudes.conj()).real
    c = (phi.conj() @ phi.T).real - np.outer(mean, mean)
    return 0.5 * (c + c.T)


def correlation_census(state: PureState, a: AdditiveObservable, threshold: float = 0.1) -> Census:
    """Split all ordered site pairs by ``|C(a(l), a(l'))| >= threshold``."""
    if threshold <= 0:
        raise ValueError("census threshold must be positive")
    c = pair_correlations(state, a)
    n = state.n_sites
    hits = np.abs(c) >= threshold
    pairs = [(l + 1, m + 1) for l in range(n) for m in range(n) if hits[l, m]]
    return Census(pairs, len(pairs), n * n - len(pairs), threshold)
