"""Bipartite measures: Schmidt cuts, entropies, concurrence and localizable entanglement."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .observables import pauli_stack
from .qstate import (
    InfeasibleSize,
    MixedState,
    PureState,
    SiteSubset,
    StateError,
    bipartition_matrix,
    entropy_bits,
    from_bipartition,
    reduced_density,
)

DEGENERATE_TOL = 1e-10
MAX_LE_SITES = 6

_SY_SY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def _phase_fix(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real positive."""
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size == 0:
        return v
    a = v[nz[0]]
    return v * (abs(a) / a)


def _orthogonal_unit(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to unit ``v``."""
    best = None
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = 1.0
        r = e - v * np.vdot(v, e)
        nr = np.linalg.norm(r)
        if best is None or nr > best[0] + 1e-12:
            best = (nr, r)
    return _phase_fix(best[1] / best[0])


@dataclass(frozen=True, eq=False)
class SchmidtCut:
    """Schmidt data between site ``site`` and the rest of the chain.

    ``eta0``/``eta1`` are states of the other N-1 sites in increasing site
    order. When ``lambda1 == 0`` the second vector is only a fixed
    orthogonal completion.
    """

    site: int
    n_sites: int
    lambda0: float
    lambda1: float
    xi0: np.ndarray = field(repr=False)
    xi1: np.ndarray = field(repr=False)
    eta0: np.ndarray = field(repr=False)
    eta1: np.ndarray = field(repr=False)

    @property
    def entropy(self) -> float:
        return entropy_bits([self.lambda0, self.lambda1])

    @property
    def rest(self) -> SiteSubset:
        return SiteSubset.of([self.site], self.n_sites).complement()

    def reconstruct(self) -> np.ndarray:
        mat = np.sqrt(self.lambda0) * np.outer(self.xi0, self.eta0)
        mat = mat + np.sqrt(self.lambda1) * np.outer(self.xi1, self.eta1)
        return from_bipartition(mat, [self.site], self.n_sites)


def schmidt_at_site(psi: PureState, l: int) -> SchmidtCut:
    """Schmidt decomposition across ``{l}`` versus the other sites.

    Degenerate spectra (``lambda0 == lambda1``) use the computational basis
    for xi; every xi is phase-fixed so its first nonzero entry is positive.
    """
    n = psi.n_sites
    if not 1 <= l <= n:
        raise StateError(f"site {l} outside 1..{n}")
    m = bipartition_matrix(psi, [l])
    rho = m @ m.conj().T
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    lam0, lam1 = float(w[1]), float(max(w[0], 0.0))
    if lam0 - lam1 <= DEGENERATE_TOL:
        xi0, xi1 = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    else:
        xi0, xi1 = _phase_fix(v[:, 1]), _phase_fix(v[:, 0])
    total = lam0 + lam1
    lam0, lam1 = lam0 / total, lam1 / total
    eta0 = xi0.conj() @ m
    eta0 = eta0 / np.linalg.norm(eta0)
    eta1 = xi1.conj() @ m
    if lam1 > 1e-14 and np.linalg.norm(eta1) > 1e-7:
        eta1 = eta1 / np.linalg.norm(eta1)
    else:
        lam0, lam1 = 1.0, 0.0
        eta1 = _orthogonal_unit(eta0)
    return SchmidtCut(l, n, lam0, lam1, xi0, xi1, eta0, eta1)


def cut_entropy(psi: PureState, part) -> float:
    """Entanglement entropy (bits) between ``part`` and its complement."""
    if not isinstance(part, SiteSubset):
        part = SiteSubset.of(part, psi.n_sites)
    if len(part) == 0 or len(part) == psi.n_sites:
        raise StateError("cut needs a proper nonempty subset")
    s = np.linalg.svd(bipartition_matrix(psi, part), compute_uv=False)
    return entropy_bits(s ** 2)


def half_chain_entropy(psi: PureState) -> float:
    return cut_entropy(psi, range(1, psi.n_sites // 2 + 1))


def _pair(pair, n):
    l, m = (int(x) for x in pair)
    if l == m:
        raise StateError("pair needs two distinct sites")
    SiteSubset.of([l, m], n)
    return l, m


def wootters(rho2: np.ndarray) -> float:
    """Concurrence of a two-qubit density matrix."""
    rho2 = np.asarray(rho2)
    tilde = _SY_SY @ rho2.conj() @ _SY_SY
    w, v = np.linalg.eigh(0.5 * (rho2 + rho2.conj().T))
    sqrt_rho = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    w, v = np.linalg.eigh(0.5 * (tilde + tilde.conj().T))
    sqrt_tilde = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    # singular values of sqrt(rho) sqrt(tilde) are the square roots of eig(rho tilde)
    mu = np.linalg.svd(sqrt_rho @ sqrt_tilde, compute_uv=False)
    return float(np.clip(mu[0] - mu[1] - mu[2] - mu[3], 0.0, 1.0))


def concurrence(state: PureState | MixedState, pair) -> float:
    """Wootters concurrence of the reduced state on ``pair``."""
    l, m = _pair(pair, state.n_sites)
    if state.n_sites == 2:
        rho2 = state.density().matrix
    else:
        rho2 = reduced_density(state, [l, m]).matrix
    return wootters(rho2)


def meyer_wallach(psi: PureState) -> float:
    n = psi.n_sites
    purities = []
    for l in range(1, n + 1):
        m = bipartition_matrix(psi, [l])
        rho = m @ m.conj().T
        purities.append(np.vdot(rho, rho).real)
    return float(np.clip(2.0 * (1.0 - np.mean(purities)), 0.0, 1.0))


def connected_correlation_matrix(psi: PureState, pair) -> np.ndarray:
    """``Q[a, b] = <s_a(l) s_b(l')> - <s_a(l)><s_b(l')>`` for a, b in x, y, z."""
    l, m = _pair(pair, psi.n_sites)
    stack = pauli_stack(psi.amplitudes, psi.n_sites)
    pl, pm = stack[l - 1], stack[m - 1]
    mean_l = (pl @ psi.amplitudes.conj()).real
    mean_m = (pm @ psi.amplitudes.conj()).real
    return (pl.conj() @ pm.T).real - np.outer(mean_l, mean_m)


def max_pair_correlation(psi: PureState, pair) -> float:
    """Largest connected correlation between unit-norm observables on the pair."""
    q = connected_correlation_matrix(psi, pair)
    return float(np.linalg.svd(q, compute_uv=False)[0])


def _measurement_bras(angles: np.ndarray) -> np.ndarray:
    """Rows are <+n| and <-n| for each direction (theta, phi); shape (m, 2, 2)."""
    theta, phi = angles[:, 0], angles[:, 1]
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.exp(1j * phi)
    kets = np.empty((angles.shape[0], 2, 2), dtype=complex)
    kets[:, 0, 0], kets[:, 0, 1] = c, e * s
    kets[:, 1, 0], kets[:, 1, 1] = -s / e, c
    return kets.conj()


def _le_objective(t: np.ndarray, angles: np.ndarray) -> float:
    """Outcome-averaged concurrence after measuring every axis of ``t`` beyond the first two.

    For an unnormalized post-measurement pair ``[[a, b], [c, d]]`` the weighted
    concurrence is ``2|ad - bc|``, so probabilities never appear explicitly.
    """
    bras = _measurement_bras(angles)
    for j in range(bras.shape[0]):
        t = np.tensordot(t, bras[j], axes=([2], [1]))
    mats = np.moveaxis(t, (0, 1), (-2, -1)).reshape(-1, 2, 2)
    det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    return float(2.0 * np.abs(det).sum())


def _direction_grid(grid: int) -> np.ndarray:
    dirs = [(0.0, 0.0), (np.pi, 0.0)]
    for i in range(1, grid):
        for j in range(grid):
            dirs.append((np.pi * i / grid, 2 * np.pi * j / grid))
    return np.array(dirs)


@dataclass(frozen=True)
class LocalizableResult:
    value: float
    angles: np.ndarray = field(repr=False)
    measured_sites: tuple[int, ...] = ()


def localizable_entanglement_search(psi: PureState, pair, grid: int = 8, seed=0,
                                    restarts: int = 4, refine: bool = True) -> LocalizableResult:
    """Best average pair concurrence over product projective measurements on the other sites.

    Coordinate ascent over a polar/azimuthal grid per measured site, started
    from all-x, all-y, all-z and ``restarts`` seeded random grid points, then
    a continuous Nelder-Mead polish of the best point.
    """
    n = psi.n_sites
    if n > MAX_LE_SITES:
        raise InfeasibleSize(f"brute-force localizable entanglement limited to N <= {MAX_LE_SITES}, got {n}")
    if grid < 8:
        raise ValueError("angular grid must be at least 8")
    l, m = _pair(pair, n)
    others = [s for s in range(1, n + 1) if s not in (l, m)]
    t = psi.tensor().transpose([l - 1, m - 1] + [s - 1 for s in others])
    if not others:
        return LocalizableResult(wootters(psi.density().matrix), np.zeros((0, 2)), ())

    dirs = _direction_grid(grid)
    k = len(others)
    rng = np.random.default_rng(seed)
    starts = [np.tile([np.pi / 2, 0.0], (k, 1)), np.tile([np.pi / 2, np.pi / 2], (k, 1)), np.zeros((k, 2))]
    starts += [dirs[rng.integers(len(dirs), size=k)] for _ in range(restarts)]

    best_val, best_ang = -np.inf, None
    for ang in starts:
        ang = ang.copy()
        val = _le_objective(t, ang)
        improved = True
        while improved:
            improved = False
            for j in range(k):
                trial = ang.copy()
                for d in dirs:
                    trial[j] = d
                    v = _le_objective(t, trial)
                    if v > val + 1e-13:
                        val, ang = v, trial.copy()
                        improved = True
        if val > best_val:
            best_val, best_ang = val, ang
    if refine:
        res = minimize(lambda x: -_le_objective(t, x.reshape(k, 2)), best_ang.ravel(), method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000})
        if -res.fun > best_val:
            best_val, best_ang = float(-res.fun), res.x.reshape(k, 2)
    return LocalizableResult(float(min(best_val, 1.0)), best_ang, tuple(others))


def localizable_entanglement_bruteforce(psi: PureState, pair, grid: int = 8, seed=0) -> float:
    """Lower bound on the localizable entanglement of ``pair`` (concurrence-valued)."""
    return localizable_entanglement_search(psi, pair, grid, seed).value


def pair_table(psi: PureState, le: bool = False, grid: int = 8, seed=0) -> list[dict]:
    """Rows ``(l, l_prime, concurrence, max_corr, le_lower)`` for all pairs ``l < l'``."""
    rows = []
    n = psi.n_sites
    for l in range(1, n + 1):
        for m in range(l + 1, n + 1):
            rows.append({
                "l": l,
                "l_prime": m,
                "concurrence": concurrence(psi, (l, m)),
                "max_corr": max_pair_correlation(psi, (l, m)),
                "le_lower": localizable_entanglement_bruteforce(psi, (l, m), grid, seed) if le else None,
            })
    return rows
