"""Index q: trace norms of double commutators with additive observables.

Also hosts the state distances (1-norm, Bures, relative entropy) and the
lower bounds they inherit from a large double commutator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .observables import AdditiveObservable, _bits, _flip_index, apply_coeffs, coeffs_matrix, pauli_stack
from .qstate import InfeasibleSize, MixedState, PureState, StateError, is_mixed_family, make_mixed, make_state
from .scaling import ScalingFit, fit_power_law

EIG_FLOOR = 1e-12
SUPPORT_TOL = 1e-10
MAX_PURE_Q = 12
MAX_MIXED_Q = 10

# 1.5x the fitted slope of max ||[A,[A,sigma]]||_1 / N over product states
# (about 5.28 for N = 4..8, giving 7.91), rounded up; see calibrate_sep_constant
SEP_CONSTANT = 8.0


@dataclass
class OptimizerSettings:
    starts: int = 32
    max_iters: int = 300
    tol: float = 1e-7
    axis_samples: int = 16

    @classmethod
    def from_mapping(cls, m) -> "OptimizerSettings":
        keys = cls.__dataclass_fields__
        return cls(**{k: type(getattr(cls(), k))(v) for k, v in m.items() if k in keys})


def _matrix(state) -> np.ndarray:
    if isinstance(state, PureState):
        return np.outer(state.amplitudes, state.amplitudes.conj())
    if isinstance(state, MixedState):
        return state.matrix
    return np.asarray(state)


def double_commutator(a: AdditiveObservable, rho) -> np.ndarray:
    """Dense ``[A, [A, rho]]``."""
    r = _matrix(rho)
    if r.shape[0] != 2 ** a.n_sites:
        raise StateError("observable and state have different site counts")
    am = a.matrix()
    ar = am @ r
    x = am @ ar - 2 * ar @ am + r @ am @ am
    return 0.5 * (x + x.conj().T)


def trace_norm(m) -> float:
    """Sum of singular values."""
    m = np.asarray(m)
    if m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, atol=1e-13, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def _krylov(coeffs: np.ndarray, psi: np.ndarray, n: int):
    v1 = apply_coeffs(coeffs, psi, n)
    v2 = apply_coeffs(coeffs, v1, n)
    stack = np.column_stack([psi, v1, v2])
    u, s, _ = np.linalg.svd(stack, full_matrices=False)
    q = u[:, s > 1e-12 * max(s[0], 1.0)]
    h = q.conj().T
    k0, k1, k2 = h @ psi, h @ v1, h @ v2
    k = np.outer(k2, k0.conj()) - 2 * np.outer(k1, k1.conj()) + np.outer(k0, k2.conj())
    return v1, q, 0.5 * (k + k.conj().T)


def trace_norm_pure_fast(a: AdditiveObservable, psi: PureState) -> float:
    """``||[A, [A, |psi><psi|]]||_1`` from its at-most-rank-3 restriction."""
    if a.n_sites != psi.n_sites:
        raise StateError("observable and state have different site counts")
    _, _, k = _krylov(a.coeffs, psi.amplitudes, psi.n_sites)
    return float(np.sum(np.abs(np.linalg.eigvalsh(k))))


def _lowrank_value_grad(coeffs: np.ndarray, vecs: np.ndarray, weights: np.ndarray, n: int):
    """Value and gradient for ``rho = sum_k w_k |v_k><v_k|`` via the Krylov span."""
    v1 = np.column_stack([apply_coeffs(coeffs, v, n) for v in vecs.T])
    v2 = np.column_stack([apply_coeffs(coeffs, v, n) for v in v1.T])
    u, s, _ = np.linalg.svd(np.column_stack([vecs, v1, v2]), full_matrices=False)
    q = u[:, s > 1e-12 * max(s[0], 1.0)]
    h = q.conj().T
    h0, h1, h2 = h @ vecs, h @ v1, h @ v2
    k = (h2 * weights) @ h0.conj().T - 2 * (h1 * weights) @ h1.conj().T + (h0 * weights) @ h2.conj().T
    w, evecs = np.linalg.eigh(0.5 * (k + k.conj().T))
    value = float(np.sum(np.abs(w)))
    sgn = np.where(np.abs(w) > 1e-12 * max(value, 1.0), np.sign(w), 0.0)
    u_core = (evecs * sgn) @ evecs.conj().T
    g = np.zeros((n, 3))
    for j, wt in enumerate(weights):
        psi = vecs[:, j]
        u_psi = q @ (u_core @ h0[:, j])
        ua_psi = q @ (u_core @ h1[:, j])
        au_psi = apply_coeffs(coeffs, u_psi, n)
        # d||X||_1 = Tr(sign(X) dX), expanded term by term for each |psi><psi|
        gj = 2 * np.einsum("i,lai->la", u_psi.conj(), pauli_stack(v1[:, j], n)).real
        gj += np.einsum("i,lai->la", (2 * au_psi - 4 * ua_psi).conj(), pauli_stack(psi, n)).real
        g += wt * gj
    return value, g


def _dense_value_grad(coeffs: np.ndarray, r: np.ndarray, n: int):
    am = coeffs_matrix(coeffs)
    ar, ra = am @ r, r @ am
    x = am @ ar - 2 * ar @ am + ra @ am
    x = 0.5 * (x + x.conj().T)
    w, vecs = np.linalg.eigh(x)
    value = float(np.sum(np.abs(w)))
    sgn = np.where(np.abs(w) > 1e-12 * max(value, 1.0), np.sign(w), 0.0)
    u = (vecs * sgn) @ vecs.conj().T
    ru = r @ u
    g_mat = am @ ru + ru @ am - 2 * ra @ u - 2 * u @ ar + am @ u @ r + u @ ra
    b, flip = _bits(n), _flip_index(n)
    rows = np.arange(r.shape[0])
    grad = np.empty((n, 3))
    for l in range(n):
        # Tr(sigma G) = sum_i sigma[i, j(i)] G[j(i), i]
        off = g_mat[flip[l], rows]
        grad[l, 0] = off.sum().real
        grad[l, 1] = (off * 1j * (2 * b[l] - 1)).sum().real
        grad[l, 2] = (np.diag(g_mat) * (1 - 2 * b[l])).sum().real
    return value, grad


def _normalize_rows(c: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(c, axis=1, keepdims=True)
    return np.divide(c, norms, out=np.zeros_like(c), where=norms > 0)


def _ascend(fun, c0: np.ndarray, settings: OptimizerSettings):
    """Projected gradient ascent on the product of unit spheres with adaptive steps."""
    c = _normalize_rows(c0)
    f, g = fun(c)
    step = 0.1
    converged = False
    for _ in range(settings.max_iters):
        tangent = g - np.sum(g * c, axis=1, keepdims=True) * c
        if np.linalg.norm(tangent) < 1e-12:
            converged = True
            break
        improved = False
        while step > 1e-10:
            trial = _normalize_rows(c + step * tangent / max(np.abs(tangent).max(), 1e-300))
            ft, gt = fun(trial)
            if ft > f:
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
        gain = (ft - f) / max(abs(f), 1.0)
        c, f, g = trial, ft, gt
        step = min(step * 1.5, 1.0)
        if gain < settings.tol:
            converged = True
            break
    return f, c, converged


def _candidate_family(n: int, rng: np.random.Generator, samples: int):
    axes = [np.eye(3)[k] for k in range(3)]
    for _ in range(samples):
        v = rng.standard_normal(3)
        axes.append(v / np.linalg.norm(v))
    signs = [np.ones(n), np.array([(-1.0) ** l for l in range(1, n + 1)])]
    for v in axes:
        for s in signs:
            yield s[:, None] * v[None, :]


@dataclass
class DoubleCommutatorMax:
    """Best double-commutator trace norm found; a lower bound on the true maximum."""

    value: float
    argmax: AdditiveObservable
    per_start: list[float] = field(default_factory=list)
    candidate_best: float = 0.0
    converged: bool = True


def max_double_commutator(rho, settings: OptimizerSettings | None = None, seed=0) -> DoubleCommutatorMax:
    """Maximize ``||[A, [A, rho]]||_1`` over additive A with unit local terms.

    Low-rank states work in the span of ``rho``'s range and its images
    under A and A**2; near-full-rank states fall back to dense matrices.
    """
    settings = settings or OptimizerSettings()
    n = rho.n_sites
    if isinstance(rho, PureState):
        if n > MAX_PURE_Q:
            raise InfeasibleSize(f"pure-state q limited to N <= {MAX_PURE_Q}, got {n}")
        vecs, weights = rho.amplitudes[:, None], np.ones(1)
    else:
        if n > MAX_MIXED_Q:
            raise InfeasibleSize(f"mixed-state q limited to N <= {MAX_MIXED_Q}, got {n}")
        w, v = np.linalg.eigh(rho.matrix)
        keep = w > EIG_FLOOR
        vecs, weights = v[:, keep], w[keep]
    if 3 * len(weights) < 2 ** n:
        fun = lambda c: _lowrank_value_grad(c, vecs, weights, n)  # noqa: E731
    else:
        r = np.asarray(rho.matrix)
        fun = lambda c: _dense_value_grad(c, r, n)  # noqa: E731

    rng = np.random.default_rng([seed, 10 ** 6])
    best_c, best_v = None, -np.inf
    for c in _candidate_family(n, rng, settings.axis_samples):
        v, _ = fun(c)
        if v > best_v:
            best_v, best_c = v, c
    candidate_best = best_v

    per_start = []
    converged = True
    starts = [best_c]
    for i in range(settings.starts):
        start_rng = np.random.default_rng([seed, i])
        starts.append(start_rng.standard_normal((n, 3)))
    for c0 in starts:
        v, c, ok = _ascend(fun, c0, settings)
        per_start.append(v)
        converged &= ok
        if v > best_v:
            best_v, best_c = v, c
    return DoubleCommutatorMax(float(best_v), AdditiveObservable(_normalize_rows(best_c)), per_start,
                               float(candidate_best), converged)


def check_q_size(family: str, n: int) -> None:
    limit = MAX_MIXED_Q if is_mixed_family(family) else MAX_PURE_Q
    if n > limit:
        raise InfeasibleSize(f"index q for {family!r} limited to N <= {limit}, got {n}")


def estimate_index_q(family: str, n_grid, params: dict | None = None, seed=0,
                     settings: OptimizerSettings | None = None) -> ScalingFit:
    """Fit ``max(N, max_A ||[A,[A,rho]]||_1) ~ N**q`` across ``n_grid``."""
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3:
        raise ValueError("index fits need at least three system sizes")
    values, flags = [], []
    for n in n_grid:
        check_q_size(family, n)
        if is_mixed_family(family):
            state = make_mixed(family, n, params, seed)
        else:
            state = make_state(family, n, params, seed)
        res = max_double_commutator(state, settings, seed)
        if not res.converged:
            flags.append(f"N={n}: optimizer budget exhausted")
        values.append(max(float(n), res.value))
    return fit_power_law(family, n_grid, values, measure="q", flags=flags)


def _psd_eig(m: np.ndarray):
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.where(w < EIG_FLOOR, 0.0, w)
    return w, v


def _sqrtm(m: np.ndarray) -> np.ndarray:
    w, v = _psd_eig(m)
    return (v * np.sqrt(w)) @ v.conj().T


def _pair(rho, sigma):
    r, s = _matrix(rho), _matrix(sigma)
    if r.shape != s.shape:
        raise StateError("states have different dimensions")
    return r, s


def trace_distance(rho, sigma) -> float:
    """Unhalved 1-norm ``||rho - sigma||_1`` (ranges over [0, 2])."""
    r, s = _pair(rho, sigma)
    return trace_norm(r - s)


def root_fidelity(rho, sigma) -> float:
    """``||sqrt(rho) sqrt(sigma)||_1``."""
    r, s = _pair(rho, sigma)
    return float(np.sum(np.linalg.svd(_sqrtm(r) @ _sqrtm(s), compute_uv=False)))


def bures_distance(rho, sigma) -> float:
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - root_fidelity(rho, sigma)))))


def relative_entropy(rho, sigma) -> float:
    """``Tr(rho log rho - rho log sigma)`` in nats; ``inf`` off the support of sigma."""
    r, s = _pair(rho, sigma)
    p, _ = _psd_eig(r)
    w, v = _psd_eig(s)
    weights = np.einsum("ik,ij,jk->k", v.conj(), r, v).real
    if weights[w == 0].sum() > SUPPORT_TOL:
        return float("inf")
    pos = p > 0
    keep = w > 0
    value = float(np.sum(p[pos] * np.log(p[pos])) - np.sum(weights[keep] * np.log(w[keep])))
    return max(value, 0.0)


@dataclass(frozen=True)
class DistanceBounds:
    """Lower bounds on the distance from ``rho`` to the separable set."""

    one_norm: float
    bures: float
    relative_entropy: float
    max_double_commutator: float
    sep_constant: float
    n_sites: int


def separable_distance_bound(rho, sep_constant: float = SEP_CONSTANT, seed=0,
                             settings: OptimizerSettings | None = None,
                             dc_value: float | None = None) -> DistanceBounds:
    """Bound ``min_sigma D(rho, sigma)`` over separable sigma from below.

    Uses ``||[[rho-sigma,A],A]||_1 <= 4 N**2 ||rho-sigma||_1`` with the
    separable double commutator capped at ``sep_constant * N``. The Bures
    bound follows from ``1 - F >= ||rho-sigma||_1**2 / 8`` and the relative
    entropy bound from Pinsker's inequality.
    """
    if sep_constant <= 0:
        raise ValueError("sep_constant must be positive")
    n = rho.n_sites
    if dc_value is None:
        dc_value = max_double_commutator(rho, settings, seed).value
    one = max(0.0, (dc_value - sep_constant * n) / (4.0 * n * n))
    return DistanceBounds(one, one / 2.0, one * one / 2.0, float(dc_value), float(sep_constant), n)


def calibrate_sep_constant(n_values=range(4, 9), samples: int = 4, seed=0,
                           settings: OptimizerSettings | None = None) -> tuple[float, dict]:
    """Empirical separable constant: 1.5x the slope of max value / N on product states.

    Every product state is locally equivalent to all-zero and the feasible
    observables are rotation invariant, so a handful of random product
    states per N already probe the whole separable-pure family.
    """
    settings = settings or OptimizerSettings(starts=8)
    rng = np.random.default_rng(seed)
    best = {}
    for n in n_values:
        vals = []
        for _ in range(samples):
            blochs = rng.standard_normal((n, 3))
            psi = make_state("product", n, {"blochs": blochs})
            vals.append(max_double_commutator(psi, settings, int(rng.integers(2 ** 31))).value)
        best[n] = max(vals)
    ns = np.array(list(best), dtype=float)
    vs = np.array(list(best.values()))
    slope = float(ns @ vs / (ns @ ns))
    return 1.5 * slope, best
