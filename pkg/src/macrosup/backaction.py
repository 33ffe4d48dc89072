"""Projective measurement on one site and how far its effect spreads."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bipartite import schmidt_at_site
from .factorize import DEFAULT_TOL, eb_report
from .qstate import PureState, StateError, bipartition_matrix, entropy_bits

ORTHO_TOL = 1e-10
DROP_PROB = 1e-14


@dataclass(frozen=True, eq=False)
class Outcome:
    probability: float
    label: str
    post_state: PureState = field(repr=False)


def _basis(psi: PureState, l: int, basis) -> tuple[str, np.ndarray, np.ndarray]:
    if isinstance(basis, str):
        if basis == "schmidt":
            cut = schmidt_at_site(psi, l)
            return basis, cut.xi0, cut.xi1
        if basis == "computational":
            return basis, np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
        raise StateError(f"unknown measurement basis {basis!r}")
    b0, b1 = (np.asarray(b, dtype=complex) for b in basis)
    gram = np.array([[np.vdot(b0, b0), np.vdot(b0, b1)], [np.vdot(b1, b0), np.vdot(b1, b1)]])
    if np.abs(gram - np.eye(2)).max() > ORTHO_TOL:
        raise StateError("measurement basis is not orthonormal")
    return "custom", b0, b1


def measure_site(psi: PureState, l: int, basis="schmidt") -> list[Outcome]:
    """Outcomes of measuring site ``l`` in ``basis``.

    ``basis`` is ``"schmidt"``, ``"computational"`` or a pair of orthonormal
    kets. Post-measurement states live on the other sites in increasing
    order; outcomes with probability below 1e-14 are dropped.
    """
    if psi.n_sites < 2:
        raise StateError("measuring a site needs at least two sites")
    if not 1 <= l <= psi.n_sites:
        raise StateError(f"site {l} outside 1..{psi.n_sites}")
    _, b0, b1 = _basis(psi, l, basis)
    m = bipartition_matrix(psi, [l])
    out = []
    for label, b in (("0", b0), ("1", b1)):
        v = b.conj() @ m
        p = float(np.vdot(v, v).real)
        if p > DROP_PROB:
            out.append(Outcome(p, label, PureState.from_vector(v, psi.n_sites - 1)))
    return out


def outcome_average(outcomes: list[Outcome]) -> np.ndarray:
    """``sum_k p_k |post_k><post_k|``."""
    return sum(o.probability * np.outer(o.post_state.amplitudes, o.post_state.amplitudes.conj())
               for o in outcomes)


def _site_marginals(psi: PureState) -> list[np.ndarray]:
    mats = []
    for s in range(1, psi.n_sites + 1):
        m = bipartition_matrix(psi, [s])
        mats.append(m @ m.conj().T)
    return mats


def _one_norm(a: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T))).sum())


@dataclass
class BackactionReport:
    site: int
    basis: str
    info_gain_bits: float
    affected_sites: int
    per_site_trace_distance: dict[int, float]
    outcomes: list[dict]
    tol: float

    def to_json(self) -> dict:
        return {
            "site": self.site,
            "basis": self.basis,
            "info_gain_bits": self.info_gain_bits,
            "outcomes": self.outcomes,
            "affected_sites": self.affected_sites,
            "per_site_trace_distance": {str(k): v for k, v in self.per_site_trace_distance.items()},
            "tol": self.tol,
        }


def backaction_report(psi: PureState, l: int, tol: float = 1e-6, basis="schmidt") -> BackactionReport:
    """Information gain of a single-site measurement and the sites it changes.

    Site ``m`` counts as affected when, for some outcome, its marginal moves
    by more than ``tol`` in 1-norm. The outcome-averaged marginal never
    moves, so averaging first would always report zero.
    """
    n = psi.n_sites
    name, _, _ = _basis(psi, l, basis)
    outcomes = measure_site(psi, l, basis)
    others = [s for s in range(1, n + 1) if s != l]
    before = _site_marginals(psi)
    worst = {s: 0.0 for s in others}
    rows = []
    for o in outcomes:
        after = _site_marginals(o.post_state)
        dists = {s: _one_norm(before[s - 1] - after[j]) for j, s in enumerate(others)}
        for s, d in dists.items():
            worst[s] = max(worst[s], d)
        rows.append({
            "p": o.probability,
            "label": o.label,
            "affected": sum(1 for d in dists.values() if d > tol),
            "per_site_dist": {str(s): d for s, d in dists.items()},
        })
    info = entropy_bits([o.probability for o in outcomes])
    affected = sum(1 for d in worst.values() if d > tol)
    return BackactionReport(l, name, info, affected, worst, rows, tol)


def random_site_experiment(psi: PureState, trials: int, eps: float = 0.1, delta: float = 0.5,
                           tol: float = DEFAULT_TOL, seed=None) -> float:
    """Fraction of randomly chosen sites whose measurement is drastic.

    A site is drastic when ``E(l) >= eps`` and ``|S1(l)| >= delta * N``. With
    ``trials >= N`` every site is visited once and the result is exactly
    ``eb_count / N``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    n = psi.n_sites
    report = eb_report(psi, eps, delta, tol)
    drastic = np.array([e.entropy_bits >= eps and e.s1_size >= delta * n for e in report.per_site])
    if trials >= n:
        return float(drastic.mean())
    rng = np.random.default_rng(seed)
    picks = rng.integers(n, size=trials)
    return float(drastic[picks].mean())
