"""Tensor factorization into inseparable blocks and the E_B census built on it."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from .bipartite import SchmidtCut, _phase_fix, schmidt_at_site
from .qstate import (
    InfeasibleSize,
    PureState,
    SiteSubset,
    StateError,
    as_tensor,
    bipartition_matrix,
    entropy_bits,
    from_tensor,
)

MAX_FACTOR_SITES = 16
DEFAULT_TOL = 1e-8


def _top_eigenvalue(psi: PureState, part) -> float:
    """Largest eigenvalue of the marginal on ``part``, via the smaller side."""
    m = bipartition_matrix(psi, part)
    g = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.conj().T @ m
    return float(np.linalg.eigvalsh(g)[-1])


def is_product_across(psi: PureState, part, tol: float = DEFAULT_TOL) -> bool:
    """True iff the marginal on ``part`` is pure within ``tol``."""
    if not isinstance(part, SiteSubset):
        part = SiteSubset.of(part, psi.n_sites)
    if len(part) == 0 or len(part) == psi.n_sites:
        raise StateError("product test needs a proper nonempty subset")
    return _top_eigenvalue(psi, part) >= 1 - tol


def _split(psi: PureState, part) -> tuple[np.ndarray, np.ndarray]:
    """Factor states on ``part`` and on its complement (sites in increasing order)."""
    u, _, vh = np.linalg.svd(bipartition_matrix(psi, part), full_matrices=False)
    return _phase_fix(u[:, 0]), _phase_fix(vh[0])


def _pair_components(psi: PureState, threshold: float) -> list[list[int]]:
    """Connected components of the graph linking sites with correlated pair marginals.

    Sites in different tensor factors have ``rho_lm == rho_l (x) rho_m``, so
    every component lies inside one block.
    """
    n = psi.n_sites
    t = psi.tensor()
    singles = []
    for l in range(n):
        m = np.moveaxis(t, l, 0).reshape(2, -1)
        singles.append(m @ m.conj().T)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for l, m in combinations(range(n), 2):
        if find(l) == find(m):
            continue
        mat = np.moveaxis(t, (l, m), (0, 1)).reshape(4, -1)
        rho = (mat @ mat.conj().T).reshape(2, 2, 2, 2)
        prod = np.einsum("ac,bd->abcd", singles[l], singles[m])
        if np.linalg.norm(rho - prod) > threshold:
            parent[find(m)] = find(l)
    groups: dict[int, list[int]] = {}
    for l in range(n):
        groups.setdefault(find(l), []).append(l + 1)
    return sorted(groups.values())


def _minimal_block(psi: PureState, site: int, comps: list[list[int]], tol: float) -> tuple[list[int], bool]:
    """Smallest pure-marginal union of components containing ``site``.

    Returns the block and whether some purity test fell near ``tol``.
    """
    n = psi.n_sites
    own = next(c for c in comps if site in c)
    others = [c for c in comps if c is not own]
    borderline = False
    candidates = []
    for r in range(len(others) + 1):
        for extra in combinations(others, r):
            sites = sorted(own + [s for c in extra for s in c])
            if len(sites) < n:
                candidates.append(sites)
    candidates.sort(key=len)
    for sites in candidates:
        gap = 1.0 - _top_eigenvalue(psi, sites)
        if tol / 10 < gap < tol * 10:
            borderline = True
        if gap <= tol:
            return sites, borderline
    return list(range(1, n + 1)), borderline


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """Partition of the sites into inseparable blocks with one factor state each."""

    n_sites: int
    blocks: list[SiteSubset]
    factors: list[PureState] = field(repr=False)
    flagged: bool = False

    def block_of(self, site: int) -> SiteSubset:
        return next(b for b in self.blocks if site in b)

    def partition(self) -> list[list[int]]:
        return [list(b.members) for b in self.blocks]

    def reconstruct(self) -> PureState:
        t = np.ones((), dtype=complex)
        order = []
        for block, factor in zip(self.blocks, self.factors):
            t = np.multiply.outer(t, factor.tensor())
            order += list(block.members)
        perm = [order.index(s) for s in range(1, self.n_sites + 1)]
        return PureState.from_vector(from_tensor(t.transpose(perm)), self.n_sites)


def finest_factorization(psi: PureState, tol: float = DEFAULT_TOL) -> BlockDecomposition:
    """Split ``psi`` into the finest tensor product of inseparable factors.

    Candidate blocks are unions of pair-correlation components, checked by
    the marginal purity test from smallest to largest; this is exhaustive in
    the worst case (no pair correlations at all, e.g. cluster states).
    """
    n = psi.n_sites
    if n > MAX_FACTOR_SITES:
        raise InfeasibleSize(f"exact factorization limited to N <= {MAX_FACTOR_SITES}, got {n}")
    threshold = 10 * np.sqrt(tol)
    blocks, factors = [], []
    flagged = False
    # current: state on the sites in `labels` (increasing), still to be split
    current, labels = psi, list(range(1, n + 1))
    while True:
        m = current.n_sites
        if m == 1:
            blocks.append([labels[0]])
            factors.append(current)
            break
        comps = _pair_components(current, threshold)
        local, border = _minimal_block(current, 1, comps, tol)
        flagged |= border
        if len(local) == m:
            blocks.append(labels)
            factors.append(current)
            break
        block_vec, rest_vec = _split(current, local)
        blocks.append([labels[s - 1] for s in local])
        factors.append(PureState.from_vector(block_vec, len(local)))
        labels = [lab for i, lab in enumerate(labels, start=1) if i not in local]
        current = PureState.from_vector(rest_vec, len(labels))
    order = sorted(range(len(blocks)), key=lambda i: blocks[i][0])
    return BlockDecomposition(n, [SiteSubset.of(blocks[i], n) for i in order], [factors[i] for i in order], flagged)


@dataclass(frozen=True)
class SiteSplit:
    s1: SiteSubset
    s2: SiteSubset
    cut: SchmidtCut


def s1_at_site(psi: PureState, l: int, tol: float = DEFAULT_TOL,
               decomposition: BlockDecomposition | None = None) -> SiteSplit:
    """Sites genuinely entangled with ``l`` (S1) and the factored remainder (S2).

    S1 is the inseparable block of ``l`` minus ``l``; it is empty when the
    smaller Schmidt weight at ``l`` is at most ``tol``.
    """
    n = psi.n_sites
    cut = schmidt_at_site(psi, l)
    rest = [s for s in range(1, n + 1) if s != l]
    if cut.lambda1 <= tol:
        return SiteSplit(SiteSubset.of([], n), SiteSubset.of(rest, n), cut)
    dec = decomposition or finest_factorization(psi, tol)
    block = dec.block_of(l)
    s1 = [s for s in block if s != l]
    s2 = [s for s in rest if s not in block]
    return SiteSplit(SiteSubset.of(s1, n), SiteSubset.of(s2, n), cut)


@dataclass(frozen=True)
class SiteEntry:
    l: int
    entropy_bits: float
    s1_size: int


@dataclass(frozen=True)
class EBReport:
    per_site: list[SiteEntry]
    eps: float
    delta: float
    tol: float
    eb_count: int
    blocks: list[list[int]]
    flagged: bool

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "tol": self.tol,
            "per_site": [asdict(e) for e in self.per_site],
            "eb_count": self.eb_count,
            "blocks": self.blocks,
            "flagged": self.flagged,
        }


def eb_report(psi: PureState, eps: float = 0.1, delta: float = 0.5, tol: float = DEFAULT_TOL) -> EBReport:
    """Count sites with ``E(l) >= eps`` bits and ``|S1(l)| >= delta * N``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    n = psi.n_sites
    dec = finest_factorization(psi, tol)
    entries = []
    for l in range(1, n + 1):
        split = s1_at_site(psi, l, tol, dec)
        e = 0.0 if len(split.s1) == 0 else split.cut.entropy
        entries.append(SiteEntry(l, e, len(split.s1)))
    count = sum(1 for e in entries if e.entropy_bits >= eps and e.s1_size >= delta * n)
    return EBReport(entries, eps, delta, tol, count, dec.partition(), dec.flagged)


def apply_local(amps: np.ndarray, n: int, site: int, op: np.ndarray) -> np.ndarray:
    """Apply a 2x2 operator to one site."""
    t = as_tensor(amps, n)
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [site - 1])), 0, site - 1)
    return from_tensor(t)


def schmidt_paulis(cut: SchmidtCut) -> dict[str, np.ndarray]:
    """The operators t_x, t_y, t_z built from the Schmidt vectors at a site."""
    x0, x1 = cut.xi0, cut.xi1
    p01 = np.outer(x0, x1.conj())
    p10 = p01.conj().T
    return {
        "x": p01 + p10,
        "y": -1j * p01 + 1j * p10,
        "z": np.outer(x0, x0.conj()) - np.outer(x1, x1.conj()),
    }


@dataclass(frozen=True)
class InequalityRow:
    kind: str
    l_prime: int | None
    alpha: str | None
    beta: str | None
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-9


@dataclass(frozen=True)
class AppendixReport:
    site: int
    lambda0: float
    lambda1: float
    entropy_bits: float
    rows: list[InequalityRow]

    @property
    def all_hold(self) -> bool:
        return all(r.holds for r in self.rows)

    def worst_margin(self) -> float:
        return min(r.margin for r in self.rows)


def appendix_inequalities(psi: PureState, l: int, tol: float = DEFAULT_TOL,
                          decomposition: BlockDecomposition | None = None) -> AppendixReport:
    """Check ``|C(t_a(l), t_b(l'))| <= sqrt(4 lam0 lam1)`` and ``E(l) >= 2 lam1``.

    ``l'`` runs over the rest of the inseparable block of ``l``; the t
    operators at ``l'`` use the Schmidt vectors of ``l'`` itself.
    """
    n = psi.n_sites
    dec = decomposition or finest_factorization(psi, tol)
    block = dec.block_of(l)
    if len(block) < 2:
        raise ValueError(f"site {l} is not in an inseparable block of size >= 2")
    cut = schmidt_at_site(psi, l)
    bound = float(np.sqrt(4 * cut.lambda0 * cut.lambda1))
    amps = psi.amplitudes
    t_l = schmidt_paulis(cut)
    images_l = {a: apply_local(amps, n, l, op) for a, op in t_l.items()}
    means_l = {a: np.vdot(amps, v).real for a, v in images_l.items()}
    rows = []
    for lp in block:
        if lp == l:
            continue
        t_lp = schmidt_paulis(schmidt_at_site(psi, lp))
        for b, op in t_lp.items():
            img = apply_local(amps, n, lp, op)
            mean_b = np.vdot(amps, img).real
            for a, img_a in images_l.items():
                # operators on different sites commute, so <t_a t_b> is real
                c = np.vdot(img_a, img).real - means_l[a] * mean_b
                rows.append(InequalityRow("correlation", lp, a, b, abs(float(c)), bound))
    rows.append(InequalityRow("entropy", None, None, None, 2 * cut.lambda1, cut.entropy))
    return AppendixReport(l, cut.lambda0, cut.lambda1, cut.entropy, rows)
