"""Seeded property suite behind ``macrosup validate``.

Each check draws its own corpus from ``numpy.random.default_rng([seed, k])``
and returns a :class:`PropertyResult`; nothing here is tuned to pass, the
tolerances are the documented ones.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backaction, bipartite, factorize, observables, qindex, qstate
from .observables import AdditiveObservable
from .qstate import make_state, random_haar, random_density, reduced_density


@dataclass
class PropertyResult:
    name: str
    checked: int
    violations: int
    worst_excess: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _tally(name, excesses, tol):
    """Violations are excesses above ``tol``; ``excesses`` are lhs - rhs values."""
    excesses = np.asarray(list(excesses), dtype=float)
    worst = float(excesses.max()) if excesses.size else float("-inf")
    return PropertyResult(name, int(excesses.size), int(np.sum(excesses > tol)), worst)


def random_feasible(n: int, rng: np.random.Generator) -> AdditiveObservable:
    """Random additive observable with per-site Bloch norms uniform in [0, 1]."""
    c = rng.standard_normal((n, 3))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    return AdditiveObservable(c * rng.uniform(0, 1, size=(n, 1)))


def _random_subset(n, rng):
    k = int(rng.integers(1, n))
    return sorted(rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist())


def check_schmidt_symmetry(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 1])
    ex = []
    for _ in range(max(10, size // 10)):
        n = int(rng.integers(2, 9))
        psi = random_haar(n, rng)
        part = _random_subset(n, rng)
        rest = [s for s in range(1, n + 1) if s not in part]
        a = np.sort(np.linalg.eigvalsh(reduced_density(psi, part).matrix))[::-1]
        b = np.sort(np.linalg.eigvalsh(reduced_density(psi, rest).matrix))[::-1]
        k = min(a.size, b.size)
        ex.append(max(np.abs(a[:k] - b[:k]).max(), np.abs(a[k:]).max(initial=0), np.abs(b[k:]).max(initial=0)))
    return _tally("schmidt_symmetry", ex, 1e-10 - skew)


def check_partial_trace_linearity(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 2])
    ex = []
    for _ in range(max(10, size // 20)):
        n = int(rng.integers(2, 7))
        comps = [random_haar(n, rng) for _ in range(3)]
        w = rng.dirichlet(np.ones(3))
        w[-1] = 1 - w[:-1].sum()
        rho = qstate.mix(list(zip(w, comps)))
        part = _random_subset(n, rng)
        lhs = reduced_density(rho, part).matrix
        rhs = sum(wi * reduced_density(c, part).matrix for wi, c in zip(w, comps))
        ex.append(np.abs(lhs - rhs).max())
    return _tally("partial_trace_linearity", ex, 1e-12 - skew)


def check_quadratic_form(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 3])
    ex = []
    for _ in range(100):
        n = int(rng.integers(2, 9))
        psi = random_haar(n, rng)
        a = random_feasible(n, rng)
        fm = observables.build_fluctuation_matrix(psi)
        ex.append(abs(fm.quadratic_form(a) - observables.correlation(a, a, psi)))
    return _tally("fluctuation_quadratic_form", ex, 1e-9 - skew)


def check_relaxation_soundness(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 4])
    ex = []
    for _ in range(max(10, size // 10)):
        n = int(rng.integers(2, 9))
        psi = random_haar(n, rng)
        top = observables.max_fluctuation(psi).value
        for _ in range(5):
            a = random_feasible(n, rng)
            ex.append(observables.correlation(a, a, psi) - top)
    return _tally("relaxation_soundness", ex, 1e-9 - skew)


def _density_pairs(count, rng, full_sigma=False):
    for _ in range(count):
        n = int(rng.integers(1, 4))
        r1 = int(rng.integers(1, 2 ** n + 1))
        r2 = 2 ** n if full_sigma else int(rng.integers(1, 2 ** n + 1))
        yield random_density(n, rng, r1), random_density(n, rng, r2)


def check_pinsker(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 5])
    ex = []
    # full-rank sigma keeps every relative entropy finite
    for rho, sigma in _density_pairs(size, rng, full_sigma=True):
        s = qindex.relative_entropy(rho, sigma)
        t = qindex.trace_distance(rho, sigma)
        ex.append(0.5 * t * t - s)
    return _tally("pinsker", ex, 1e-9 - skew)


def check_bures_chain(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 5])
    ex = []
    for rho, sigma in _density_pairs(size, rng):
        t = qindex.trace_distance(rho, sigma)
        ex.append(t * t / 8 - (1 - qindex.root_fidelity(rho, sigma)))
    return _tally("bures_chain", ex, 1e-9 - skew)


def check_contraction(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 6])
    ex = []
    for _ in range(max(10, size // 2)):
        n = int(rng.integers(1, 4))
        rho, sigma = random_density(n, rng), random_density(n, rng)
        a = random_feasible(n, rng)
        lhs = qindex.trace_norm(qindex.double_commutator(a, rho.matrix - sigma.matrix))
        ex.append(lhs - 4 * n * n * qindex.trace_distance(rho, sigma))
    return _tally("double_commutator_contraction", ex, 1e-8 - skew)


def check_fast_trace_norm(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 7])
    ex = []
    for _ in range(max(10, size // 5)):
        n = int(rng.integers(2, 9))
        psi = random_haar(n, rng)
        a = random_feasible(n, rng)
        dense = qindex.trace_norm(qindex.double_commutator(a, psi))
        ex.append(abs(dense - qindex.trace_norm_pure_fast(a, psi)))
    return _tally("trace_norm_fast_path", ex, 1e-8 - skew)


SYMMETRIC_FAMILIES = (("ghz", {}), ("w", {}), ("dicke", None), ("product", {}))


def check_concurrence_ceiling(size, seed, skew=0.0):
    ex = []
    for n in range(4, 9):
        states = [make_state("ghz", n), make_state("w", n), make_state("product", n)]
        states += [make_state("dicke", n, {"k": k}) for k in range(1, n)]
        for psi in states:
            ex.append(bipartite.concurrence(psi, (1, 2)) - 2.0 / n)
    return _tally("concurrence_ceiling", ex, 1e-9 - skew)


def check_entropy_symmetry(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 8])
    ex = []
    for _ in range(max(10, size // 10)):
        n = int(rng.integers(2, 9))
        psi = random_haar(n, rng)
        part = _random_subset(n, rng)
        rest = [s for s in range(1, n + 1) if s not in part]
        ex.append(abs(bipartite.cut_entropy(psi, part) - bipartite.cut_entropy(psi, rest)))
        l = int(rng.integers(1, n + 1))
        ex.append(abs(bipartite.schmidt_at_site(psi, l).entropy - bipartite.cut_entropy(psi, [l])))
    return _tally("entropy_symmetry", ex, 1e-10 - skew)


def check_appendix(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 9])
    ex = []
    for _ in range(size):
        n = int(rng.integers(4, 7))
        psi = random_haar(n, rng)
        dec = factorize.finest_factorization(psi)
        for l in range(1, n + 1):
            rep = factorize.appendix_inequalities(psi, l, decomposition=dec)
            ex.extend(r.lhs - r.rhs for r in rep.rows)
    return _tally("appendix_inequalities", ex, 1e-8 - skew)


def _factorized_state(rng):
    sizes = []
    while sum(sizes) < 6:
        sizes.append(int(rng.integers(1, 4)))
    factors = [random_haar(k, rng) for k in sizes]
    return qstate.tensor_product(*factors), sizes, factors


def check_block_additivity(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 10])
    ex = []
    for _ in range(max(10, size // 20)):
        psi, sizes, factors = _factorized_state(rng)
        a = random_feasible(psi.n_sites, rng)
        total, start = 0.0, 0
        for k, f in zip(sizes, factors):
            sub = AdditiveObservable(a.coeffs[start:start + k])
            total += observables.correlation(sub, sub, f)
            start += k
        ex.append(abs(observables.correlation(a, a, psi) - total))
    return _tally("block_additivity", ex, 1e-9 - skew)


def check_factorization(size, seed, skew=0.0):
    """Reconstruction, idempotence and inseparability of each factor."""
    rng = np.random.default_rng([seed, 11])
    ex = []
    for _ in range(max(10, size // 20)):
        psi, _, _ = _factorized_state(rng)
        dec = factorize.finest_factorization(psi)
        ex.append(1 - 1e-9 - dec.reconstruct().fidelity(psi))
        for f in dec.factors:
            ex.append(float(len(factorize.finest_factorization(f).blocks) - 1))
    return _tally("factorization", ex, 0.0 - skew)


def check_measurement(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 12])
    ex = []
    for _ in range(max(10, size // 20)):
        n = int(rng.integers(2, 7))
        psi = random_haar(n, rng) if rng.random() < 0.5 else _factorized_state(rng)[0]
        n = psi.n_sites
        l = int(rng.integers(1, n + 1))
        for basis in ("schmidt", "computational"):
            outs = backaction.measure_site(psi, l, basis)
            ex.append(abs(sum(o.probability for o in outs) - 1) - 1e-12)
            rest = [s for s in range(1, n + 1) if s != l]
            before = reduced_density(psi, rest).matrix
            ex.append(np.abs(backaction.outcome_average(outs) - before).max() - 1e-10)
        rep = backaction.backaction_report(psi, l, tol=1e-8)
        split = factorize.s1_at_site(psi, l)
        ex.append(float(rep.affected_sites - len(split.s1)))
        ex.append(abs(rep.info_gain_bits - split.cut.entropy) - 1e-10)
    return _tally("measurement_consistency", ex, 0.0 - skew)


def check_le_bound(size, seed, skew=0.0):
    rng = np.random.default_rng([seed, 13])
    states = []
    for n in (4, 5):
        states += [make_state(f, n) for f in ("ghz", "cluster", "w")]
    states += [random_haar(int(rng.integers(4, 6)), rng) for _ in range(max(4, size // 20))]
    ex = []
    for i, psi in enumerate(states):
        n = psi.n_sites
        pair = tuple(sorted(rng.choice(np.arange(1, n + 1), size=2, replace=False).tolist()))
        le = bipartite.localizable_entanglement_bruteforce(psi, pair, seed=i)
        ex.append(bipartite.max_pair_correlation(psi, pair) - le)
    return _tally("localizable_entanglement_bound", ex, 0.05 - skew)


def check_index_consistency(size, seed, skew=0.0):
    ex = []
    grids = {"rvb": [4, 8, 12]}
    for fam in ("ghz", "product", "dicke", "w", "cluster", "rvb"):
        grid = grids.get(fam, [4, 6, 8])
        p = observables.estimate_index_p(fam, grid)
        q = qindex.estimate_index_q(fam, grid, seed=seed,
                                    settings=qindex.OptimizerSettings(starts=8))
        ex.append(abs(p.index_hat - q.index_hat) - 0.15)
        ex.append(max(0.9 - p.index_hat, p.index_hat - 2.1))
    return _tally("index_p_q_consistency", ex, 0.0 - skew)


CHECKS = [
    check_schmidt_symmetry,
    check_partial_trace_linearity,
    check_quadratic_form,
    check_relaxation_soundness,
    check_pinsker,
    check_bures_chain,
    check_contraction,
    check_fast_trace_norm,
    check_concurrence_ceiling,
    check_entropy_symmetry,
    check_appendix,
    check_block_additivity,
    check_factorization,
    check_measurement,
    check_le_bound,
    check_index_consistency,
]


def _timed(job):
    check, size, seed, skew = job
    t0 = time.perf_counter()
    res = check(size, seed, skew)
    res.seconds = time.perf_counter() - t0
    return res


def run_all(corpus_size: int = 1000, seed: int = 0, inject_fault: bool = False,
            workers: int = 1) -> list[PropertyResult]:
    """Run every property in a fixed order.

    ``inject_fault`` shifts each tolerance down by 1e6, far below any
    attainable margin, so every check fails.
    With ``workers > 1`` checks run in a process pool; results keep the
    order of :data:`CHECKS` and each check seeds its own generator, so the
    output does not depend on ``workers``.
    """
    skew = 1e6 if inject_fault else 0.0
    jobs = [(check, corpus_size, seed, skew) for check in CHECKS]
    if workers <= 1:
        return [_timed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_timed, jobs))
