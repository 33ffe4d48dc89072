import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from macrosup.factorize import (
    appendix_inequalities,
    eb_report,
    finest_factorization,
    is_product_across,
    s1_at_site,
)
from macrosup.qstate import InfeasibleSize, PureState, basis_state, make_state, random_haar, tensor_product


def bell():
    v = np.zeros(4, dtype=complex)
    v[[0, 3]] = 1 / np.sqrt(2)
    return PureState(2, v)


def test_ghz3_bell_zero():
    psi = tensor_product(make_state("ghz", 3), bell(), basis_state([0]))
    dec = finest_factorization(psi)
    assert dec.partition() == [[1, 2, 3], [4, 5], [6]]
    assert dec.reconstruct().fidelity(psi) == pytest.approx(1.0)
    assert not dec.flagged


def _shuffled_product(rng, sizes):
    """Product of Haar factors with the sites relabelled by a random permutation."""
    n = sum(sizes)
    psi = tensor_product(*[random_haar(k, rng) for k in sizes])
    perm = rng.permutation(n)
    t = psi.tensor().transpose(perm)
    vec = t.reshape(-1, order="F")
    inv = np.argsort(perm)
    blocks, start = [], 0
    for k in sizes:
        blocks.append(sorted(int(inv[j]) + 1 for j in range(start, start + k)))
        start += k
    return PureState.from_vector(vec, n), sorted(blocks)


@given(seed=st.integers(0, 10 ** 6), sizes=st.lists(st.integers(1, 3), min_size=1, max_size=3))
def test_recovers_planted_blocks(seed, sizes):
    rng = np.random.default_rng(seed)
    psi, blocks = _shuffled_product(rng, sizes)
    if psi.n_sites < 2:
        return
    dec = finest_factorization(psi)
    assert dec.partition() == blocks
    assert dec.reconstruct().fidelity(psi) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    psi, _ = _shuffled_product(rng, [2, 1, 3])
    assert finest_factorization(psi).partition() == oracles.finest_blocks(psi.amplitudes, 6)


def test_cluster_is_one_block_despite_no_pair_correlations():
    dec = finest_factorization(make_state("cluster", 6))
    assert dec.partition() == [list(range(1, 7))]


@given(seed=st.integers(0, 10 ** 6))
def test_idempotent(seed):
    rng = np.random.default_rng(seed)
    psi, _ = _shuffled_product(rng, [2, 2, 1])
    for f in finest_factorization(psi).factors:
        if f.n_sites > 1:
            assert len(finest_factorization(f).blocks) == 1


def test_product_test_and_limits():
    psi = tensor_product(bell(), basis_state([1]))
    assert is_product_across(psi, [3])
    assert not is_product_across(psi, [1])
    with pytest.raises(InfeasibleSize):
        finest_factorization(PureState(17, np.eye(1, 2 ** 17, dtype=complex)[0]))


def test_s1_for_ghz_times_zero():
    psi = tensor_product(make_state("ghz", 3), basis_state([0]))
    split = s1_at_site(psi, 1)
    assert split.s1.members == (2, 3)
    assert split.s2.members == (4,)
    assert len(s1_at_site(psi, 4).s1) == 0


@pytest.mark.parametrize("n", [6, 8, 10])
def test_eb_counts(n):
    assert eb_report(make_state("cluster", n)).eb_count == n
    assert eb_report(make_state("ghz", n)).eb_count == n
    assert eb_report(make_state("product", n)).eb_count == 0
    assert eb_report(make_state("rvb", n)).eb_count >= n // 2


def test_eb_thresholds_validated():
    with pytest.raises(ValueError):
        eb_report(make_state("ghz", 4), eps=0)
    with pytest.raises(ValueError):
        eb_report(make_state("ghz", 4), delta=1)


def test_eb_respects_delta():
    psi = tensor_product(make_state("ghz", 3), make_state("ghz", 3))
    assert eb_report(psi, delta=0.5).eb_count == 0
    assert eb_report(psi, delta=0.3).eb_count == 6


def test_appendix_ghz_is_tight():
    rep = appendix_inequalities(make_state("ghz", 6), 2)
    assert rep.all_hold
    assert rep.worst_margin() == pytest.approx(0.0, abs=1e-12)


def test_appendix_rejects_singleton_block():
    psi = tensor_product(make_state("ghz", 3), basis_state([0]))
    with pytest.raises(ValueError):
        appendix_inequalities(psi, 4)


@given(n=st.integers(4, 6), seed=st.integers(0, 10 ** 6))
def test_appendix_random(n, seed):
    psi = random_haar(n, seed)
    dec = finest_factorization(psi)
    for l in range(1, n + 1):
        rep = appendix_inequalities(psi, l, decomposition=dec)
        assert all(r.lhs <= r.rhs + 1e-8 for r in rep.rows)
