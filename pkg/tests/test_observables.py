import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from macrosup.observables import (
    M_X,
    M_Z,
    AdditiveObservable,
    LocalObservable,
    build_fluctuation_matrix,
    correlation,
    correlation_census,
    estimate_index_p,
    max_fluctuation,
)
from macrosup.qstate import make_state, random_haar, tensor_product
from macrosup.validation import random_feasible


def test_matrix_matches_kron_oracle():
    a = random_feasible(4, np.random.default_rng(0))
    np.testing.assert_allclose(a.matrix(), oracles.additive(a.coeffs), atol=1e-14)


def test_apply_matches_matrix():
    rng = np.random.default_rng(1)
    a = random_feasible(5, rng)
    psi = random_haar(5, rng)
    np.testing.assert_allclose(a.apply(psi.amplitudes), oracles.additive(a.coeffs) @ psi.amplitudes, atol=1e-13)


def test_local_norm_enforced():
    with pytest.raises(ValueError, match="spectral norm"):
        LocalObservable(1, [1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        AdditiveObservable(np.array([[2.0, 0, 0]]))


@pytest.mark.parametrize("n", [2, 4, 6])
def test_ghz_mz_fluctuation(n):
    psi = make_state("ghz", n)
    assert correlation(M_Z(n), M_Z(n), psi) == pytest.approx(n * n, rel=1e-12)
    assert correlation(M_X(n), M_X(n), psi) == pytest.approx(n if n > 2 else 2 * n, rel=1e-12)


def test_ghz6_max_fluctuation_is_mz():
    res = max_fluctuation(make_state("ghz", 6))
    assert res.value == pytest.approx(36)
    np.testing.assert_allclose(np.abs(res.argmax.coeffs), np.tile([0, 0, 1], (6, 1)), atol=1e-9)


def test_product_e1_is_one():
    assert max_fluctuation(make_state("product", 6)).top_eigenvalue == pytest.approx(1.0)


@given(n=st.integers(2, 5), seed=st.integers(0, 10 ** 6))
def test_fluctuation_matrix_matches_oracle(n, seed):
    psi = random_haar(n, seed)
    got = build_fluctuation_matrix(psi).entries
    np.testing.assert_allclose(got, oracles.fluctuation_matrix(psi.amplitudes, n), atol=1e-12)


@given(n=st.integers(2, 7), seed=st.integers(0, 10 ** 6))
def test_quadratic_form_equals_correlation(n, seed):
    rng = np.random.default_rng(seed)
    psi = random_haar(n, rng)
    a = random_feasible(n, rng)
    fm = build_fluctuation_matrix(psi)
    want = oracles.correlation(oracles.additive(a.coeffs), oracles.additive(a.coeffs), psi.amplitudes)
    assert fm.quadratic_form(a) == pytest.approx(want, abs=1e-9)
    assert correlation(a, a, psi) == pytest.approx(want, abs=1e-9)


@given(n=st.integers(2, 6), seed=st.integers(0, 10 ** 6))
def test_relaxation_bounds_feasible(n, seed):
    rng = np.random.default_rng(seed)
    psi = random_haar(n, rng)
    res = max_fluctuation(psi)
    assert res.value == pytest.approx(oracles.max_fluctuation(psi.amplitudes, n), abs=1e-9)
    for _ in range(5):
        a = random_feasible(n, rng)
        assert correlation(a, a, psi) <= res.value + 1e-9
    assert res.feasible_value <= res.value + 1e-9


@given(seed=st.integers(0, 10 ** 6))
def test_additive_across_product_blocks(seed):
    rng = np.random.default_rng(seed)
    f1, f2 = random_haar(2, rng), random_haar(3, rng)
    psi = tensor_product(f1, f2)
    a = random_feasible(5, rng)
    a1, a2 = AdditiveObservable(a.coeffs[:2]), AdditiveObservable(a.coeffs[2:])
    total = correlation(a1, a1, f1) + correlation(a2, a2, f2)
    assert correlation(a, a, psi) == pytest.approx(total, abs=1e-10)


def test_census_counts():
    n = 6
    c = correlation_census(make_state("ghz", n), M_Z(n), 0.1)
    assert c.r1_count == n * n and c.r2_count == 0
    c = correlation_census(make_state("product", n), M_Z(n), 0.1)
    assert c.r1_count == 0


def test_index_p_fit_needs_three_points():
    with pytest.raises(ValueError):
        estimate_index_p("ghz", [4, 6])
    fit = estimate_index_p("ghz", [4, 6, 8, 10])
    assert fit.index_hat == pytest.approx(2.0, abs=1e-9)
    assert fit.slope == pytest.approx(2.0, abs=1e-9)
