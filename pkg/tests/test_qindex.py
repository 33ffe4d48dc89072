import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from macrosup.observables import M_Z
from macrosup.qindex import (
    SEP_CONSTANT,
    OptimizerSettings,
    _dense_value_grad,
    _lowrank_value_grad,
    bures_distance,
    calibrate_sep_constant,
    double_commutator,
    estimate_index_q,
    max_double_commutator,
    relative_entropy,
    root_fidelity,
    separable_distance_bound,
    trace_distance,
    trace_norm,
    trace_norm_pure_fast,
)
from macrosup.qstate import InfeasibleSize, make_mixed, make_state, random_density, random_haar
from macrosup.validation import random_feasible

FAST = OptimizerSettings(starts=6)


def test_double_commutator_matches_oracle():
    rng = np.random.default_rng(0)
    rho = random_density(3, rng)
    a = random_feasible(3, rng)
    want = oracles.double_commutator(oracles.additive(a.coeffs), rho.matrix)
    np.testing.assert_allclose(double_commutator(a, rho), want, atol=1e-13)
    assert trace_norm(want) == pytest.approx(oracles.trace_norm(want))


@pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
def test_ghz_mz_double_commutator(n):
    psi = make_state("ghz", n)
    assert trace_norm(double_commutator(M_Z(n), psi)) == pytest.approx(4 * n * n, rel=1e-12)
    assert trace_norm_pure_fast(M_Z(n), psi) == pytest.approx(4 * n * n, rel=1e-12)


@given(n=st.integers(2, 7), seed=st.integers(0, 10 ** 6))
def test_fast_path_equals_dense(n, seed):
    rng = np.random.default_rng(seed)
    psi = random_haar(n, rng)
    a = random_feasible(n, rng)
    dense = oracles.trace_norm(oracles.double_commutator(oracles.additive(a.coeffs), oracles.projector(psi.amplitudes)))
    assert trace_norm_pure_fast(a, psi) == pytest.approx(dense, abs=1e-8)


@pytest.mark.parametrize("rank", [1, 2, 16])
def test_gradients_match_finite_differences(rank):
    rng = np.random.default_rng(rank)
    rho = random_density(4, rng, rank)
    c = rng.standard_normal((4, 3))
    w, v = np.linalg.eigh(rho.matrix)
    keep = w > 1e-12
    funs = [lambda x: _dense_value_grad(x, rho.matrix, 4)]
    if 3 * keep.sum() < 16:
        funs.append(lambda x: _lowrank_value_grad(x, v[:, keep], w[keep], 4))
    for fun in funs:
        val, grad = fun(c)
        a = oracles.additive(c)
        assert val == pytest.approx(oracles.trace_norm(oracles.double_commutator(a, rho.matrix)), rel=1e-10)
        h = 1e-6
        num = np.zeros_like(c)
        for idx in np.ndindex(*c.shape):
            e = np.zeros_like(c)
            e[idx] = h
            num[idx] = (fun(c + e)[0] - fun(c - e)[0]) / (2 * h)
        np.testing.assert_allclose(grad, num, atol=1e-6)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_optimizer_reaches_ghz_value(n):
    res = max_double_commutator(make_state("ghz", n), FAST, seed=0)
    assert res.value >= 4 * n * n * (1 - 1e-9)


def test_optimizer_is_deterministic():
    a = max_double_commutator(make_mixed("ghz-mixture", 4), FAST, seed=3)
    b = max_double_commutator(make_mixed("ghz-mixture", 4), FAST, seed=3)
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmax.coeffs, b.argmax.coeffs)


def test_lowrank_and_dense_paths_agree_on_value():
    rho = make_mixed("ghz-mixture", 5)
    a = random_feasible(5, np.random.default_rng(4))
    w, v = np.linalg.eigh(rho.matrix)
    keep = w > 1e-12
    lr = _lowrank_value_grad(a.coeffs, v[:, keep], w[keep], 5)[0]
    dn = _dense_value_grad(a.coeffs, rho.matrix, 5)[0]
    assert lr == pytest.approx(dn, rel=1e-10)


def test_size_limits():
    with pytest.raises(InfeasibleSize):
        max_double_commutator(make_state("ghz", 13))


def test_q_fit_macro_mixture():
    fit = estimate_index_q("ghz-mixture", [4, 6, 8], seed=7, settings=FAST)
    assert fit.index_hat <= 1.2


def _pairs(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 4))
        yield random_density(n, rng, int(rng.integers(1, 2 ** n + 1))), random_density(n, rng), rng


def test_distances_against_references():
    rho = make_mixed("ghz", 3)
    sigma = make_mixed("ghz-mixture", 3)
    assert trace_distance(rho, sigma) == pytest.approx(1.0)
    assert relative_entropy(rho, sigma) == pytest.approx(np.log(2))
    assert relative_entropy(sigma, rho) == np.inf
    assert root_fidelity(rho, sigma) == pytest.approx(np.sqrt(0.5))
    assert bures_distance(rho, rho) == pytest.approx(0.0, abs=1e-7)


def test_relative_entropy_matches_matrix_log():
    from scipy.linalg import logm

    rng = np.random.default_rng(5)
    rho, sigma = random_density(2, rng), random_density(2, rng)
    want = np.trace(rho.matrix @ (logm(rho.matrix) - logm(sigma.matrix))).real
    assert relative_entropy(rho, sigma) == pytest.approx(want, rel=1e-8)


def test_pinsker_bures_contraction_sample():
    for rho, sigma, rng in _pairs(200, 11):
        t = trace_distance(rho, sigma)
        assert relative_entropy(rho, sigma) >= 0.5 * t * t - 1e-9
        assert 1 - root_fidelity(rho, sigma) >= t * t / 8 - 1e-9
        a = random_feasible(rho.n_sites, rng)
        lhs = trace_norm(double_commutator(a, rho.matrix - sigma.matrix))
        assert lhs <= 4 * rho.n_sites ** 2 * t + 1e-8


def test_sep_constant_calibration_matches_default():
    est, best = calibrate_sep_constant(n_values=range(4, 7), samples=2, settings=FAST)
    assert est <= SEP_CONSTANT
    assert est > 0.9 * SEP_CONSTANT


def test_separable_bound_zero_for_product_and_positive_for_ghz():
    assert separable_distance_bound(make_state("product", 6), settings=FAST).one_norm == 0.0
    b = separable_distance_bound(make_state("ghz", 8), settings=FAST)
    assert b.one_norm == pytest.approx((4 * 64 - SEP_CONSTANT * 8) / (4 * 64), rel=1e-9)
    assert b.relative_entropy == pytest.approx(b.one_norm ** 2 / 2)
    # separable states sit at zero distance; any lower bound must respect that
    mix = make_mixed("ghz-mixture", 6)
    assert separable_distance_bound(mix, settings=FAST).one_norm == 0.0
