import math

import numpy as np
import pytest

from quench_entanglement import anderson, bounds, gaussian as g, lattice as lat, negativity as ng
from quench_entanglement.errors import InvalidParameterError

INF = math.inf


def _state(L, H, T, betas, t):
    E = g.propagator(H, t)
    return E, g.evolve_covariance(g.thermal_state(H, T, betas), E)


def test_quasi_norm_examples():
    A = np.diag([1.0, 2.0])
    assert bounds.schatten_quasi_norm_alpha_power(A, 1.0) == pytest.approx(3.0)
    assert bounds.schatten_quasi_norm_alpha_power(A, 0.5) == pytest.approx(1 + math.sqrt(2))
    assert bounds.schatten_quasi_norm_alpha_power(A, 0.5) == pytest.approx(2.41421, abs=1e-5)


def test_quasi_norm_orthogonal_invariance():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(6, 6))
    U, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    V, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    for alpha in (0.25, 0.5, 1.0):
        assert bounds.schatten_quasi_norm_alpha_power(U @ A @ V, alpha) == pytest.approx(
            bounds.schatten_quasi_norm_alpha_power(A, alpha), rel=1e-12
        )


@pytest.mark.parametrize("alpha", [0.0, -0.5, 1.5])
def test_quasi_norm_alpha_range(alpha):
    with pytest.raises(InvalidParameterError):
        bounds.schatten_quasi_norm_alpha_power(np.eye(2), alpha)


def test_block_decomposition_inequality():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        A = rng.normal(size=(2 * n, 2 * n)) * rng.exponential(size=(2 * n, 2 * n))
        for alpha in (0.25, 0.5, 1.0):
            full = bounds.schatten_quasi_norm_alpha_power(A, alpha)
            parts = sum(bounds.schatten_quasi_norm_alpha_power(b, alpha) for b in bounds.split_blocks(A))
            assert full <= 2 * parts + 1e-12


def test_elementwise_dominates_quasi_norm():
    rng = np.random.default_rng(6)
    for _ in range(100):
        A = rng.normal(size=(5, 5))
        for alpha in (0.25, 0.5, 1.0):
            assert bounds.schatten_quasi_norm_alpha_power(A, alpha) <= bounds.elementwise_alpha_power(A, alpha) + 1e-12


def test_factorization_matches_inverse_covariance(chain10):
    L, H = chain10
    T = lat.slab_tiling(L, 0, 3)
    betas = [INF, 0.8, 2.0, INF]
    for t in (0.0, 1.0, 6.0):
        E = g.propagator(H, t)
        f = bounds.build_factors(H, T, betas, t, 0.5)
        inv = g.inverse_covariance(H, T, betas, E)
        assert np.linalg.norm(f.M1 @ f.M2 - inv) <= 1e-8 * np.linalg.norm(inv)


def test_factors_single_ground_tile_t0(chain10):
    L, H = chain10
    f = bounds.build_factors(H, lat.single_tile(L), [INF], 0.0, 0.5)
    root = anderson.apply_function(H, np.sqrt)
    iroot = anderson.apply_function(H, lambda x: x**-0.5)
    Z, I = np.zeros((10, 10)), np.eye(10)
    assert np.allclose(f.M1, np.block([[root, Z], [Z, I]]), atol=1e-12)
    assert np.allclose(f.M2, np.block([[I, Z], [Z, iroot]]), atol=1e-12)


def test_d_plus_envelope():
    L = lat.build_box(2, [(0, 4), (0, 4)])
    for r in range(10):
        H = anderson.build_effective_hamiltonian(L, anderson.sample_disorder(L, 1.5, 4, r))
        for T in (lat.single_tile(L), lat.singleton_tiling(L), lat.slab_tiling(L, 1, 2)):
            f = bounds.build_factors(H, T, [0.5] * T.M, 1.0, 0.5)
            assert np.linalg.norm(f.D_plus, 2) <= math.sqrt(4 * 2 + 1.5) + 1e-10


def test_bound_zero_at_t0_for_aligned_cut(chain10):
    L, H = chain10
    T = lat.slab_tiling(L, 0, 2)
    f = bounds.build_factors(H, T, [INF, 1.0, INF, 2.0, INF], 0.0, 0.25)
    mask = ng.BipartitionMask(np.isin(np.arange(10), np.r_[T.tile_sites[0], T.tile_sites[2]]))
    assert bounds.negativity_upper_bound(f, mask) == 0.0


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("t", [0.3, 1.0, 3.0, 10.0])
def test_bound_dominates_negativity(chain10, alpha, t):
    L, H = chain10
    for T, betas in ((lat.singleton_tiling(L), [INF] * 10), (lat.slab_tiling(L, 0, 5), [0.4, INF])):
        _, gt = _state(L, H, T, betas, t)
        f = bounds.build_factors(H, T, betas, t, alpha)
        for inside in ([0, 1, 2, 3, 4], [2, 3], [9]):
            mask = ng.BipartitionMask.from_indices(10, inside)
            assert bounds.negativity_upper_bound(f, mask) >= ng.log_negativity(gt, mask).value - 1e-10


def test_bound_alpha_override(chain10):
    L, H = chain10
    T = lat.singleton_tiling(L)
    mask = ng.BipartitionMask.from_indices(10, range(5))
    f = bounds.build_factors(H, T, [INF] * 10, 1.0, 0.5)
    g1 = bounds.build_factors(H, T, [INF] * 10, 1.0, 1.0)
    assert bounds.negativity_upper_bound(f, mask, alpha=1.0) == pytest.approx(bounds.negativity_upper_bound(g1, mask))


def test_dual_graph_norm_single_tile(chain10):
    L, H = chain10
    for beta in (INF, 0.3, 2.0):
        lhs, rhs = bounds.dual_graph_norm_check(H, lat.single_tile(L), [beta])
        assert rhs == 1.0
        expected = np.linalg.norm(np.diag(np.tanh(beta * np.sqrt(H.eigenvalues))), 2)
        assert lhs == pytest.approx(expected, rel=1e-10)
        assert lhs <= rhs + 1e-10


def test_dual_graph_norm_chain_singletons():
    L = lat.build_box(1, [(0, 29)])
    for r in range(20):
        H = anderson.build_effective_hamiltonian(L, anderson.sample_disorder(L, 1.0, 13, r))
        lhs, rhs = bounds.dual_graph_norm_check(H, lat.singleton_tiling(L), [INF] * 30)
        assert rhs == pytest.approx(math.sqrt(3))
        assert lhs <= rhs + 1e-10


def test_dual_graph_norm_checkerboard_rhs():
    L = lat.build_box(2, [(0, 4), (0, 4)])
    H = anderson.build_effective_hamiltonian(L, anderson.sample_disorder(L, 1.0, 1, 0))
    lhs, rhs = bounds.dual_graph_norm_check(H, lat.singleton_tiling(L), [INF] * 25)
    assert rhs == pytest.approx(math.sqrt(5))
    assert lhs <= rhs + 1e-10


def test_naive_bound_is_diagnostic_only(chain10):
    L, H = chain10
    T = lat.singleton_tiling(L)
    norm, beta_max = bounds.naive_d_minus_bound(T, g.tile_hamiltonians(H, T), [0.5] * 10)
    assert norm <= beta_max + 1e-12
    norm_inf, beta_inf = bounds.naive_d_minus_bound(T, g.tile_hamiltonians(H, T), [INF] * 10)
    assert math.isinf(beta_inf) and math.isfinite(norm_inf)


def _eta_for_coth(value):
    # coth(eta / 8) = value  ->  eta = 8 artanh(1 / value)
    return 8 * math.atanh(1 / value)


def test_theoretical_prefactor_example():
    eta = _eta_for_coth(2.0)
    value = bounds.theoretical_prefactor(0.5, 1.0, eta, 1, 0.0)
    assert value == pytest.approx(576 * math.sqrt(2) * 8, rel=1e-12)
    assert value == pytest.approx(6516.70, abs=0.01)
    truncated = sum(math.exp(-eta * abs(x) / 4) for x in range(-200, 201))
    assert bounds.lattice_exponential_sum(eta, 1) == pytest.approx(truncated, abs=1e-10)


def test_lattice_sum_2d_against_truncation():
    eta = 0.9
    truncated = sum(math.exp(-eta * (abs(x) + abs(y)) / 4) for x in range(-200, 201) for y in range(-200, 201))
    assert bounds.lattice_exponential_sum(eta, 2) == pytest.approx(truncated, rel=1e-10)


def test_lattice_sum_at_least_one():
    for eta in (0.01, 1.0, 50.0):
        for d in (1, 2, 3):
            assert bounds.lattice_exponential_sum(eta, d) >= 1


def test_prefactor_decreases_with_eta():
    a = bounds.theoretical_prefactor(0.5, 1.0, 0.3, 2, 1.0)
    b = bounds.theoretical_prefactor(0.5, 1.0, 0.6, 2, 1.0)
    assert b < a


@pytest.mark.parametrize("eta", [0.0, -1.0])
def test_prefactor_rejects_nonpositive_eta(eta):
    with pytest.raises(InvalidParameterError):
        bounds.theoretical_prefactor(0.5, 1.0, eta, 1, 1.0)


def test_theorem_rhs():
    pre = bounds.theoretical_prefactor(0.5, 2.0, 0.4, 1, 1.0)
    assert bounds.theorem_rhs(0.5, 2.0, 0.4, 1, 1.0, 2, 2) == pytest.approx(pre * (1 + 2**0.125) * 2)
