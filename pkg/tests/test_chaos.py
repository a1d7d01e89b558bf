import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stratlim import chaos
from stratlim.chaos import (
    GridChaosFunction,
    Pairing,
    classify_pairing,
    discrete_ito_integral,
    discrete_strat_integral,
    enumerate_pairings,
    gaussian_moment,
    hu_meyer_residual,
    hu_meyer_strat_to_ito,
    hu_meyer_weight,
    ito_to_strat_coefficients,
    random_symmetric_function,
    strat_norm,
    symmetrize,
    trace,
)
from stratlim.grid import GridSpec
from stratlim.random_field import sample_white_noise

GRID = GridSpec(1, 2.0, 8)          # h = 1/4, cells 0..7


def noise_matrix(n_real, seed=0):
    return np.stack([sample_white_noise(GRID, seed, r).increments for r in range(n_real)])


# -- pairings ---------------------------------------------------------------

@pytest.mark.parametrize("two_n,count", [(0, 1), (2, 1), (4, 3), (6, 15), (8, 105), (10, 945)])
def test_pairing_counts(two_n, count):
    ps = enumerate_pairings(two_n)
    assert len(ps) == count == chaos.double_factorial_odd(two_n // 2)
    assert len({p.pair_map for p in ps}) == count


def test_pairing_cap_and_parity():
    with pytest.raises(ValueError):
        enumerate_pairings(14)
    with pytest.raises(ValueError):
        enumerate_pairings(3)


def test_pairing_validation():
    with pytest.raises(ValueError):
        Pairing(2, ((0, 1), (1, 3)))
    with pytest.raises(ValueError):
        Pairing(1, ((1, 0),))
    p = Pairing(2, ((0, 2), (1, 3)))
    assert p.left == (0, 1) and p.right == (2, 3) and p.partner(1) == 3


def test_moment_two_by_two():
    assert np.isclose(gaussian_moment([[1.0, 0.3], [0.3, 1.0]]), 0.3)


def test_fourth_moment():
    assert np.isclose(gaussian_moment(np.ones((4, 4))), 3.0)
    c = 0.4
    cov = np.full((4, 4), c) + (1 - c) * np.eye(4)
    assert np.isclose(gaussian_moment(cov), 3 * c**2)


def test_odd_moment_zero():
    assert gaussian_moment(np.eye(3)) == 0.0


def test_moment_rejects_bad_cov():
    with pytest.raises(ValueError):
        gaussian_moment([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(ValueError):
        gaussian_moment([[1.0, 2.0], [2.0, 1.0]])


def test_moment_matches_mc(rng):
    A = rng.standard_normal((6, 6))
    cov = A @ A.T / 6
    X = rng.multivariate_normal(np.zeros(6), cov, size=200_000)
    p = X.prod(axis=1)
    assert abs(p.mean() - gaussian_moment(cov)) < 4 * p.std(ddof=1) / np.sqrt(p.size)


def test_classification_examples():
    c = classify_pairing(Pairing(1, ((0, 1),)), 1, 1)
    assert (c.crossings, c.n0, c.m0) == (1, 1, 0)
    c = classify_pairing(Pairing(1, ((0, 1),)), 2, 0)
    assert (c.crossings, c.n0, c.m0) == (0, 1, 0)
    for p in enumerate_pairings(4):
        c = classify_pairing(p, 2, 2)
        assert c.n0 <= 1.5 and c.m0 <= 1


def test_classification_parity_mismatch():
    with pytest.raises(ValueError):
        classify_pairing(Pairing(1, ((0, 1),)), 1, 2)


@pytest.mark.parametrize("total", [2, 4, 6, 8])
def test_classification_exhaustive(total):
    for n in range(total + 1):
        m = total - n
        for p in enumerate_pairings(total):
            c = classify_pairing(p, n, m)
            q = c.crossings
            assert (n - q) % 2 == 0 and (m - q) % 2 == 0
            assert c.n0 == (n - q) // 2 + (q + 1) // 2
            assert c.m0 == (m - q) // 2 + q // 2
            assert c.n0 + c.m0 == total // 2
            assert c.n0 <= (n + 1) / 2 and c.m0 <= m / 2


# -- grid functions ---------------------------------------------------------

def indicator(j, scale=1.0):
    return {j: scale}


def test_symmetrize_examples():
    phi, psi = {0: 1.0, 1: 2.0}, {2: 3.0}
    f = GridChaosFunction.tensor([phi, psi], GRID)
    s = symmetrize(f)
    assert s.values[(0, 2)] == 1.5 and s.values[(2, 0)] == 1.5 and s.values[(1, 2)] == 3.0
    assert s.is_symmetric()
    again = symmetrize(s)
    assert again.values == s.values
    sym = GridChaosFunction.tensor([phi, phi], GRID)
    assert symmetrize(sym).values == sym.values


def test_symmetrize_arity_cap():
    f = GridChaosFunction(5, {(0, 0, 0, 0, 0): 1.0}, GRID)
    with pytest.raises(ValueError):
        symmetrize(f)


def test_strat_norm_first_chaos():
    phi = {0: 0.5, 3: -2.0}
    f = GridChaosFunction(1, {(k,): v for k, v in phi.items()}, GRID)
    l2 = math.sqrt(sum(v**2 for v in phi.values()) * GRID.h)
    assert np.isclose(strat_norm(f), l2)
    assert strat_norm(GridChaosFunction(2, {}, GRID)) == 0.0


def test_strat_norm_against_moment_oracle():
    # ||f||_2^2 = E[I_4(|f| (x) |f|)]; the expectation follows from Isserlis
    phi = {2: 1 / math.sqrt(GRID.h)}
    f = GridChaosFunction.tensor([phi, phi], GRID)
    ff = GridChaosFunction.tensor([phi] * 4, GRID)
    exact = sum(v * gaussian_moment(GRID.h * np.equal.outer(k, k).astype(float))
                for k, v in ff.values.items())
    assert np.isclose(strat_norm(f) ** 2, exact)
    dW = noise_matrix(10_000)
    samples = dW[:, 2] ** 4 / GRID.h**2
    assert abs(samples.mean() - exact) < 4 * samples.std(ddof=1) / np.sqrt(samples.size)


def test_strat_integral_examples():
    W = sample_white_noise(GRID, 1, 0)
    f1 = GridChaosFunction(1, {(3,): 1.0}, GRID)
    assert discrete_strat_integral(f1, W) == W.increments[3]
    phi = {1: 0.7, 4: -1.1}
    f = GridChaosFunction(1, {(k,): v for k, v in phi.items()}, GRID)
    ff = GridChaosFunction.tensor([phi, phi], GRID)
    assert np.isclose(discrete_strat_integral(ff, W), discrete_strat_integral(f, W) ** 2, rtol=1e-14)


def test_strat_integral_keeps_diagonal():
    phi = {1: 0.7, 4: -1.1}
    ff = GridChaosFunction.tensor([phi, phi], GRID)
    vals = np.array([discrete_strat_integral(ff, sample_white_noise(GRID, 2, r)) for r in range(10_000)])
    l2 = sum(v**2 for v in phi.values()) * GRID.h
    assert abs(vals.mean() - l2) < 4 * vals.std(ddof=1) / np.sqrt(vals.size)


def test_ito_examples():
    W = sample_white_noise(GRID, 3, 0)
    f1 = GridChaosFunction(1, {(2,): 1.5, (5,): -0.5}, GRID, True)
    assert np.isclose(discrete_ito_integral(f1, W), discrete_strat_integral(f1, W))
    phi = {1: 0.7, 4: -1.1}
    f = GridChaosFunction(1, {(k,): v for k, v in phi.items()}, GRID)
    ff = GridChaosFunction.tensor([phi, phi], GRID)
    l2 = sum(v**2 for v in phi.values()) * GRID.h
    assert np.isclose(discrete_ito_integral(ff, W), discrete_strat_integral(f, W) ** 2 - l2)


def test_ito_rejects_asymmetric():
    f = GridChaosFunction(2, {(0, 1): 1.0}, GRID)
    with pytest.raises(ValueError):
        discrete_ito_integral(f, sample_white_noise(GRID, 0, 0))


def test_ito_orthogonality(rng):
    f2 = random_symmetric_function(2, GRID, rng)
    f1 = GridChaosFunction(1, {(j,): float(rng.standard_normal()) for j in range(8)}, GRID, True)
    f3 = random_symmetric_function(3, GRID, rng)
    pairs = [(f1, f2), (f2, f3), (f1, f3)]
    Ws = [sample_white_noise(GRID, 4, r) for r in range(20_000)]
    for a, b in pairs:
        p = np.array([discrete_ito_integral(a, W) * discrete_ito_integral(b, W) for W in Ws])
        assert abs(p.mean()) < 4 * p.std(ddof=1) / np.sqrt(p.size)


def test_grid_mismatch():
    f = GridChaosFunction(1, {(0,): 1.0}, GRID)
    with pytest.raises(ValueError):
        discrete_strat_integral(f, sample_white_noise(GridSpec(1, 2.0, 16), 0, 0))


# -- Hu-Meyer ---------------------------------------------------------------

def test_hu_meyer_weights():
    assert [hu_meyer_weight(4, k) for k in range(3)] == [1, 6, 3]
    assert hu_meyer_weight(2, 1) == 1 and hu_meyer_weight(3, 1) == 3


def test_trace_definition():
    phi = {1: 2.0, 3: 1.0}
    f = GridChaosFunction.tensor([phi, phi], GRID)
    t = trace(f, 1)
    assert t.arity == 0
    assert np.isclose(t.values[()], (4.0 + 1.0) * GRID.h)
    with pytest.raises(ValueError):
        trace(f, 2)


def test_hu_meyer_phi_phi():
    phi = {1: 0.7, 4: -1.1}
    f = GridChaosFunction.tensor([phi, phi], GRID)
    out = hu_meyer_strat_to_ito(f)
    assert len(out) == 2 and out[0].values == f.values
    assert np.isclose(out[1].values[()], sum(v**2 for v in phi.values()) * GRID.h)


def test_hu_meyer_first_chaos_identity():
    f = GridChaosFunction(1, {(2,): 1.0}, GRID, True)
    out = hu_meyer_strat_to_ito(f)
    assert len(out) == 1 and out[0].values == f.values


@given(st.integers(2, 4), st.integers(0, 10_000))
def test_hu_meyer_realizationwise(arity, seed):
    rng = np.random.default_rng(seed)
    f = random_symmetric_function(arity, GRID, rng)
    for r in range(3):
        lhs, rhs = hu_meyer_residual(f, sample_white_noise(GRID, seed, r))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1e-12)


def test_hu_meyer_requires_symmetric():
    with pytest.raises(ValueError):
        hu_meyer_strat_to_ito(GridChaosFunction(2, {(0, 1): 1.0}, GRID))


def test_reverse_map_single_f2():
    phi = {1: 0.7, 4: -1.1}
    f2 = GridChaosFunction.tensor([phi, phi], GRID)
    g = ito_to_strat_coefficients([None, None, f2])
    assert np.isclose(g[0].values[()], sum(v**2 for v in phi.values()) * GRID.h)
    assert g[1].values == {}
    assert g[2].values == f2.values


def test_reverse_map_off_diagonal(rng):
    f3 = symmetrize(GridChaosFunction(3, {(0, 1, 2): 1.0, (3, 5, 7): -2.0}, GRID))
    g = ito_to_strat_coefficients([None, None, None, f3])
    assert g[3].values == f3.values
    assert g[1].values == {}


def test_reverse_map_roundtrip(rng):
    f = [GridChaosFunction.constant(0.3, GRID),
         GridChaosFunction(1, {(2,): 1.0}, GRID, True),
         random_symmetric_function(2, GRID, rng),
         random_symmetric_function(3, GRID, rng)]
    g = ito_to_strat_coefficients(f)
    for r in range(5):
        W = sample_white_noise(GRID, 17, r)
        strat = sum(discrete_strat_integral(fn, W) for fn in f)
        ito = sum(discrete_ito_integral(gm, W) for gm in g)
        assert np.isclose(strat, ito, rtol=1e-10, atol=1e-12)
    assert all(x.symmetrized for x in g)


def test_tensor_and_dense():
    f = GridChaosFunction.tensor([{0: 1.0}, {1: 2.0, 2: 3.0}], GRID)
    d = f.to_dense()
    assert d.shape == (8, 8) and d[0, 2] == 3.0 and d.sum() == 5.0
    assert not f.is_symmetric()
