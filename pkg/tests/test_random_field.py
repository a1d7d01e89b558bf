import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from stratlim.grid import GridSpec
from stratlim.random_field import (
    CorrelationModel,
    block_average,
    mollified_potential,
    refine_white_noise,
    rho_kernel,
    sample_white_noise,
    sigma,
    white_noise_potential,
    write_potential_csv,
)

GRID = GridSpec(1, 40.0, 1024)


def test_sigma_unit_gaussian():
    # R = exp(-pi x^2) is the gaussian kind with l = 1/sqrt(2 pi)
    assert np.isclose(sigma(CorrelationModel("gaussian", 1 / np.sqrt(2 * np.pi))), 1.0, rtol=1e-14)


def test_sigma_matches_quadrature():
    m = CorrelationModel("gaussian", 1.0)
    assert np.isclose(sigma(m), (2 * np.pi) ** 0.25, rtol=1e-14)
    val, _ = integrate.quad(lambda x: m.correlation(abs(x)), -np.inf, np.inf)
    assert np.isclose(sigma(m) ** 2, val, rtol=1e-10)
    s = CorrelationModel("sech", 0.7)
    val, _ = integrate.quad(lambda x: s.correlation([x]), -np.inf, np.inf)
    assert np.isclose(sigma(s) ** 2, val, rtol=1e-10)


@given(st.floats(0.1, 10.0), st.sampled_from(["gaussian", "sech"]))
def test_sigma_scales_linearly(c, kind):
    a = CorrelationModel(kind, 0.8, 1.0)
    b = CorrelationModel(kind, 0.8, c**2)
    assert np.isclose(sigma(b), c * sigma(a), rtol=1e-12)


@given(st.floats(0.2, 3.0), st.integers(1, 3))
def test_with_sigma(s, d):
    assert np.isclose(sigma(CorrelationModel.with_sigma(s, "gaussian", 0.9, d)), s, rtol=1e-12)


@pytest.mark.parametrize("kind", ["gaussian", "sech"])
def test_spectrum_nonnegative_and_transform(kind):
    m = CorrelationModel(kind, 1.3, 2.0)
    ks = GRID.wavenumbers()
    S = m.spectrum(ks)
    assert np.all(S >= 0)
    # inverse transform of S on the grid reproduces R
    R = GRID.from_fft_order(GRID.ifft(S).real) / GRID.cell_volume
    exact = m.correlation(np.abs(GRID.coords_1d)) if kind == "gaussian" else m.correlation([GRID.coords_1d])
    # the sech tail wraps around the torus at order A exp(-L / 2l)
    wrap = 4 * m.amplitude * np.exp(-GRID.side / (2 * m.length_scale))
    assert np.max(np.abs(R - exact)) < 1e-8 + wrap


@pytest.mark.parametrize("kind,tol", [("gaussian", 1e-8), ("sech", 1e-8)])
def test_rho_closed_form(kind, tol):
    m = CorrelationModel(kind, 1.0, 1.5)
    rho = rho_kernel(m, GRID)
    exact = m.rho([GRID.coords_1d])
    assert np.max(np.abs(rho - exact)) < tol * np.max(exact)


@pytest.mark.parametrize("kind", ["gaussian", "sech"])
def test_rho_self_convolution_and_mass(kind):
    m = CorrelationModel(kind, 1.0, 1.0)
    rho = rho_kernel(m, GRID)
    assert abs(GRID.integrate(rho**2) - m.correlation(0.0 if kind == "gaussian" else [0.0])) < 1e-6
    assert abs(GRID.integrate(rho) - sigma(m)) / sigma(m) < 1e-6
    # full convolution rho * rho = R
    conv = GRID.from_fft_order(GRID.ifft(GRID.fft(GRID.to_fft_order(rho)) ** 2).real) * GRID.cell_volume
    exact = m.correlation(np.abs(GRID.coords_1d)) if kind == "gaussian" else m.correlation([GRID.coords_1d])
    assert np.max(np.abs(conv - exact)) < 1e-6


def test_rho_2d_gaussian():
    g = GridSpec(2, 20.0, 128)
    m = CorrelationModel("gaussian", 1.0, 1.0, dim=2)
    assert np.max(np.abs(rho_kernel(m, g) - m.rho(g.coords()))) < 1e-10


def test_rho_under_resolved():
    with pytest.raises(ValueError):
        rho_kernel(CorrelationModel("gaussian", 0.1), GRID)


def test_white_noise_variance():
    g = GridSpec(1, 10.0, 4096)
    W = sample_white_noise(g, 1, 0)
    v = np.var(W.increments) / g.cell_volume
    assert 0.9 <= v <= 1.1


def test_white_noise_determinism_and_independence():
    g = GridSpec(1, 10.0, 4096)
    a = sample_white_noise(g, 5, 3).increments
    assert np.array_equal(a, sample_white_noise(g, 5, 3).increments)
    b = sample_white_noise(g, 5, 4).increments
    c = sample_white_noise(g, 5, 3, stream=1).increments
    for other in (b, c):
        assert abs(np.corrcoef(a, other)[0, 1]) < 4 / np.sqrt(g.n_points)
    assert not np.array_equal(a, sample_white_noise(g, 6, 3).increments)


def test_increments_read_only():
    W = sample_white_noise(GRID, 0, 0)
    with pytest.raises(ValueError):
        W.increments[0] = 1.0


def test_refinement_preserves_cell_sums():
    g = GridSpec(2, 4.0, 16)
    W = sample_white_noise(g, 2, 1)
    F = refine_white_noise(W)
    assert F.grid == g.refined()
    sums = F.increments.reshape(16, 2, 16, 2).sum(axis=(1, 3))
    assert np.allclose(sums, W.increments, atol=1e-15)
    assert np.array_equal(F.increments, refine_white_noise(W).increments)


def test_refined_noise_has_fine_variance():
    g = GridSpec(1, 10.0, 4096)
    F = refine_white_noise(sample_white_noise(g, 3, 0))
    v = np.var(F.increments) / F.grid.cell_volume
    assert 0.95 <= v <= 1.05
    # neighbouring subcells inside a coarse cell are uncorrelated
    pairs = F.increments.reshape(-1, 2)
    assert abs(np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1]) < 4 / np.sqrt(len(pairs))


def _ensemble(model, eps, n, grid=GRID, seed=11):
    return np.stack([mollified_potential(sample_white_noise(grid, seed, r), model, eps).values
                     for r in range(n)])


def test_mollified_variance_scales_like_eps_to_minus_d():
    # Var q_eps = int rho_eps^2 = eps^-d R(0)
    m = CorrelationModel("gaussian", 1.0, 1.0)
    for eps in (0.4, 0.2):
        q = _ensemble(m, eps, 100)
        assert abs(eps * q.var() - 1.0) < 0.1


def test_mollified_correlation_at_lag():
    m = CorrelationModel("gaussian", 1.0, 1.0)
    eps, lag = 0.4, 1.0
    k = int(round(eps * lag / GRID.h))
    q = _ensemble(m, eps, 200)
    # one product per realization at well separated base points
    base = np.arange(0, GRID.n_points, 64)
    prod = (q[:, base] * q[:, (base + k) % GRID.n_points]).ravel() * eps
    mean, se = prod.mean(), prod.std(ddof=1) / np.sqrt(prod.size)
    assert abs(mean - m.correlation(lag)) < 3 * se


def test_mollified_stationarity():
    m = CorrelationModel("gaussian", 1.0, 1.0)
    eps = 0.4
    q = _ensemble(m, eps, 200) * np.sqrt(eps)
    k = 5
    ests = []
    for off in range(0, GRID.n_points, GRID.n_points // 8):
        p = q[:, off] * q[:, (off + k) % GRID.n_points]
        ests.append((p.mean(), p.std(ddof=1) / np.sqrt(p.size)))
    centre = np.mean([e for e, _ in ests])
    assert all(abs(e - centre) < 4 * s for e, s in ests)


def test_mollified_gaussianity():
    m = CorrelationModel("gaussian", 1.0, 1.0)
    q = _ensemble(m, 0.2, 100)[:, ::16].ravel()   # 6400 nearly independent cells
    q = np.concatenate([q, _ensemble(m, 0.2, 60, seed=12)[:, ::16].ravel()])
    assert q.size >= 10_000
    kurt = stats.kurtosis(q)
    assert abs(kurt) < 4 * np.sqrt(24 / q.size)


def test_mollified_mean_near_zero():
    m = CorrelationModel("gaussian", 1.0, 1.0)
    q = mollified_potential(sample_white_noise(GRID, 0, 0), m, 0.2).values
    # cells closer than the correlation length are dependent: use one per block
    s = q[::32]
    assert abs(s.mean()) < 4 * s.std() / np.sqrt(s.size)


def test_mollified_resolution_contract():
    W = sample_white_noise(GRID, 0, 0)
    m = CorrelationModel()
    with pytest.raises(ValueError, match="eps / h"):
        mollified_potential(W, m, 2 * GRID.h)
    with pytest.raises(ValueError, match="eps / L"):
        mollified_potential(W, m, 6.0)


def test_white_noise_potential_variance_and_linearity():
    W = sample_white_noise(GridSpec(1, 10.0, 4096), 4, 0)
    m1 = CorrelationModel.with_sigma(1.0)
    m3 = CorrelationModel.with_sigma(3.0)
    v1 = white_noise_potential(W, m1).values
    assert abs(v1.var() * W.grid.cell_volume - 1) < 0.1
    assert np.allclose(white_noise_potential(W, m3).values, 3 * v1, rtol=1e-12)
    assert white_noise_potential(W, m1).eps == 0.0


def test_block_averages_converge_to_white_noise():
    g = GridSpec(1, 40.0, 4096)
    W = sample_white_noise(g, 9, 0)
    m = CorrelationModel.with_sigma(1.0)
    w = block_average(g, white_noise_potential(W, m).values, 64)
    errs = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        q = block_average(g, mollified_potential(W, m, eps).values, 64)
        errs.append(np.linalg.norm(q - w) / np.linalg.norm(w))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    # the mismatch is a boundary layer of width eps at each block edge
    assert errs[-1] < errs[0] / 3


def test_block_average_shapes():
    g = GridSpec(2, 1.0, 8)
    v = np.arange(64.0).reshape(8, 8)
    b = block_average(g, v, 4)
    assert b.shape == (2, 2)
    assert b[0, 0] == v[:4, :4].mean()
    with pytest.raises(ValueError):
        block_average(g, v, 3)


def test_potential_csv(tmp_path):
    W = sample_white_noise(GridSpec(1, 8.0, 64), 8, 2)
    V = mollified_potential(W, CorrelationModel("gaussian", 1.0), 0.5)
    path = tmp_path / "q.csv"
    write_potential_csv(path, V)
    lines = path.read_text().splitlines()
    assert "master_seed=8" in lines[0] and "realization_index=2" in lines[0]
    assert lines[1] == "cell,value"
    assert len(lines) == 66
    assert float(lines[2].split(",")[1]) == V.values[0]
