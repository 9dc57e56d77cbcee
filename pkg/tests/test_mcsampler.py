import math

import numpy as np
import pytest
from scipy import integrate, stats

from plwishart.errors import DomainError
from plwishart.finite_n import EnsembleParams, finite_density_xi, mean_eigenvalue
from plwishart.mcsampler import (
    RngContract,
    SpectrumSample,
    _quaternion_embed,
    eigensolve_selfadjoint,
    empirical_statistics,
    sample_matrix,
    sample_spectra,
    sample_xi,
)


def test_xi_identity_weighting_moments():
    p = EnsembleParams(2, 3, 0, 1.0, 12.5)
    x = sample_xi(p, np.random.default_rng(1), size=100_000, weighting="identity")
    se = math.sqrt(p.gamma / x.size)
    assert abs(x.mean() - p.gamma) < 4 * se
    assert x.var() == pytest.approx(p.gamma, rel=0.03)


def test_xi_marginal_weighting():
    p = EnsembleParams(2, 3, 0, 1.0, 12.5)
    x = sample_xi(p, np.random.default_rng(1), size=100_000)
    assert abs(x.mean() - (p.alpha + 1)) < 4 * math.sqrt((p.alpha + 1) / x.size)


def test_xi_reproducible():
    p = EnsembleParams.from_alpha(2, 3, 0, 1.0)
    a = sample_xi(p, RngContract(7).generator(3), size=5)
    b = sample_xi(p, RngContract(7).generator(3), size=5)
    assert np.array_equal(a, b)
    with pytest.raises(DomainError):
        sample_xi(p, np.random.default_rng(0), weighting="other")


def test_eigensolver_examples():
    assert np.allclose(eigensolve_selfadjoint(np.eye(4)), 1.0)
    assert np.allclose(eigensolve_selfadjoint([[2.0, 1.0], [1.0, 2.0]]), [1.0, 3.0])
    rng = np.random.default_rng(3)
    x = rng.normal(size=(70, 50))
    w = x.T @ x
    ev = eigensolve_selfadjoint(w)
    assert ev.sum() == pytest.approx(np.trace(w), rel=1e-9)
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    assert np.all(np.diff(eigensolve_selfadjoint(h + h.conj().T)) >= 0)
    with pytest.raises(DomainError):
        eigensolve_selfadjoint([[1.0, 2.0], [0.0, 1.0]])


def test_quaternion_embedding_kramers():
    rng = np.random.default_rng(4)
    x = _quaternion_embed(*rng.normal(size=(4, 5, 3)))
    ev = eigensolve_selfadjoint(x.conj().T @ x)
    assert np.allclose(ev[0::2], ev[1::2], rtol=1e-8)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_sample_shapes_and_positivity(beta):
    p = EnsembleParams.from_alpha(beta, 5, 2, 1.0)
    s = sample_spectra(p, 200, RngContract(5))
    assert s.eigenvalues.shape == (200, 5)
    assert np.all(np.diff(s.eigenvalues, axis=1) >= 0)
    assert np.all(s.eigenvalues >= 0)
    assert s.xi.shape == (200,)


def test_sample_matrix_single():
    p = EnsembleParams.from_alpha(4, 3, 0, 2.0)
    s = sample_matrix(p, np.random.default_rng(0))
    assert s.draws == 1 and s.N == 3


def test_determinism_across_workers():
    p = EnsembleParams.from_alpha(2, 8, 1, 1.0)
    a = sample_spectra(p, 64, RngContract(123, 4), workers=1)
    b = sample_spectra(p, 64, RngContract(123, 4), workers=6)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    c = sample_spectra(p, 64, RngContract(123, 5))
    assert not np.array_equal(a.eigenvalues, c.eigenvalues)


def test_csv_roundtrip():
    p = EnsembleParams.from_alpha(1, 4, 0, 2.0)
    s = sample_spectra(p, 10, RngContract(9))
    back = SpectrumSample.from_csv(s.to_csv())
    assert np.array_equal(back.eigenvalues, s.eigenvalues)
    assert back.params == p and back.seed == 9
    with pytest.raises(DomainError):
        SpectrumSample.from_csv("draw,index,eigenvalue\n0,0,1.0\n0,2,2.0\n")


def test_sample_invariants():
    with pytest.raises(DomainError):
        SpectrumSample(np.array([[2.0, 1.0]]))
    with pytest.raises(DomainError):
        SpectrumSample(np.array([[-1.0, 1.0]]))


@pytest.mark.parametrize("beta,N,nu", [(1, 10, 0), (2, 6, 2), (4, 4, 0)])
def test_mean_trace(beta, N, nu):
    p = EnsembleParams.from_alpha(beta, N, nu, 3.0)
    tr = sample_spectra(p, 4000, RngContract(31, beta), workers=4).eigenvalues.mean(axis=1)
    se = tr.std(ddof=1) / math.sqrt(tr.size)
    assert abs(tr.mean() - mean_eigenvalue(p)) < 3 * se


def test_large_gamma_mean():
    p = EnsembleParams(2, 5, 1, 0.5, 1e6)
    tr = sample_spectra(p, 2000, RngContract(2)).eigenvalues.mean(axis=1)
    se = tr.std(ddof=1) / math.sqrt(tr.size)
    assert abs(tr.mean() - (p.N + p.nu) / (2 * p.n)) < 3 * se


def test_n1_beta1_distribution():
    # n lambda / gamma = (chi^2_1 / 2) / xi with xi ~ Gamma(alpha + 1): a Beta-prime law
    p = EnsembleParams.from_alpha(1, 1, 0, 2.0, n=0.8)
    ev = sample_spectra(p, 5000, RngContract(17)).eigenvalues[:, 0]
    t = p.n * ev / p.gamma
    assert stats.kstest(t, stats.betaprime(0.5, p.alpha + 1).cdf).pvalue > 0.01


def test_fixed_xi_matches_laguerre_density():
    p = EnsembleParams.from_alpha(2, 5, 1, 2.0)
    xi = 4.0
    ev = sample_spectra(p, 2000, RngContract(8), xi=xi).eigenvalues.ravel()
    a = 2 * p.n * xi / p.gamma
    grid = np.linspace(0, 80 / a, 40001)
    cdf = integrate.cumulative_trapezoid(finite_density_xi(grid, p, xi), grid, initial=0) / p.N
    assert cdf[-1] == pytest.approx(1, abs=1e-6)
    assert stats.kstest(ev, lambda v: np.interp(v, grid, cdf)).pvalue > 0.01


def test_heavy_tail_witness():
    deformed = EnsembleParams.from_alpha(2, 10, 0, 1.0)
    control = EnsembleParams(2, 10, 0, 1.0, 1e9)
    a = sample_spectra(deformed, 3000, RngContract(41), workers=4).eigenvalues.mean(axis=1)
    b = sample_spectra(control, 3000, RngContract(41), workers=4).eigenvalues.mean(axis=1)
    assert stats.kurtosis(a) > stats.kurtosis(b)


def test_empirical_statistics():
    p = EnsembleParams.from_alpha(2, 6, 0, 3.0)
    s = sample_spectra(p, 3000, RngContract(12), workers=4)
    scaled = empirical_statistics(s, "smallest", "mean_scaled")
    assert scaled.shape == (3000,)
    flat = s.eigenvalues.ravel() / mean_eigenvalue(p)
    assert abs(flat.mean() - 1) < 3 * flat.std() / math.sqrt(flat.size / p.N)
    h = empirical_statistics(s, "histogram", "raw")
    assert np.sum(h.values) * (h.grid[1] - h.grid[0]) == pytest.approx(1, abs=1e-9)
    h = empirical_statistics(s, "histogram", "mean_scaled", bins=40, range=(0, 3))
    assert h.grid.size == 40 and h.mass() < 1
    sp = empirical_statistics(s, "spacings", "spacing_scaled")
    assert sp.mean() == pytest.approx(1, rel=1e-12)
    with pytest.raises(DomainError):
        empirical_statistics(s, "spacings", "micro")
    with pytest.raises(DomainError):
        empirical_statistics(SpectrumSample(s.eigenvalues), "smallest", "micro")
