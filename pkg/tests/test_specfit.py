import json
import warnings

import numpy as np
import pytest

from plwishart.errors import DegenerateDataError, DomainError
from plwishart.finite_n import EnsembleParams
from plwishart.mcsampler import RngContract, sample_spectra
from plwishart.specfit import (
    ALPHA_BRACKET,
    PROFILE_POINTS,
    FitBoundaryWarning,
    FitReport,
    fit_alpha,
    ingest_timeseries,
    log_likelihood,
    overlay_csv,
    profile_log_likelihood,
    read_eigenvalues,
    read_table,
)


@pytest.fixture(scope="module")
def alpha3_spectrum():
    p = EnsembleParams.from_alpha(2, 20, 20, 3.0)
    return sample_spectra(p, 300, RngContract(606), workers=4).eigenvalues.ravel()


def test_ingest_gaussian_inside_mp_support():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(2000, 200))
    spec = ingest_timeseries(data)
    c = 200 / 2000
    lo, hi = c * (c**-0.5 - 1) ** 2, c * (c**-0.5 + 1) ** 2
    x = np.asarray(spec)
    assert np.mean((x >= lo) & (x <= hi)) >= 0.95
    assert x.mean() == pytest.approx(1.0, abs=1e-12)
    assert spec.c == pytest.approx(c)


def test_ingest_degenerate_columns():
    rng = np.random.default_rng(1)
    col = rng.normal(size=(50, 1))
    with pytest.raises(DegenerateDataError):
        ingest_timeseries(np.hstack([col, col]))
    with pytest.raises(DegenerateDataError):
        ingest_timeseries(np.hstack([col, np.full((50, 1), 3.0)]))
    with pytest.raises(DomainError):
        ingest_timeseries(np.array([[1.0, np.nan], [2.0, 3.0], [0.5, 1.0]]))


def test_ingest_rank_deficient():
    rng = np.random.default_rng(2)
    spec = ingest_timeseries(rng.normal(size=(8, 12)))
    # standardizing removes one more direction (the column means)
    assert spec.dropped_zeros == 12 - 7
    assert any("rank deficient" in n for n in spec.notes)


def test_readers():
    t = read_table("a,b,c\n1,2,3\n4,5,7\n")
    assert t.shape == (2, 3)
    assert np.array_equal(read_eigenvalues("# x\n3\n1\n2\n"), [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        read_table("1,2\n3\n")


def test_degenerate_eigenvalues():
    with pytest.raises(DegenerateDataError):
        fit_alpha(np.ones(20), 0.5)


def test_report_roundtrip(alpha3_spectrum):
    r = fit_alpha(alpha3_spectrum[:400], 0.5)
    back = FitReport.from_json(r.to_json())
    assert back == r
    assert len(r.profile_alpha) == PROFILE_POINTS == len(r.profile_objective)
    assert r.profile_alpha[0] == pytest.approx(ALPHA_BRACKET[0])
    assert r.profile_alpha[-1] == pytest.approx(ALPHA_BRACKET[1])
    assert json.loads(r.to_json())["method"] == "mle"
    with pytest.raises(DomainError):
        FitReport(99.0, 0.5, 1.0, "mle", 10, 1.0)


def test_fit_recovers_alpha3(alpha3_spectrum):
    r = fit_alpha(alpha3_spectrum, 0.5, workers=4)
    assert ALPHA_BRACKET[0] < r.alpha_hat < ALPHA_BRACKET[1]
    assert r.alpha_hat == pytest.approx(3.0, rel=0.35)
    assert not r.at_boundary


def test_fit_least_squares(alpha3_spectrum):
    r = fit_alpha(alpha3_spectrum, 0.5, method="least_squares", workers=4)
    assert r.method == "least_squares"
    assert r.alpha_hat == pytest.approx(3.0, rel=0.5)


def test_fit_scale_invariant(alpha3_spectrum):
    x = alpha3_spectrum[:2000]
    a = fit_alpha(x, 0.5).alpha_hat
    b = fit_alpha(x * 37.5, 0.5).alpha_hat
    assert a == pytest.approx(b, rel=1e-6)


def test_fit_from_ingested_table():
    rng = np.random.default_rng(3)
    xi = rng.gamma(4.0, size=(600, 1))
    data = rng.normal(size=(600, 60)) / np.sqrt(xi)
    spec = ingest_timeseries(data)
    r = fit_alpha(spec)
    assert r.c == pytest.approx(0.1)
    assert r.rescale_mean == pytest.approx(spec.rescale_mean, rel=1e-12)


def test_objective_prefers_true_alpha():
    wins = 0
    for seed in range(10):
        p = EnsembleParams.from_alpha(2, 10, 10, 3.0)
        ev = sample_spectra(p, 400, RngContract(77, seed), workers=4).eigenvalues.ravel()
        ll = [profile_log_likelihood(ev, a, 0.5) for a in (1.5, 3.0, 6.0)]
        wins += ll[1] > ll[0] and ll[1] > ll[2]
    assert wins >= 9


def test_profile_dominates_plain_likelihood(alpha3_spectrum):
    x = alpha3_spectrum[:1000]
    for a in (0.5, 3.0):
        assert profile_log_likelihood(x, a, 0.5) >= log_likelihood(x, a, 0.5) - 1e-9


def test_wishart_data_hits_upper_bracket():
    p = EnsembleParams(2, 100, 100, 1.0, 1e9)
    ev = sample_spectra(p, 20, RngContract(5), workers=4).eigenvalues.ravel()
    with pytest.warns(FitBoundaryWarning):
        r = fit_alpha(ev, 0.5)
    assert r.at_boundary and r.alpha_hat == pytest.approx(ALPHA_BRACKET[1], rel=0.05)


def test_overlay(alpha3_spectrum):
    x = alpha3_spectrum[:1000]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitBoundaryWarning)
        r = fit_alpha(x, 0.5)
    text = overlay_csv(x, r)
    lines = text.splitlines()
    assert lines[0] == "x,empirical,fitted"
    vals = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    assert np.all(vals[:, 1:] >= 0) and np.all(np.diff(vals[:, 0]) > 0)
