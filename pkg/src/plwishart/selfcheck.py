"""Fast invariant suite behind ``plwishart selfcheck``."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .finite_n import EnsembleParams, gen_finite_density, mean_eigenvalue
from .macrolaw import ScalingParams, density_moments
from .mcsampler import RngContract, sample_spectra
from .microlaw import MicroParams, first_eigenvalue_pdf, gap_probability, micro_density
from .surmise import SpacingParams, rescaled_spacing_pdf

__all__ = ["run_checks"]


def _quad(f, a, b):
    return integrate.quad(f, a, b, limit=400, epsabs=0, epsrel=1e-11)[0]


def _macro_moments():
    m0, m1 = density_moments(ScalingParams(2.0, 1.0), (0, 1))
    err = max(abs(m0 - 1), abs(m1 - 1))
    return err < 1e-7, f"c=1 alpha=2 mass and mean off by {err:.1e}"


def _macro_mass_clt1():
    (m0,) = density_moments(ScalingParams(0.5, 0.4), (0,))
    return abs(m0 - 1) < 1e-7, f"c=0.4 alpha=0.5 mass off by {abs(m0 - 1):.1e}"


def _finite_mass():
    p = EnsembleParams.from_alpha(2, 3, 1, 4.0)
    m0 = _quad(lambda x: gen_finite_density(x, p), 0, np.inf)
    m1 = _quad(lambda x: x * gen_finite_density(x, p), 0, np.inf)
    err = max(abs(m0 - 3) / 3, abs(m1 / 3 - mean_eigenvalue(p)) / mean_eigenvalue(p))
    return err < 1e-7, f"N=3 mass and mean relative error {err:.1e}"


def _micro_limit():
    y = np.linspace(0.5, 8.0, 16)
    d = np.max(np.abs(micro_density(y, MicroParams(1e4)) - micro_density(y, MicroParams(math.inf))))
    return d < 1e-2, f"alpha=1e4 vs undeformed sup difference {d:.1e}"


def _first_eig_mass():
    p = MicroParams(1.5, 0, 2)
    m = _quad(lambda y: first_eigenvalue_pdf(y, p), 0, np.inf)
    return abs(m - 1) < 1e-8, f"beta=2 nu=0 alpha=1.5 mass off by {abs(m - 1):.1e}"


def _gap_consistency():
    p = MicroParams(1.5, 0, 2)
    y = 3.0
    tail = _quad(lambda t: first_eigenvalue_pdf(t, p), y, np.inf)
    d = abs(tail - gap_probability(y * y, p))
    return d < 1e-8, f"gap probability vs integrated first-eigenvalue law {d:.1e}"


def _spacing_unit_mean():
    p = SpacingParams.from_nubar(1, 0.5, 1.0, 12.0)
    m0 = _quad(lambda x: rescaled_spacing_pdf(x, p), 0, np.inf)
    m1 = _quad(lambda x: x * rescaled_spacing_pdf(x, p), 0, np.inf)
    err = max(abs(m0 - 1), abs(m1 - 1))
    return err < 1e-8, f"rescaled spacing mass and mean off by {err:.1e}"


def _sampler_reproducible():
    p = EnsembleParams.from_alpha(4, 3, 1, 2.0)
    a = sample_spectra(p, 4, RngContract(11, 3)).eigenvalues
    b = sample_spectra(p, 4, RngContract(11, 3), workers=2).eigenvalues
    same = bool(np.array_equal(a, b))
    return same, "identical draws across worker counts" if same else "draws differ across worker counts"


CHECKS = [
    ("macro-moments", _macro_moments),
    ("macro-mass-c<1", _macro_mass_clt1),
    ("finite-n-mass", _finite_mass),
    ("micro-limit", _micro_limit),
    ("first-eig-mass", _first_eig_mass),
    ("gap-vs-first-eig", _gap_consistency),
    ("spacing-unit-mean", _spacing_unit_mean),
    ("sampler-reproducible", _sampler_reproducible),
]


def run_checks() -> list[dict]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"name": name, "passed": bool(ok), "detail": detail})
    return out
