"""Monte Carlo sampler for the deformed Wishart-Laguerre ensembles.

A draw is built in two stages.  First xi is drawn, then X (M x N, M = N + nu)
gets independent Gaussian real components with variance gamma/(2 n beta xi).
That variance reproduces the conditional weight exp(-xi (n beta/gamma) Tr X^dag X):
each real component c enters as exp(-xi n beta c^2 / gamma).

Normalizing the Gaussian costs a factor xi^{-(beta/2) N (N+nu)}, so the
marginal law of xi under the joint measure is Gamma(alpha + 1) with
alpha = gamma - 1 - (beta/2) N (N + nu), not the Gamma(gamma) weight of the
integral identity.  ``sample_xi`` offers both; the matrix sampler uses the
former.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as _la

from .errors import DomainError, InternalConsistencyError, NumericalError
from .finite_n import EnsembleParams, mean_eigenvalue
from .macrolaw import DensityCurve
from .microlaw import to_micro

__all__ = [
    "RngContract",
    "SpectrumSample",
    "sample_xi",
    "sample_matrix",
    "sample_spectra",
    "eigensolve_selfadjoint",
    "empirical_statistics",
    "KRAMERS_TOL",
    "MAX_BINS",
]

KRAMERS_TOL = 1e-8
MAX_BINS = 2000
_ASYM_TOL = 1e-10
_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class RngContract:
    """Draw d of stream s uses SeedSequence(seed, spawn_key=(s, d))."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise DomainError("stream_id must be nonnegative")

    def generator(self, draw: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), int(draw)))
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class SpectrumSample:
    """Eigenvalues of ``draws`` matrices, one sorted row per draw."""

    eigenvalues: np.ndarray
    params: EnsembleParams | None = None
    seed: int | None = None
    stream_id: int = 0
    xi: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.atleast_2d(np.asarray(self.eigenvalues, dtype=float))
        if ev.size == 0:
            raise DomainError("a spectrum sample needs at least one draw")
        if self.params is not None and ev.shape[1] != self.params.N:
            raise DomainError(f"each draw must hold N = {self.params.N} eigenvalues, got {ev.shape[1]}")
        if np.any(np.diff(ev, axis=1) < 0):
            raise DomainError("eigenvalues must be sorted ascending within each draw")
        scale = np.max(np.abs(ev), axis=1, keepdims=True)
        if np.any(ev < -_ASYM_TOL * scale):
            raise DomainError("eigenvalues of X^dag X must be nonnegative")
        ev = np.clip(ev, 0.0, None)
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def draws(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def N(self) -> int:
        return self.eigenvalues.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.params is not None:
            buf.write(f"# params: {json.dumps(self.params.as_dict(), sort_keys=True)}\n")
        if self.seed is not None:
            buf.write(f"# seed: {int(self.seed)}\n# stream_id: {int(self.stream_id)}\n")
        for key, val in self.meta.items():
            buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
        buf.write("draw,index,eigenvalue\n")
        for d, row in enumerate(self.eigenvalues):
            for i, v in enumerate(row):
                buf.write(f"{d},{i},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, params: EnsembleParams | None = None) -> "SpectrumSample":
        """Read ``draw,index,eigenvalue`` rows; comment lines may carry params and seed."""
        header = {}
        body = []
        for line in io.StringIO(text):
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        if not rows or [c.strip() for c in rows[0]] != ["draw", "index", "eigenvalue"]:
            raise DomainError("expected header 'draw,index,eigenvalue'")
        if len(rows) < 2:
            raise DomainError("no eigenvalues in file")
        data = np.array(rows[1:], dtype=float)
        draw, idx = data[:, 0].astype(int), data[:, 1].astype(int)
        ndraw, n = draw.max() + 1, idx.max() + 1
        if draw.min() < 0 or idx.min() < 0 or len(data) != ndraw * n:
            raise DomainError("every draw must list indices 0..N-1 exactly once")
        ev = np.full((ndraw, n), np.nan)
        ev[draw, idx] = data[:, 2]
        if np.any(np.isnan(ev)):
            raise DomainError("every draw must list indices 0..N-1 exactly once")
        if params is None and "params" in header:
            params = EnsembleParams(**json.loads(header["params"]))
        seed = int(header["seed"]) if "seed" in header else None
        stream = int(header.get("stream_id", 0))
        return cls(np.sort(ev, axis=1), params, seed, stream)


def sample_xi(p: EnsembleParams, rng: np.random.Generator, size=None, weighting: str = "marginal"):
    """Draw the scale variable.

    ``weighting="marginal"`` gives its law under the matrix ensemble,
    Gamma(alpha + 1).  ``weighting="identity"`` gives the Gamma(gamma) weight
    e^{-xi} xi^{gamma-1}/Gamma(gamma) of the integral identity, which does not
    yet include the Gaussian normalization.
    """
    if weighting == "marginal":
        shape = p.alpha + 1.0
    elif weighting == "identity":
        shape = p.gamma
    else:
        raise DomainError(f"unknown weighting {weighting!r}")
    return rng.gamma(shape, 1.0, size=size)


def _quaternion_embed(a, b, c, d) -> np.ndarray:
    """q = a + b i + c j + d k  ->  [[z, w], [-conj(w), conj(z)]] with z = a + ib, w = c + id."""
    z = a + 1j * b
    w = c + 1j * d
    m, n = a.shape
    out = np.empty((2 * m, 2 * n), dtype=complex)
    out[0::2, 0::2] = z
    out[0::2, 1::2] = w
    out[1::2, 0::2] = -np.conj(w)
    out[1::2, 1::2] = np.conj(z)
    return out


def eigensolve_selfadjoint(matrix, spot_checks: int = 2) -> np.ndarray:
    """Ascending eigenvalues of a dense real-symmetric or Hermitian matrix.

    LAPACK does the work (Householder reduction to tridiagonal form, then
    implicit-shift iteration).  ``spot_checks`` extremal eigenpairs are
    recomputed with vectors and their residuals checked.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    norm = float(np.max(np.abs(a))) if a.size else 0.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > _ASYM_TOL * max(norm, 1e-300):
        raise DomainError("matrix is not self-adjoint")
    a = 0.5 * (a + a.conj().T)
    try:
        vals = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    n = a.shape[0]
    if spot_checks and n:
        k = min(spot_checks, n)
        picks = sorted({0, n - 1} if k >= 2 else {0})
        for i in picks:
            w, v = _la.eigh(a, subset_by_index=[i, i])
            resid = np.linalg.norm(a @ v[:, 0] - w[0] * v[:, 0])
            if resid > _RESIDUAL_TOL * max(np.linalg.norm(a, 2), 1e-300):
                raise NumericalError(f"eigenpair residual {resid:.2e} exceeds tolerance")
    return vals


def _draw(p: EnsembleParams, rng: np.random.Generator, xi: float | None):
    if xi is None:
        xi = float(sample_xi(p, rng))
    elif not xi > 0:
        raise DomainError("xi must be positive")
    m, n = p.N + p.nu, p.N
    sd = np.sqrt(p.gamma / (2.0 * p.n * p.beta * xi))
    if p.beta == 1:
        x = sd * rng.standard_normal((m, n))
        ev = eigensolve_selfadjoint(x.T @ x, spot_checks=0)
    elif p.beta == 2:
        g = sd * rng.standard_normal((2, m, n))
        x = g[0] + 1j * g[1]
        ev = eigensolve_selfadjoint(x.conj().T @ x, spot_checks=0)
    else:
        g = sd * rng.standard_normal((4, m, n))
        x = _quaternion_embed(*g)
        full = eigensolve_selfadjoint(x.conj().T @ x, spot_checks=0)
        lo, hi = full[0::2], full[1::2]
        if np.any(np.abs(hi - lo) > KRAMERS_TOL * max(float(full[-1]), 1e-300)):
            raise InternalConsistencyError("quaternion embedding lost its Kramers degeneracy")
        ev = 0.5 * (lo + hi)
    return np.clip(ev, 0.0, None), xi


def sample_matrix(p: EnsembleParams, rng: np.random.Generator, xi: float | None = None) -> SpectrumSample:
    """One draw.  Passing ``xi`` pins the scale (the fixed-xi ensemble)."""
    ev, xi = _draw(p, rng, xi)
    return SpectrumSample(ev[None, :], p, xi=np.array([xi]))


def sample_spectra(
    p: EnsembleParams,
    draws: int,
    contract: RngContract,
    *,
    xi: float | None = None,
    workers: int = 1,
) -> SpectrumSample:
    """``draws`` independent draws; draw d is seeded from (seed, stream_id, d).

    The result does not depend on ``workers``.
    """
    if draws < 1:
        raise DomainError("draws must be positive")

    def one(d):
        return _draw(p, contract.generator(d), xi)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(draws)))
    else:
        results = [one(d) for d in range(draws)]
    ev = np.array([r[0] for r in results])
    xis = np.array([r[1] for r in results])
    return SpectrumSample(ev, p, contract.seed, contract.stream_id, xis)


def _bulk_gaps(ev: np.ndarray) -> np.ndarray:
    n = ev.shape[1]
    if n < 2:
        raise DomainError("spacings need N >= 2")
    if n == 2:
        return (ev[:, 1] - ev[:, 0]).ravel()
    lo, hi = n // 3, max(2 * n // 3, n // 3 + 2)
    return np.diff(ev[:, lo:hi], axis=1).ravel()


def empirical_statistics(
    sample: SpectrumSample,
    kind: str = "histogram",
    rescaling: str = "raw",
    *,
    bins=None,
    range: tuple[float, float] | None = None,
    generalized: bool = True,
):
    """Histogram (a DensityCurve) or the smallest-eigenvalue / spacing sample.

    Rescalings: ``raw``; ``mean_scaled`` divides by the exact mean eigenvalue;
    ``micro`` maps to y = 2 N b sqrt(lambda/<lambda>); ``spacing_scaled``
    (spacings only) divides gaps by their empirical mean.  Spacings come from
    the middle third of each spectrum, or the single gap when N = 2.

    Histogram bins follow Freedman-Diaconis unless ``bins`` is given, capped
    at MAX_BINS; values are counts / (bin width * draws * N), so the curve
    integrates to the fraction of eigenvalues inside ``range``.
    """
    ev = sample.eigenvalues
    if ev.size == 0:
        raise DomainError("empty sample")
    p = sample.params
    if rescaling in ("mean_scaled", "micro") and p is None:
        raise DomainError(f"rescaling {rescaling!r} needs ensemble parameters")
    if kind == "spacings":
        gaps = _bulk_gaps(ev)
        if rescaling == "raw":
            return gaps
        if rescaling == "spacing_scaled":
            m = gaps.mean()
            if not m > 0:
                raise DomainError("all spacings vanish")
            return gaps / m
        if rescaling == "mean_scaled":
            return gaps / mean_eigenvalue(p, generalized)
        raise DomainError("spacings support raw, mean_scaled and spacing_scaled rescaling")
    if rescaling == "raw":
        vals = ev
    elif rescaling == "mean_scaled":
        vals = ev / mean_eigenvalue(p, generalized)
    elif rescaling == "micro":
        vals = to_micro(ev, p, generalized)
    else:
        raise DomainError(f"rescaling {rescaling!r} does not apply to {kind!r}")
    if kind == "smallest":
        return np.array(vals[:, 0])
    if kind != "histogram":
        raise DomainError(f"unknown statistic {kind!r}")
    flat = np.asarray(vals).ravel()
    if range is not None:
        lo, hi = range
        if not hi > lo:
            raise DomainError("histogram range must be increasing")
    if bins is None:
        # heavy tails stretch the data range far beyond the IQR
        edges = np.histogram_bin_edges(flat, bins="fd", range=range)
        if edges.size - 1 > MAX_BINS:
            edges = np.histogram_bin_edges(flat, bins=MAX_BINS, range=range)
    else:
        edges = np.histogram_bin_edges(flat, bins=bins, range=range)
    counts, edges = np.histogram(flat, bins=edges)
    width = np.diff(edges)
    dens = counts / (width * ev.shape[0] * ev.shape[1])
    centers = 0.5 * (edges[1:] + edges[:-1])
    return DensityCurve(
        "empirical-histogram",
        p.as_dict() if p is not None else {},
        centers,
        dens,
        {"rescaling": rescaling, "edges": [float(e) for e in edges], "draws": int(ev.shape[0])},
    )
