"""Fitting the deformed Marchenko-Pastur law to empirical spectra.

Eigenvalues are rescaled to unit mean, the normalization shared by every
macroscopic law, and alpha is chosen by maximum likelihood or by a binned
least-squares match.

For alpha <= 1 the sample mean of a deformed spectrum has infinite variance,
so the unit-mean rescaling is itself noisy.  Each objective therefore profiles
a scale factor s, comparing the data with rho_alpha(x/s)/s; s = 1 is exactly
unit mean.  log rho_alpha is tabulated on a log-spaced grid and interpolated,
which keeps one evaluation cheap even for 10^5 eigenvalues.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from .errors import DegenerateDataError, DomainError
from .macrolaw import ScalingParams, log_gen_density
from .mcsampler import MAX_BINS, eigensolve_selfadjoint

__all__ = [
    "IngestedSpectrum",
    "FitReport",
    "FitBoundaryWarning",
    "ingest_timeseries",
    "read_table",
    "read_eigenvalues",
    "log_likelihood",
    "profile_log_likelihood",
    "fit_alpha",
    "overlay_csv",
    "ALPHA_BRACKET",
    "PROFILE_POINTS",
]

ALPHA_BRACKET = (-0.9, 50.0)
PROFILE_POINTS = 21
_GRID_POINTS = 1200
_GOLDEN_TOL = 1e-4
# log of the largest scale correction profiled; the table covers it
_LOG_SCALE_SPAN = 2.0
_ZERO_TOL = 1e-10


class FitBoundaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IngestedSpectrum:
    """Unit-mean eigenvalues of the sample covariance X^T X of a data table."""

    eigenvalues: np.ndarray
    c: float
    rescale_mean: float
    rows: int
    columns: int
    dropped_zeros: int = 0
    notes: tuple = ()

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.eigenvalues, dtype=dtype)

    def __len__(self):
        return len(self.eigenvalues)


def ingest_timeseries(table) -> IngestedSpectrum:
    """Rows are observations, columns are series.

    Columns are standardized to zero mean and unit variance; the eigenvalues
    of X^T X are divided by their mean.  With rows <= columns the zero modes
    are dropped and the rank deficiency is noted.
    """
    x = np.asarray(table, dtype=float)
    if x.ndim != 2:
        raise DomainError("expected a 2-d table (rows = observations, columns = series)")
    m, n = x.shape
    if n < 2 or m < 2:
        raise DomainError("need at least two rows and two columns")
    if np.any(~np.isfinite(x)):
        raise DomainError("table contains missing or non-finite values")
    sd = x.std(axis=0)
    if np.any(sd <= 1e-14 * np.maximum(np.abs(x).max(axis=0), 1e-300)):
        bad = np.flatnonzero(sd <= 1e-14 * np.maximum(np.abs(x).max(axis=0), 1e-300))
        raise DegenerateDataError(f"constant columns: {bad.tolist()}")
    z = (x - x.mean(axis=0)) / sd
    # duplicated columns make the covariance singular with no rank excuse
    corr = (z.T @ z) / m
    iu = np.triu_indices(n, 1)
    if np.any(np.abs(corr[iu]) > 1.0 - 1e-12):
        raise DegenerateDataError("two columns are identical up to scale")
    ev = eigensolve_selfadjoint(z.T @ z)
    notes = []
    keep = ev > _ZERO_TOL * max(float(ev[-1]), 1e-300)
    dropped = int((~keep).sum())
    if m <= n:
        notes.append(f"rank deficient: {m} rows for {n} columns")
    if dropped:
        notes.append(f"dropped {dropped} zero eigenvalues")
    ev = ev[keep]
    mean = float(ev.mean())
    return IngestedSpectrum(ev / mean, min(n / m, 1.0), mean, m, n, dropped, tuple(notes))


def read_table(text: str) -> np.ndarray:
    """CSV with rows = observations; a non-numeric first row is taken as a header."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows:
        raise DomainError("empty table")
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        return np.array(rows, dtype=float)
    except ValueError as exc:
        raise DomainError(f"table is not rectangular and numeric: {exc}") from exc


def read_eigenvalues(text: str) -> np.ndarray:
    vals = [float(line.split(",")[0]) for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not vals:
        raise DomainError("no eigenvalues found")
    return np.sort(np.array(vals))


@dataclass
class FitReport:
    alpha_hat: float
    c: float
    objective: float
    method: str
    n_eigenvalues: int
    rescale_mean: float
    scale_hat: float = 1.0
    profile_alpha: list = field(default_factory=list)
    profile_objective: list = field(default_factory=list)
    at_boundary: bool = False
    dropped_zeros: int = 0
    notes: list = field(default_factory=list)

    def __post_init__(self):
        lo, hi = ALPHA_BRACKET
        if not lo <= self.alpha_hat <= hi:
            raise DomainError(f"alpha_hat {self.alpha_hat} outside the bracket {ALPHA_BRACKET}")
        if not math.isfinite(self.objective):
            raise DomainError("objective must be finite")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FitReport":
        return cls(**json.loads(text))


def _prepare(eigenvalues) -> tuple[np.ndarray, float, int]:
    x = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
    if x.size < 2:
        raise DegenerateDataError("need at least two eigenvalues")
    if np.any(~np.isfinite(x)):
        raise DomainError("eigenvalues must be finite")
    if np.any(x < -_ZERO_TOL * max(abs(x[-1]), 1e-300)):
        raise DomainError("eigenvalues must be nonnegative")
    pos = x > _ZERO_TOL * max(x[-1], 1e-300)
    dropped = int((~pos).sum())
    x = x[pos]
    if x.size < 2 or x[-1] - x[0] <= 1e-12 * x[-1]:
        raise DegenerateDataError("all eigenvalues are identical")
    mean = float(x.mean())
    return x / mean, mean, dropped


class _LogDensityTable:
    """Spline of log rho_alpha in log x over the data range."""

    def __init__(self, x: np.ndarray, c: float):
        self.c = c
        pad = math.exp(_LOG_SCALE_SPAN) * 1.01
        self.grid = np.geomspace(x[0] / pad, x[-1] * pad, _GRID_POINTS)
        self.logx = np.log(self.grid)

    def spline(self, alpha: float) -> CubicSpline:
        return CubicSpline(self.logx, log_gen_density(self.grid, ScalingParams(alpha, self.c)))


def _profile_scale(f):
    """min over log s in [-span, span] of f(log s); returns (value, log s)."""
    r = optimize.minimize_scalar(
        f, bounds=(-_LOG_SCALE_SPAN, _LOG_SCALE_SPAN), method="bounded", options={"xatol": 1e-7}
    )
    return float(r.fun), float(r.x)


def log_likelihood(eigenvalues, alpha: float, c: float) -> float:
    """Mean log rho_alpha over unit-mean eigenvalues (exact evaluation)."""
    x, _, _ = _prepare(eigenvalues)
    return float(np.mean(log_gen_density(x, ScalingParams(alpha, c))))


def profile_log_likelihood(eigenvalues, alpha: float, c: float) -> float:
    """Mean log-likelihood maximized over the scale nuisance (the MLE objective, sign flipped)."""
    x, _, _ = _prepare(eigenvalues)
    sp = _LogDensityTable(x, c).spline(alpha)
    logx = np.log(x)
    val, _ = _profile_scale(lambda ls: ls - float(np.mean(sp(logx - ls))))
    return -val


def _golden(f, a: float, b: float, tol: float):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _profile_grid() -> np.ndarray:
    # even in log(1 + alpha): resolves small alpha, where the tail is heaviest
    lo, hi = ALPHA_BRACKET
    return np.expm1(np.linspace(math.log1p(lo), math.log1p(hi), PROFILE_POINTS))


def _histogram(x: np.ndarray, bins=None):
    # the heavy tail would dilute the bins; histogram the bulk up to the 99th percentile
    top = float(np.quantile(x, 0.99))
    edges = np.histogram_bin_edges(x, bins="fd" if bins is None else bins, range=(0.0, top))
    if edges.size - 1 > MAX_BINS:
        edges = np.linspace(0.0, top, MAX_BINS + 1)
    counts, edges = np.histogram(x, bins=edges)
    dens = counts / (np.diff(edges) * x.size)
    return edges, dens


def fit_alpha(
    eigenvalues,
    c: float | None = None,
    method: str = "mle",
    *,
    bins=None,
    workers: int = 1,
) -> FitReport:
    """Fit alpha over ALPHA_BRACKET.

    ``eigenvalues`` may be an IngestedSpectrum, whose c and rescaling are then
    used.  The objective (minimized) is the mean negative log-likelihood for
    ``mle`` and the binned squared L2 distance for ``least_squares``, each
    minimized over the scale s first (reported as ``scale_hat``).  A
    21-point profile locates the basin; golden-section search refines it.
    """
    if method not in ("mle", "least_squares"):
        raise DomainError(f"unknown method {method!r}")
    notes: list = []
    scale_in = 1.0
    dropped_in = 0
    if isinstance(eigenvalues, IngestedSpectrum):
        notes.extend(eigenvalues.notes)
        scale_in, dropped_in = eigenvalues.rescale_mean, eigenvalues.dropped_zeros
        if c is None:
            c = eigenvalues.c
        eigenvalues = eigenvalues.eigenvalues
    if c is None:
        raise DomainError("c must be given (N/M of the data)")
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    x, mean, dropped = _prepare(eigenvalues)
    table = _LogDensityTable(x, c)
    logx = np.log(x)

    if method == "mle":
        def objective_scaled(alpha):
            sp = table.spline(alpha)
            # density of s * X is rho(x / s) / s
            return _profile_scale(lambda ls: ls - float(np.mean(sp(logx - ls))))
    else:
        edges, dens = _histogram(x, bins)
        centers, width = 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)
        logc = np.log(centers)

        def objective_scaled(alpha):
            sp = table.spline(alpha)
            return _profile_scale(
                lambda ls: float(np.sum(width * (dens - np.exp(sp(logc - ls) - ls)) ** 2))
            )

    def objective(alpha):
        return objective_scaled(alpha)[0]

    grid = _profile_grid()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            prof = np.array(list(pool.map(objective, grid)))
    else:
        prof = np.array([objective(a) for a in grid])
    i = int(np.nanargmin(prof))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    a_hat, f_hat = _golden(objective, lo, hi, _GOLDEN_TOL)
    if f_hat > prof[i]:
        # the profile minimum is not inside a unimodal basin; keep the grid point
        a_hat, f_hat = float(grid[i]), float(prof[i])
        notes.append("golden-section refinement did not improve on the profile")
    log_scale = objective_scaled(a_hat)[1]
    at_boundary = bool(
        min(a_hat - ALPHA_BRACKET[0], ALPHA_BRACKET[1] - a_hat) < 1e-3 * (1.0 + abs(a_hat))
        or i in (0, grid.size - 1)
    )
    if at_boundary:
        notes.append("optimum at the bracket boundary")
        warnings.warn(
            f"fitted alpha {a_hat:.4g} sits at the search boundary {ALPHA_BRACKET}",
            FitBoundaryWarning,
            stacklevel=2,
        )
    return FitReport(
        alpha_hat=float(a_hat),
        c=float(c),
        objective=float(f_hat),
        method=method,
        n_eigenvalues=int(x.size),
        rescale_mean=float(mean * scale_in),
        scale_hat=float(math.exp(log_scale)),
        profile_alpha=[float(a) for a in grid],
        profile_objective=[float(v) for v in prof],
        at_boundary=at_boundary,
        dropped_zeros=dropped + dropped_in,
        notes=notes,
    )


def overlay_csv(eigenvalues, report: FitReport, bins=None) -> str:
    """Histogram of the unit-mean data next to the fitted density: ``x,empirical,fitted``."""
    x, _, _ = _prepare(np.asarray(eigenvalues))
    edges, dens = _histogram(x, bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    s = report.scale_hat
    fitted = np.exp(log_gen_density(centers / s, ScalingParams(report.alpha_hat, report.c))) / s
    buf = io.StringIO()
    buf.write("x,empirical,fitted\n")
    for a, b, f in zip(centers, dens, fitted):
        buf.write(f"{a:.17g},{b:.17g},{f:.17g}\n")
    return buf.getvalue()
