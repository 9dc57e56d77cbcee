"""Macroscopic densities: Marcenko-Pastur and its power-law deformation.

Densities are in the unit-mean variable x = lambda / <lambda>.  The deformed
law is the Gamma(alpha + 1) average of the MP law rescaled by xi / |alpha|:

    rho_alpha(x) = E[(xi/|alpha|) rho_MP(x xi/|alpha|)].

For -1 < alpha < 0 the |alpha| convention keeps the law normalized even
though its first moment is infinite.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import AccuracyError, DomainError, MomentDivergenceError, NumericalError
from .gammamix import truncated_rule
from .specfun import hyp2f1, log_hyp1f1

__all__ = [
    "ScalingParams",
    "TailConstants",
    "DensityCurve",
    "make_grid",
    "mp_density",
    "gen_density_c1",
    "gen_density_c1_integral",
    "gen_density_clt1",
    "gen_density",
    "log_gen_density",
    "tail_constants",
    "tail_prefactor",
    "small_x_prefactor",
    "pseudo_edge",
    "theta_map",
    "density_moments",
    "connected_two_point_demo",
]

@dataclass(frozen=True)
class ScalingParams:
    alpha: float
    c: float = 1.0
    beta: int = 2
    nu: int = 0

    def __post_init__(self):
        if not (self.alpha > -1.0) or self.alpha == 0.0 or not math.isfinite(self.alpha):
            raise DomainError(f"alpha must satisfy alpha > -1, alpha != 0; got {self.alpha}")
        if not (0.0 < self.c <= 1.0):
            raise DomainError(f"c must lie in (0, 1], got {self.c}")
        if self.beta not in (1, 2, 4):
            raise DomainError(f"beta must be 1, 2 or 4, got {self.beta}")
        if int(self.nu) != self.nu or self.nu < 0:
            raise DomainError(f"nu must be a nonnegative integer, got {self.nu}")

    @property
    def abs_alpha(self) -> float:
        return abs(self.alpha)

    @property
    def x_minus(self) -> float:
        return (self.c**-0.5 - 1.0) ** 2

    @property
    def x_plus(self) -> float:
        return (self.c**-0.5 + 1.0) ** 2

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "c": self.c, "beta": self.beta, "nu": self.nu}


@dataclass(frozen=True)
class TailConstants:
    C: float
    D: float
    X_minus: float
    X_plus: float


@dataclass(frozen=True)
class DensityCurve:
    """Tabulated law on an increasing grid."""

    law_id: str
    params: dict
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise DomainError("grid and values must be 1-d arrays of equal length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(~np.isfinite(v)):
            raise DomainError("values must be finite")
        if np.any(v < -1e-12):
            raise DomainError("density values must be nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", np.clip(v, 0.0, None))

    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, val in self.meta.items():
            buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
        buf.write("x,value\n")
        for x, y in zip(self.grid, self.values):
            buf.write(f"{x:.17g},{y:.17g}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "law_id": self.law_id,
                "params": self.params,
                "grid": [float(x) for x in self.grid],
                "values": [float(y) for y in self.values],
                "meta": self.meta,
            },
            sort_keys=True,
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "DensityCurve":
        d = json.loads(text)
        return cls(d["law_id"], d["params"], np.array(d["grid"]), np.array(d["values"]), d.get("meta", {}))

    @classmethod
    def from_csv(cls, text: str, law_id: str = "external", params: dict | None = None) -> "DensityCurve":
        rows = [r for r in csv.reader(l for l in io.StringIO(text) if not l.startswith("#"))]
        if not rows or rows[0] != ["x", "value"]:
            raise DomainError("expected header 'x,value'")
        data = np.array(rows[1:], dtype=float).reshape(-1, 2)
        return cls(law_id, params or {}, data[:, 0], data[:, 1])


def make_grid(lo: float, hi: float, points: int, spacing: str = "log") -> np.ndarray:
    if points < 2 or not hi > lo:
        raise DomainError("grid needs points >= 2 and hi > lo")
    if spacing == "log":
        if lo <= 0:
            raise DomainError("log grid needs lo > 0")
        return np.geomspace(lo, hi, points)
    if spacing == "linear":
        return np.linspace(lo, hi, points)
    raise DomainError(f"unknown grid spacing {spacing!r}")


def _out(val, scalar):
    return float(val.reshape(-1)[0]) if scalar else val


# ---------------------------------------------------------------- MP


def mp_density(x, c: float = 1.0):
    """Marcenko-Pastur density with unit mean."""
    if not (0.0 < c <= 1.0):
        raise DomainError(f"c must lie in (0, 1], got {c}")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo = c * (c**-0.5 - 1.0) ** 2
    hi = c * (c**-0.5 + 1.0) ** 2
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi) & (x > 0)
    xi = x[inside]
    out[inside] = np.sqrt(np.clip((xi - lo) * (hi - xi), 0.0, None)) / (2.0 * math.pi * c * xi)
    return _out(out, scalar)


# ---------------------------------------------------------------- deformed, c = 1


def _log_pref_c1(alpha: float) -> float:
    a = abs(alpha)
    return (
        math.lgamma(alpha + 1.5)
        - math.log(4.0 * a * math.sqrt(math.pi))
        - math.lgamma(alpha + 1.0)
        - math.lgamma(alpha + 3.0)
    )


def _log_density_c1(x: np.ndarray, alpha: float) -> np.ndarray:
    a = abs(alpha)
    z = 4.0 * a / x
    sign, lf = log_hyp1f1(alpha + 1.5, alpha + 3.0, -z)
    if np.any(sign <= 0):
        raise AccuracyError("1F1 evaluated nonpositive where it must be positive")
    return _log_pref_c1(alpha) + (alpha + 2.0) * np.log(z) + lf


def _log_density_c1_integral(x: np.ndarray, alpha: float, nodes: int = 400) -> np.ndarray:
    # int_0^1 e^{-z t} t^{alpha+1} sqrt(1/t - 1) dt = int e^{-z t} t^alpha sqrt(t (1 - t)) dt
    a = abs(alpha)
    z = 4.0 * a / x
    li = _log_trunc_integral(z, alpha, 0.0, 1.0, nodes)
    return li + (alpha + 2.0) * np.log(z) - math.log(2.0 * math.pi * a) - math.lgamma(alpha + 1.0)


_WINDOW = 80.0  # log-units kept below the integrand maximum


def _window(k, power, lo, hi):
    """Sub-interval of [lo, hi] outside which e^{-k t} t^power is < e^{-80} of its max."""
    k = np.asarray(k, dtype=float)
    tpk = np.clip(power / k, lo, hi) if power > 0 else np.full_like(k, lo)

    def logf(t):
        # a decreasing t^power only shrinks the tail, so e^{-k t} alone is a safe bound
        if power <= 0:
            return -k * t
        with np.errstate(divide="ignore"):
            return -k * t + power * np.log(t)

    top = logf(tpk)

    def bisect(a, b, decreasing):
        for _ in range(80):
            mid = 0.5 * (a + b)
            below = logf(mid) < top - _WINDOW
            if decreasing:
                b = np.where(below, mid, b)
                a = np.where(below, a, mid)
            else:
                a = np.where(below, mid, a)
                b = np.where(below, b, mid)
        return b if decreasing else a

    hi_arr = np.full_like(k, hi)
    lo_arr = np.full_like(k, lo)
    up = np.where(logf(hi_arr) < top - _WINDOW, bisect(tpk, hi_arr, True), hi_arr)
    if power > 0 and lo > 0:
        down = np.where(logf(lo_arr) < top - _WINDOW, bisect(lo_arr, tpk, False), lo_arr)
    else:
        down = lo_arr
    return down, up


def _log_trunc_integral(k, power, lo, hi, nodes=400):
    """log int_lo^hi e^{-k t} t^power sqrt((t - lo)(hi - t)) dt, vectorized in k.

    t = a + (b - a) sin^2(theta) on the window [a, b] where the integrand is
    not negligible; the square-root edges become smooth and node doubling
    stops once successive results agree.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    a, b = _window(k, power, lo, hi)
    L = (b - a)[:, None]
    prev = None
    n = nodes
    for _ in range(4):
        theta, w = truncated_rule(n)
        s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
        t = a[:, None] + L * s2
        d_lo = (a - lo)[:, None] + L * s2
        d_hi = (hi - b)[:, None] + L * c2
        with np.errstate(divide="ignore"):
            e = (
                np.log(2.0 * w * np.sqrt(s2 * c2))
                + np.log(L)
                + 0.5 * (np.log(d_lo) + np.log(d_hi))
                + (power * np.log(t) if power else 0.0)
                - k[:, None] * t
            )
        m = e.max(axis=1, keepdims=True)
        cur = m[:, 0] + np.log(np.exp(e - m).sum(axis=1))
        if prev is not None and np.all(np.abs(cur - prev) < 1e-13 * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
        n *= 2
    if np.all(np.abs(cur - prev) < 1e-10 * np.maximum(1.0, np.abs(cur))):
        return cur
    raise AccuracyError("truncated-support quadrature did not converge")


def gen_density_c1(x, alpha: float | ScalingParams):
    """Deformed c = 1 density via the 1F1 closed form (log domain)."""
    alpha = alpha.alpha if isinstance(alpha, ScalingParams) else float(alpha)
    ScalingParams(alpha)  # validates
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        try:
            out[pos] = np.exp(_log_density_c1(x[pos], alpha))
        except AccuracyError:
            out[pos] = np.exp(_log_density_c1_integral(x[pos], alpha))
    return _out(out, scalar)


def gen_density_c1_integral(x, alpha: float):
    """Same law from its defining t-integral; an independent route for tests."""
    ScalingParams(alpha)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(_log_density_c1_integral(x[pos], alpha))
    return _out(out, scalar)


# ---------------------------------------------------------------- deformed, c < 1


def _log_density_clt1(x: np.ndarray, p: ScalingParams, nodes: int = 400) -> np.ndarray:
    a, c = p.abs_alpha, p.c
    k = c * a / x
    li = _log_trunc_integral(k, p.alpha, p.x_minus, p.x_plus, nodes)
    return li + (p.alpha + 2.0) * np.log(k) - math.log(2.0 * math.pi * c * a) - math.lgamma(p.alpha + 1.0)


def gen_density_clt1(x, params: ScalingParams):
    if params.c >= 1.0:
        raise DomainError("gen_density_clt1 needs c < 1; use gen_density_c1")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        out[pos] = np.exp(_log_density_clt1(x[pos], params))
    return _out(out, scalar)


def log_gen_density(x, params: ScalingParams):
    """log rho_alpha(x) for x > 0; finite even where the density underflows."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("log density needs x > 0")
    xa = np.atleast_1d(x)
    if params.c >= 1.0:
        try:
            val = _log_density_c1(xa, params.alpha)
        except AccuracyError:
            val = _log_density_c1_integral(xa, params.alpha)
    else:
        val = _log_density_clt1(xa, params)
    return float(val[0]) if x.ndim == 0 else val


def gen_density(x, params: ScalingParams):
    if params.c >= 1.0:
        return gen_density_c1(x, params.alpha)
    return gen_density_clt1(x, params)


# ---------------------------------------------------------------- asymptotics


def tail_constants(params: ScalingParams) -> TailConstants:
    """C (large-x) and D (small-x) for c < 1.

    D is the Laplace-method constant X_-^alpha (X_+ - X_-)^{1/2}
    (c|alpha|)^{alpha - 1/2} / (4 sqrt(pi) Gamma(alpha + 1)); the value with
    1/16 in place of 1/(4 sqrt(pi)) does not match the density numerically.
    """
    if params.c >= 1.0:
        raise DomainError("tail constants are defined for c < 1")
    a, xm, xp = params.abs_alpha, params.x_minus, params.x_plus
    w = xp - xm
    C = 0.125 * math.pi * w**2 * xm**params.alpha * hyp2f1(1.5, -params.alpha, 3.0, -w / xm)
    logD = (
        params.alpha * math.log(xm)
        + 0.5 * math.log(w)
        + (params.alpha - 0.5) * math.log(params.c * a)
        - math.log(4.0 * math.sqrt(math.pi))
        - math.lgamma(params.alpha + 1.0)
    )
    return TailConstants(C=C, D=math.exp(logD), X_minus=xm, X_plus=xp)


def tail_prefactor(params: ScalingParams) -> float:
    """K with rho_alpha(x) ~ K x^{-(alpha + 2)} as x -> infinity."""
    a = params.abs_alpha
    if params.c >= 1.0:
        return math.exp(
            math.lgamma(params.alpha + 1.5)
            + (params.alpha + 1.0) * math.log(4.0 * a)
            - 0.5 * math.log(math.pi)
            - math.lgamma(params.alpha + 1.0)
            - math.lgamma(params.alpha + 3.0)
        )
    C = tail_constants(params).C
    return (params.c * a) ** (params.alpha + 1.0) * C / (2.0 * math.pi * math.gamma(params.alpha + 1.0))


def small_x_prefactor(params: ScalingParams) -> float:
    """c = 1: rho ~ K x^{-1/2}.  c < 1: rho ~ D x^{-alpha-1/2} exp(-c|alpha| X_-/x)."""
    if params.c >= 1.0:
        a = params.abs_alpha
        return math.exp(math.lgamma(params.alpha + 1.5) - math.lgamma(params.alpha + 1.0)) / (
            math.pi * math.sqrt(a)
        )
    return tail_constants(params).D


def pseudo_edge(params: ScalingParams) -> float:
    """Root of (alpha + 1/2) log X + c|alpha| X_- / X = 1 on (1e-8, c X_-]."""
    if params.c >= 1.0:
        raise DomainError("the pseudo-edge needs c < 1 (X_- = 0 at c = 1)")
    a, c, xm = params.abs_alpha, params.c, params.x_minus

    def f(X):
        return (params.alpha + 0.5) * math.log(X) + c * a * xm / X - 1.0

    lo, hi = 1e-8, c * xm
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise NumericalError(
            f"pseudo-edge equation has no sign change on ({lo}, {hi}] for {params}"
        )
    return optimize.brentq(f, lo, hi, xtol=1e-15, maxiter=500)


def theta_map(density: Callable | DensityCurve) -> Callable:
    """y -> |y| rho(y^2): the law of +-sqrt(x) on the full real axis."""
    if isinstance(density, DensityCurve):
        g, v = density.grid, density.values

        def rho(x):
            return np.interp(x, g, v, left=0.0, right=0.0)
    else:
        rho = density

    def mapped(y):
        y = np.asarray(y, dtype=float)
        val = np.abs(y) * np.asarray(rho(y * y), dtype=float)
        return float(val) if val.ndim == 0 else val

    return mapped


# ---------------------------------------------------------------- moments


def _tail_moment(params: ScalingParams, X: float, m: int) -> float:
    """int_X^inf x^m rho(x) dx by expanding exp(-c|alpha| t/x) in powers of 1/x."""
    a, c = params.abs_alpha, params.c
    xm, xp = (0.0, 4.0) if c >= 1.0 else (params.x_minus, params.x_plus)
    theta, w = truncated_rule(400)
    s, co = np.sin(theta), np.cos(theta)
    t = xm + (xp - xm) * s**2
    jac = 2.0 * w * ((xp - xm) * s * co) ** 2
    k = c * a
    total = 0.0
    term_scale = math.exp(-math.log(2.0 * math.pi * k) - math.lgamma(params.alpha + 1.0))
    for j in range(200):
        Mj = float(np.sum(jac * t ** (params.alpha + j)))
        expo = params.alpha + 1.0 + j - m
        term = (-1.0) ** j * k ** (params.alpha + 2.0 + j) / math.factorial(j) * Mj * X ** (-expo) / expo
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    else:
        raise AccuracyError("tail expansion did not converge; raise the split point")
    return term_scale * total


def density_moments(params: ScalingParams, orders=(0, 1), x_split: float | None = None):
    """Integrals of x^m rho_alpha(x) for m in ``orders``.

    Quadrature in log x up to ``x_split`` plus a convergent series for the
    tail; for c = 1 the x^{-1/2} piece below 1e-16 is added analytically.
    """
    a = params.abs_alpha
    if x_split is None:
        x_split = max(200.0, 40.0 * params.c * a * (params.x_plus if params.c < 1 else 4.0))
    out = []
    lo = 1e-16 if params.c >= 1.0 else max(1e-12, 0.02 * params.c * a * params.x_minus / 40.0)
    u_lo, u_hi = math.log(lo), math.log(x_split)
    panels = 160
    xg, wg = np.polynomial.legendre.leggauss(32)
    edges = np.linspace(u_lo, u_hi, panels + 1)
    half = 0.5 * np.diff(edges)
    u = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * xg[None, :]
    wu = (half[:, None] * wg[None, :]).ravel()
    x = np.exp(u.ravel())
    rho = gen_density(x, params)
    for m in orders:
        if m >= 1 and params.alpha <= m - 1:
            raise MomentDivergenceError(
                f"moment of order {m} diverges for alpha = {params.alpha} (needs alpha > {m - 1})"
            )
        body = float(np.sum(wu * rho * x ** (m + 1)))
        head = 0.0
        if params.c >= 1.0:
            head = small_x_prefactor(params) * lo ** (m + 0.5) / (m + 0.5)
        out.append(head + body + _tail_moment(params, x_split, m))
    return tuple(out)


# ---------------------------------------------------------------- non-universality


def connected_two_point_demo(params, lam: float, mu: float):
    """(R_gamma^conn, mixed R^conn) at finite N; see finite_n.connected_two_point."""
    from .finite_n import connected_two_point

    if params.N > 6:
        raise DomainError("connected_two_point_demo is limited to N <= 6")
    return connected_two_point(params, lam, mu)
