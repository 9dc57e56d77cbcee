"""Real-argument special functions used by the spectral formulas.

Gamma, Laguerre and the confluent/Gauss hypergeometric series are
implemented here directly; the Bessel family is delegated to
``scipy.special`` behind thin wrappers that enforce the domain contracts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as _sp

from .errors import AccuracyError, DomainError

__all__ = [
    "EvalPolicy",
    "DEFAULT_POLICY",
    "gamma_fn",
    "log_gamma",
    "laguerre",
    "laguerre_table",
    "bessel_j",
    "bessel_i",
    "bessel_i_scaled",
    "bessel_k",
    "hyp1f1",
    "log_hyp1f1",
    "hyp2f1",
    "bessel_j_cumulative",
]

_RESCALE = 1e200
_LOG_RESCALE = math.log(_RESCALE)


@dataclass(frozen=True)
class EvalPolicy:
    rel_tol: float = 1e-12
    max_terms: int = 2000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise DomainError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_terms < 50:
            raise DomainError(f"max_terms must be >= 50, got {self.max_terms}")


DEFAULT_POLICY = EvalPolicy()


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def gamma_fn(x: float, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    if _is_nonpositive_int(x):
        raise DomainError(f"Gamma has a pole at {x}")
    return math.gamma(x)


def log_gamma(x: float) -> float:
    """log|Gamma(x)|."""
    if _is_nonpositive_int(x):
        raise DomainError(f"Gamma has a pole at {x}")
    return math.lgamma(x)


def laguerre_table(kmax: int, nu: float, z, weighted: bool = False) -> np.ndarray:
    """Rows L_0^nu(z), ..., L_kmax^nu(z) from the three-term recurrence.

    With ``weighted`` every row carries the factor exp(-z/2), which keeps
    large arguments from overflowing (the recurrence is linear).
    """
    z = np.asarray(z, dtype=float)
    out = np.empty((kmax + 1,) + z.shape)
    out[0] = np.exp(-0.5 * z) if weighted else 1.0
    if kmax >= 1:
        out[1] = (nu + 1.0 - z) * out[0]
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + nu + 1.0 - z) * out[k] - (k + nu) * out[k - 1]) / (k + 1.0)
    return out


def laguerre(k: int, nu: float, z):
    if k < 0 or k > 10_000:
        raise DomainError(f"Laguerre degree must lie in [0, 10^4], got {k}")
    val = laguerre_table(k, nu, z)[k]
    return float(val) if np.ndim(val) == 0 else val


def bessel_j(nu: float, x):
    """J_nu(x); negative x accepted for integer order."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) and not float(nu).is_integer():
        raise DomainError("negative argument needs integer order")
    val = _sp.jv(nu, x)
    return float(val) if val.ndim == 0 else val


def bessel_i(nu: float, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) and not float(nu).is_integer():
        raise DomainError("negative argument needs integer order")
    val = _sp.iv(nu, x)
    return float(val) if val.ndim == 0 else val


def bessel_i_scaled(nu: float, x):
    """exp(-|x|) I_nu(x), safe against overflow."""
    x = np.asarray(x, dtype=float)
    val = _sp.ive(nu, x)
    return float(val) if val.ndim == 0 else val


def bessel_k(mu: float, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("bessel_k needs x > 0")
    val = _sp.kv(mu, x)
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------- 1F1


def _series_1f1(a: float, b: float, z: np.ndarray, policy: EvalPolicy):
    """Power series of 1F1, summed with periodic rescaling.

    Returns (sign, log|value|) elementwise.
    """
    s = np.ones_like(z)
    t = np.ones_like(z)
    logscale = np.zeros_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(policy.max_terms):
        t = np.where(active, t * ((a + k) / (b + k)) * z / (k + 1.0), t)
        s = np.where(active, s + t, s)
        big = np.abs(s) > _RESCALE
        if np.any(big):
            s = np.where(big, s / _RESCALE, s)
            t = np.where(big, t / _RESCALE, t)
            logscale = logscale + big * _LOG_RESCALE
        # only stop once the term ratio has started to shrink
        shrinking = np.abs((a + k + 1) * z) < np.abs((b + k + 1) * (k + 2))
        done = (np.abs(t) <= policy.rel_tol * np.abs(s)) & shrinking
        if a + k == 0:
            done[:] = True
        active &= ~done
        if not active.any():
            break
    else:
        raise AccuracyError(
            f"1F1({a}; {b}; z) series did not converge within {policy.max_terms} terms"
        )
    return np.sign(s), logscale + np.log(np.abs(s))


def _asymptotic_1f1_neg(a: float, b: float, x: float, policy: EvalPolicy):
    """log 1F1(a; b; -x) for large x > 0, or None if the expansion is inadequate."""
    if _is_nonpositive_int(b - a):
        return None
    log_main = _sp.gammaln(b) - _sp.gammaln(b - a) - a * math.log(x)
    if not _is_nonpositive_int(a):
        # exponentially small companion term must be negligible
        log_other = -x + (a - b) * math.log(x) + _sp.gammaln(b) - _sp.gammaln(a)
        if log_other - log_main > math.log(policy.rel_tol) - 3.0:
            return None
    s = 1.0
    t = 1.0
    prev = math.inf
    for k in range(policy.max_terms):
        t *= (a + k) * (a - b + 1 + k) / ((k + 1.0) * x)
        if abs(t) > prev:
            return None  # divergent tail reached before convergence
        s += t
        if abs(t) <= policy.rel_tol * abs(s):
            break
        prev = abs(t)
    else:
        return None
    if s <= 0:
        return None
    sign_gamma = np.sign(_sp.gamma(b)) * np.sign(_sp.gamma(b - a))
    if sign_gamma < 0:
        return None
    return log_main + math.log(s)


def log_hyp1f1(a: float, b: float, z, policy: EvalPolicy = DEFAULT_POLICY):
    """Return (sign, log|1F1(a; b; z)|), vectorised over z."""
    if _is_nonpositive_int(b):
        raise DomainError(f"1F1 has a pole at b = {b}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    sign = np.ones_like(z)
    logv = np.zeros_like(z)
    if a == b:
        return sign, z.copy()
    if _is_nonpositive_int(a):
        sg, lv = _series_1f1(a, b, z, policy)
        return sg, lv
    neg = z < 0
    pos = ~neg
    if np.any(pos):
        sg, lv = _series_1f1(a, b, z[pos], policy)
        sign[pos] = sg
        logv[pos] = lv
    if np.any(neg):
        idx = np.flatnonzero(neg)
        pending = []
        for i in idx:
            x = -z[i]
            asy = _asymptotic_1f1_neg(a, b, x, policy) if x > 30.0 else None
            if asy is None:
                pending.append(i)
            else:
                logv[i] = asy
        if pending:
            pending = np.asarray(pending)
            # Kummer: 1F1(a;b;z) = e^z 1F1(b-a;b;-z)
            sg, lv = _series_1f1(b - a, b, -z[pending], policy)
            sign[pending] = sg
            logv[pending] = lv + z[pending]
    return sign, logv


def hyp1f1(a: float, b: float, z, policy: EvalPolicy = DEFAULT_POLICY):
    scalar = np.ndim(z) == 0
    sign, logv = log_hyp1f1(a, b, z, policy)
    val = sign * np.exp(logv)
    return float(val[0]) if scalar else val


# ---------------------------------------------------------------- 2F1


def _series_2f1(a, b, c, z, max_terms, tol):
    s = 1.0
    t = 1.0
    for k in range(max_terms):
        if a + k == 0 or b + k == 0:
            return s
        t *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        s += t
        if abs(t) <= tol * abs(s) and abs(z) < 1:
            # with |z| < 1 the ratio tends to z, so tail is bounded by a geometric series
            ratio = abs((a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2.0)) * z)
            if ratio < 1:
                return s
    raise AccuracyError(f"2F1({a}, {b}; {c}; {z}) did not converge in {max_terms} terms")


def hyp2f1(a: float, b: float, c: float, z: float, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    if _is_nonpositive_int(c):
        raise DomainError(f"2F1 has a pole at c = {c}")
    z = float(z)
    if z > 0.999:
        raise DomainError(f"2F1 argument must be <= 0.999, got {z}")
    if z == 0.0:
        return 1.0
    terminating = _is_nonpositive_int(a) or _is_nonpositive_int(b)
    if terminating:
        n = int(-min(x for x in (a, b) if _is_nonpositive_int(x)))
        return _series_2f1(a, b, c, z, n + 2, 0.0)
    if z < -0.5:
        w = z / (z - 1.0)
        # Pfaff; prefer the variant whose series terminates
        if _is_nonpositive_int(c - a):
            return (1.0 - z) ** (-b) * hyp2f1(c - a, b, c, w, policy)
        return (1.0 - z) ** (-a) * hyp2f1(a, c - b, c, w, policy)
    budget = policy.max_terms
    if z > 0.5:
        budget = max(budget, int(math.ceil(60.0 / -math.log(z))))
    return _series_2f1(a, b, c, z, budget, policy.rel_tol)


# ---------------------------------------------------------------- cumulative Bessel


@lru_cache(maxsize=64)
def _zero_panels(nu: int, count: int, nodes: int):
    zeros = np.concatenate([[0.0], _sp.jn_zeros(nu, count)])
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = zeros[:-1], zeros[1:]
    half = 0.5 * (hi - lo)
    pts = 0.5 * (hi + lo)[:, None] + half[:, None] * x[None, :]
    panel = (half[:, None] * w[None, :] * _sp.jv(nu, pts)).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(panel)])
    return zeros, cum


def _cumulative_quadrature(nu: int, v, nodes: int = 32) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    av = np.abs(v)
    vmax = float(av.max()) if av.size else 0.0
    count = int(vmax / math.pi + nu + 4)
    count = 1 << max(3, math.ceil(math.log2(count)))  # round up so the cache is reused
    zeros, cum = _zero_panels(nu, count, nodes)
    k = np.searchsorted(zeros, av, side="right") - 1
    lo = zeros[k]
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (av - lo)
    pts = (0.5 * (av + lo))[..., None] + half[..., None] * x
    tail = (half[..., None] * w * _sp.jv(nu, pts)).sum(axis=-1)
    out = cum[k] + tail
    # integral of J_nu over [0, -v] picks up (-1)^(nu+1)
    return np.where(v < 0, (-1.0) ** (nu + 1) * out, out)


# Above nu + this the upward recurrence is free of cancellation.
_RECURRENCE_START = 10.0


def _cumulative_closed(nu: int, v: np.ndarray) -> np.ndarray:
    """Struve form for nu = 0 or 1 - J_0 for nu = 1, then int J_{k+1} = int J_{k-1} - 2 J_k."""
    av = np.abs(v)
    if nu % 2 == 0:
        acc = av * _sp.j0(av) + 0.5 * math.pi * av * (
            _sp.j1(av) * _sp.struve(0, av) - _sp.j0(av) * _sp.struve(1, av)
        )
        k = 0
    else:
        acc = 1.0 - _sp.j0(av)
        k = 1
    while k < nu:
        acc = acc - 2.0 * _sp.jv(k + 1, av)
        k += 2
    return np.where(v < 0, (-1.0) ** (nu + 1) * acc, acc)


def bessel_j_cumulative(nu: int, v, nodes: int = 32):
    """Integral of J_nu(t) for t from 0 to v.

    Quadrature panels run between consecutive zeros of J_nu.  For nu = 1 the
    exact antiderivative 1 - J_0(v) is used; note it differs by the constant 1
    from the bare J_0(v) sometimes quoted for this integral.
    """
    if nu < 0 or not float(nu).is_integer():
        raise DomainError(f"order must be a nonnegative integer, got {nu}")
    nu = int(nu)
    v = np.asarray(v, dtype=float)
    if nu == 1:
        val = 1.0 - _sp.jv(0, v)
    else:
        val = np.empty(v.shape)
        big = np.abs(v) >= nu + _RECURRENCE_START
        if np.any(~big):
            val[~big] = _cumulative_quadrature(nu, v[~big], nodes)
        if np.any(big):
            val[big] = _cumulative_closed(nu, v[big])
    return float(val) if np.ndim(val) == 0 else val
