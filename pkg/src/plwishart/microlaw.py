"""Hard-edge microscopic laws in the squared variable y (the full real axis).

All deformed laws share one structure: with xi ~ Gamma(alpha + 1) and
s = sqrt(xi / alpha) / b, where b = Gamma(alpha + 3/2) / (Gamma(alpha + 1)
sqrt(alpha)) makes E[s] = 1,

    f_alpha(y) = E[ s f(y s) ].

This holds for densities, k-point functions (with s^k) and first-eigenvalue
distributions alike.  Laws whose integrand is even in s are averaged with the
plain Gauss-Laguerre rule; the others go through ``mix_sqrt``.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy import special as _sp

from .errors import DomainError, UnsupportedCaseError
from .gammamix import DEFAULT_NODES, MixtureWarning, mix, mix_sqrt
from .specfun import bessel_j_cumulative, log_hyp1f1

__all__ = [
    "MicroParams",
    "b_constant",
    "bessel_density_b2",
    "gen_bessel_density_b2",
    "micro_density_b1",
    "micro_density_b4",
    "micro_density",
    "micro_kpoint_b2",
    "gap_probability",
    "first_eigenvalue_pdf",
    "first_eig_b2_nu1_closed",
    "pfaffian",
    "to_micro",
    "from_micro",
    "SUPPORTED_FIRST_EIG",
]

MAX_NU_B2 = 8
MAX_NU_B1 = 7


def b_constant(alpha: float) -> float:
    if math.isinf(alpha):
        return 1.0
    # poch keeps full precision where the lgamma difference would cancel
    return float(_sp.poch(alpha + 1.0, 0.5)) / math.sqrt(alpha)


@dataclass(frozen=True)
class MicroParams:
    """alpha = inf stands for the undeformed (Wishart-Laguerre) limit."""

    alpha: float
    nu: int = 0
    beta: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"microscopic laws need alpha > 0, got {self.alpha}")
        if int(self.nu) != self.nu or self.nu < 0:
            raise DomainError(f"nu must be a nonnegative integer, got {self.nu}")
        if self.beta not in (1, 2, 4):
            raise DomainError(f"beta must be 1, 2 or 4, got {self.beta}")

    @property
    def b(self) -> float:
        return b_constant(self.alpha)

    @property
    def standard(self) -> bool:
        return math.isinf(self.alpha)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "nu": self.nu, "beta": self.beta}


def _scalar_out(val, scalar):
    val = np.asarray(val, dtype=float)
    return float(val.reshape(-1)[0]) if scalar else val


# ---------------------------------------------------------------- analytic kernels
# F(v) agrees with the law for v >= 0 and is entire in v, so the s-average
# can be split into even and odd parts in sqrt(xi).


def _f2(nu: int, v):
    v = np.asarray(v, dtype=float)
    return 0.5 * v * (_sp.jv(nu, v) ** 2 - _sp.jv(nu - 1, v) * _sp.jv(nu + 1, v))


def _f1(nu: int, v):
    v = np.asarray(v, dtype=float)
    return _f2(nu, v) + 0.5 * _sp.jv(nu, v) * (1.0 - bessel_j_cumulative(nu, v))


def _f4(nu: int, v):
    v = np.asarray(v, dtype=float)
    w = 2.0 * v
    return _f2(2 * nu, w) - 0.5 * _sp.jv(2 * nu, w) * bessel_j_cumulative(2 * nu, w)


def bessel_density_b2(y, nu: int):
    """(|y|/2)(J_nu(y)^2 - J_{nu-1}(y) J_{nu+1}(y))."""
    scalar = np.ndim(y) == 0
    return _scalar_out(_f2(nu, np.abs(np.atleast_1d(y))), scalar)


_MAX_OSC_NODES = 4096
_Y_BLOCK = 64


def _oscillatory_nodes(ymax: float, scale: float) -> int:
    """Rule size that resolves Bessel oscillations at frequency 2 ymax scale in sqrt(xi).

    Laguerre nodes sit about pi / (2 sqrt(n)) apart in sqrt(xi); a rule with
    fewer than four nodes per period aliases the oscillation into a bias that
    node doubling alone does not reliably detect.
    """
    omega = 2.0 * ymax * scale
    n = int(math.ceil(omega * omega / 4.0))
    return int(min(max(DEFAULT_NODES, n), _MAX_OSC_NODES))


def _generalized(F, y, p: MicroParams, odd_terms: bool):
    scalar = np.ndim(y) == 0
    ya = np.abs(np.atleast_1d(np.asarray(y, dtype=float)))
    scale = 1.0 / (math.sqrt(p.alpha) * p.b)
    out = np.empty(ya.shape)
    flat, res = ya.reshape(-1), out.reshape(-1)
    # blocks keep the (nodes, points) work arrays small at fine rules
    for start in range(0, flat.size, _Y_BLOCK):
        yb = flat[start : start + _Y_BLOCK]
        nodes = _oscillatory_nodes(float(yb.max(initial=0.0)), scale)
        if odd_terms:
            def inner(u, yb=yb):
                s = np.asarray(u)[..., None] * scale
                return s * F(s * yb)

            res[start : start + yb.size] = mix_sqrt(p.alpha, inner, node_count=nodes)
        else:
            def inner(xi, yb=yb):
                s = np.sqrt(np.asarray(xi))[..., None] * scale
                return s * F(s * yb)

            res[start : start + yb.size] = mix(p.alpha, inner, node_count=nodes)
    return _scalar_out(out, scalar)


def gen_bessel_density_b2(y, p: MicroParams):
    if p.standard:
        return bessel_density_b2(y, p.nu)
    return _generalized(lambda v: _f2(p.nu, v), y, p, odd_terms=False)


def micro_density_b1(y, p: MicroParams, generalized: bool = True):
    if not generalized or p.standard:
        scalar = np.ndim(y) == 0
        return _scalar_out(_f1(p.nu, np.abs(np.atleast_1d(y))), scalar)
    return _generalized(lambda v: _f1(p.nu, v), y, p, odd_terms=True)


def micro_density_b4(y, p: MicroParams, generalized: bool = True):
    if not generalized or p.standard:
        scalar = np.ndim(y) == 0
        return _scalar_out(_f4(p.nu, np.abs(np.atleast_1d(y))), scalar)
    return _generalized(lambda v: _f4(p.nu, v), y, p, odd_terms=True)


def micro_density(y, p: MicroParams, generalized: bool = True):
    if p.beta == 2:
        return gen_bessel_density_b2(y, p) if generalized else bessel_density_b2(y, p.nu)
    if p.beta == 1:
        return micro_density_b1(y, p, generalized)
    return micro_density_b4(y, p, generalized)


# ---------------------------------------------------------------- k-point, beta = 2


def _kernel_matrix(nu: int, u: np.ndarray) -> np.ndarray:
    """sqrt(u_i u_j)-free part M_ij of the Bessel kernel; shape (..., k, k).

    K(u, v) = sqrt(u v) [u J_{nu+1}(u) J_nu(v) - v J_nu(u) J_{nu+1}(v)] / (u^2 - v^2),
    K(u, u) = (u/2)(J_nu(u)^2 - J_{nu-1}(u) J_{nu+1}(u)).
    """
    j0 = _sp.jv(nu, u)
    j1 = _sp.jv(nu + 1, u)
    ui, uj = u[..., :, None], u[..., None, :]
    num = ui * j1[..., :, None] * j0[..., None, :] - uj * j0[..., :, None] * j1[..., None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        m = num / (ui**2 - uj**2)
    diag = 0.5 * (j0**2 - _sp.jv(nu - 1, u) * j1)
    k = u.shape[-1]
    idx = np.arange(k)
    m[..., idx, idx] = diag
    return m


def micro_kpoint_b2(y, p: MicroParams) -> float:
    """k-point microscopic correlation (k <= 6) in squared variables."""
    y = np.abs(np.asarray(y, dtype=float).ravel())
    k = y.size
    if not 1 <= k <= 6:
        raise DomainError(f"k must lie in 1..6, got {k}")
    if k > 1 and np.min(np.diff(np.sort(y))) <= 1e-12 * max(1.0, float(y.max())):
        raise DomainError("points must be distinct; use the one-point density for k = 1")
    pref = float(np.prod(y))
    if p.standard:
        return pref * float(np.linalg.det(_kernel_matrix(p.nu, y)))
    scale = 1.0 / (math.sqrt(p.alpha) * p.b)

    def inner(xi):
        s = np.sqrt(np.asarray(xi)) * scale
        # s^k from the Jacobians times prod(y_i s) from the kernel prefactor
        return s ** (2 * k) * np.linalg.det(_kernel_matrix(p.nu, s[:, None] * y))

    return pref * float(mix(p.alpha, inner, node_count=_oscillatory_nodes(float(y.max()), scale)))


# ---------------------------------------------------------------- gap probability


def gap_probability(x, params, mode: str = "micro", generalized: bool = True):
    """Probability that (0, x] holds no eigenvalue (beta = 2, nu = 0).

    mode="finite": x is lambda, params an EnsembleParams.
    mode="micro": x is the squared microscopic variable, params a MicroParams.
    """
    if params.beta != 2 or params.nu != 0:
        raise UnsupportedCaseError("closed-form gap probabilities exist for beta = 2, nu = 0 only")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise DomainError("gap length must be nonnegative")
    if mode == "finite":
        N, n, g = params.N, params.n, params.gamma
        if generalized:
            val = (1.0 + 2.0 * n * N * x / g) ** (-(g - N * N))
        else:
            val = np.exp(-2.0 * n * N * x)
    elif mode == "micro":
        if generalized and not params.standard:
            a, b = params.alpha, params.b
            val = (1.0 + x / (4.0 * a * b * b)) ** (-(a + 1.0))
        else:
            val = np.exp(-0.25 * x)
    else:
        raise DomainError(f"mode must be 'finite' or 'micro', got {mode!r}")
    return _scalar_out(val, scalar)


# ---------------------------------------------------------------- Pfaffian


def pfaffian(a) -> np.ndarray | float:
    """Pfaffian of small skew-symmetric matrices by expansion along row 0.

    Batched over leading axes: ``a`` has shape (..., n, n).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise DomainError("pfaffian needs square matrices")
    batch = a.shape[:-2]
    if n == 0:
        out = np.ones(batch)
    elif n % 2:
        out = np.zeros(batch)
    elif n == 2:
        out = a[..., 0, 1].copy()
    else:
        out = np.zeros(batch)
        rest = np.arange(1, n)
        for j in range(1, n):
            keep = rest[rest != j]
            sign = -1.0 if (j - 1) % 2 else 1.0
            out = out + sign * a[..., 0, j] * pfaffian(a[..., keep[:, None], keep[None, :]])
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- first eigenvalue

SUPPORTED_FIRST_EIG = {
    2: set(range(MAX_NU_B2 + 1)),
    1: {0} | {v for v in range(1, MAX_NU_B1 + 1) if v % 2},
    4: {0},
}


def _check_first_eig(p: MicroParams):
    if p.nu not in SUPPORTED_FIRST_EIG[p.beta]:
        why = {
            1: "for beta = 1 the first-eigenvalue law is available only for nu = 0 and odd nu "
            "(even nu > 0 is not known in closed form); odd nu is capped at 7",
            2: "for beta = 2 nu is capped at 8 to keep the Bessel-I determinant well conditioned",
            4: "for beta = 4 the first-eigenvalue law is available only for nu = 0 "
            "(nu > 0 needs partition functions with an odd number of masses, not known in general)",
        }[p.beta]
        raise UnsupportedCaseError(f"(beta, nu) = ({p.beta}, {p.nu}) unsupported: {why}")


# Growth factors exp(k |v|) are kept separate from the scaled Bessel values.
# Inside a mixture the Gaussian exp(-g v^2) sits in the quadrature weight, so
# nodes where the growth factor would overflow carry negligible weight and
# are set to zero.
_EXP_CAP = 700.0


def _grow(k: float, av, gauss: float = 0.0):
    """exp(k |v| - gauss v^2), zero where only the damped weight could tame it."""
    e = k * av - gauss * av * av
    with np.errstate(over="ignore"):
        return np.where(e > _EXP_CAP, 0.0, np.exp(np.minimum(e, _EXP_CAP)))


def _p2_det_direct(nu: int, av):
    i = np.arange(1, nu + 1)
    order = (i[:, None] - i[None, :] + 2).astype(float)
    return np.linalg.det(_sp.ive(order, np.asarray(av, dtype=float)[..., None, None]))


# Rows of det[I_{i-j+2}(v)] become nearly parallel as v grows, and LU in
# double precision loses about 3 digits per doubling of v at nu = 8.  Above
# _DET_SWITCH the log of the scaled determinant is taken from a Chebyshev
# interpolant in log v whose nodes are evaluated once in extended precision.
_DET_SWITCH = 4.0
_DET_NODES = 96
_det_lock = threading.Lock()


@lru_cache(maxsize=None)
def _det_interpolant_unlocked(nu: int):
    import mpmath

    lo, hi = math.log(_DET_SWITCH), math.log(_EXP_CAP / nu + 60.0)
    k = np.arange(_DET_NODES)
    x = np.cos(math.pi * (k + 0.5) / _DET_NODES)
    w = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    vals = np.empty(_DET_NODES)
    with mpmath.workdps(60):
        for idx, wi in enumerate(w):
            v = mpmath.exp(mpmath.mpf(float(wi)))
            cache = {m: mpmath.besseli(m, v) * mpmath.exp(-v) for m in range(2 - nu + 1, nu + 2)}
            mat = mpmath.matrix(nu, nu)
            for i in range(nu):
                for j in range(nu):
                    mat[i, j] = cache[i - j + 2]
            vals[idx] = float(mpmath.log(mpmath.det(mat)))
    cheb = np.polynomial.chebyshev.Chebyshev.fit(x, vals, _DET_NODES - 1, domain=[-1, 1])
    return cheb, lo, hi


def _det_interpolant(nu: int):
    with _det_lock:
        return _det_interpolant_unlocked(nu)


def _p2_det_scaled(nu: int, av):
    """det[I_{i-j+2}(|v|)] exp(-nu |v|)."""
    av = np.asarray(av, dtype=float)
    if nu < 3:
        return _p2_det_direct(nu, av)
    out = np.empty(av.shape)
    small = av < _DET_SWITCH
    if np.any(small):
        out[small] = _p2_det_direct(nu, av[small])
    if np.any(~small):
        cheb, lo, hi = _det_interpolant(nu)
        w = np.clip(np.log(av[~small]), lo, hi)
        out[~small] = np.exp(cheb((2.0 * w - (hi + lo)) / (hi - lo)))
    return out


def _p1_pfaff_scaled(nu: int, v):
    """v^{(3-nu)/2} Pf[(i-j) I_{i+j+3}(v)] exp(-(nu-1)|v|/2), continued to v < 0.

    Half-integer indices run from -nu/2 + 1 to nu/2 - 1 in unit steps; the
    matrix has nu - 1 rows, so the Pfaffian grows like exp((nu-1)|v|/2).
    """
    v = np.asarray(v, dtype=float)
    half = np.arange(-nu / 2 + 1, nu / 2 - 1 + 0.5, 1.0)
    av = np.abs(v)
    if len(half):
        order = half[:, None] + half[None, :] + 3.0
        diff = half[:, None] - half[None, :]
        parity = np.where(v < 0, -1.0, 1.0)[..., None, None] ** order
        pf = pfaffian(diff * _sp.ive(order, av[..., None, None]) * parity)
    else:
        pf = np.ones(v.shape)
    powr = (3 - nu) // 2  # integer for odd nu
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(v != 0, v ** float(powr), 0.0 if powr < 0 else float(powr == 0))
    return lead * pf


_norm_lock = threading.Lock()


@lru_cache(maxsize=None)
def _b1_constant_unlocked(nu: int) -> float:
    m = nu - 1
    f = lambda y: float(_p1_pfaff_scaled(nu, y)) * math.exp(0.5 * m * y - y * y / 8.0)
    val, _ = integrate.quad(f, 0.0, np.inf, limit=400, epsabs=0.0, epsrel=1e-13)
    return 1.0 / val


def _b1_constant(nu: int) -> float:
    with _norm_lock:
        return _b1_constant_unlocked(nu)


_GAUSS = {2: 0.25, 1: 0.125, 4: 0.5}


def _first_eig_parts(p: MicroParams, v, gauss: float):
    """Standard law times exp((g - gauss) v^2), g from _GAUSS.

    gauss = g gives the law itself; gauss = 0 strips the Gaussian so it can
    be moved into the quadrature weight.
    """
    v = np.asarray(v, dtype=float)
    av = np.abs(v)
    if p.beta == 2:
        if p.nu == 0:
            return 0.5 * v * np.exp(-gauss * v * v)
        return 0.5 * v * _p2_det_scaled(p.nu, av) * _grow(p.nu, av, gauss)
    if p.beta == 1:
        if p.nu == 0:
            return 0.25 * (2.0 + v) * np.exp(-0.5 * v - gauss * v * v)
        if p.nu == 1:
            return 0.25 * v * np.exp(-gauss * v * v)
        m = p.nu - 1
        return _b1_constant(p.nu) * _p1_pfaff_scaled(p.nu, v) * _grow(0.5 * m, av, gauss)
    # beta = 4, nu = 0:  v cosh v - sinh v
    e2 = np.exp(-2.0 * av)
    core = 0.5 * (av * (1.0 + e2) - (1.0 - e2))
    core = np.where(av < 1e-3, av**3 / 3.0 + av**5 / 30.0, core)
    return np.sign(v) * core * _grow(1.0, av, gauss)


def _first_eig_standard(p: MicroParams, v):
    return _first_eig_parts(p, v, _GAUSS[p.beta])


def first_eig_b2_nu1_closed(y, alpha: float):
    """beta = 2, nu = 1 deformed law in closed form.

    |y| q Gamma(alpha+3) / (4 alpha b^2 Gamma(alpha+1)) (1+q)^{-(alpha+3)}
    1F1(alpha+3; 3; q/(1+q)),  q = y^2 / (4 alpha b^2).
    """
    scalar = np.ndim(y) == 0
    y = np.abs(np.atleast_1d(np.asarray(y, dtype=float)))
    b = b_constant(alpha)
    q = y * y / (4.0 * alpha * b * b)
    out = np.zeros_like(y)
    pos = y > 0
    sign, lf = log_hyp1f1(alpha + 3.0, 3.0, q[pos] / (1.0 + q[pos]))
    logv = (
        np.log(y[pos] * q[pos])
        + math.lgamma(alpha + 3.0)
        - math.lgamma(alpha + 1.0)
        - math.log(4.0 * alpha * b * b)
        - (alpha + 3.0) * np.log1p(q[pos])
        + lf
    )
    out[pos] = sign * np.exp(logv)
    return _scalar_out(out, scalar)


_LOG_S_NODES = 1201
_LOG_S_DEPTH = 45.0
_LOG_S_TOL = 1e-10


def _xi_window(a: float) -> tuple[float, float]:
    """xi range where e^{-xi} xi^{a+1} exceeds e^{-depth} of its peak."""
    m = a + 1.0
    peak = -m + m * math.log(m)
    h = lambda x: -x + m * math.log(x) - peak + _LOG_S_DEPTH
    lo, hi = optimize.brentq(h, 1e-300, m), optimize.brentq(h, m, m + 10.0 * _LOG_S_DEPTH + 20.0 * math.sqrt(m))
    return lo, hi


def _scale_average(p: MicroParams, y: np.ndarray) -> np.ndarray:
    """E[s f(y s)] for the first-eigenvalue law f, as a trapezoid sum in log s.

    In t = log s the integrand is analytic and decays like e^{(2a+2) t} on the
    left and double exponentially on the right, so the trapezoid rule
    converges geometrically; halving the step gives the error check.
    """
    a, b = p.alpha, p.b
    lo, hi = _xi_window(a)
    ab2 = a * b * b
    t = np.linspace(0.5 * math.log(lo / ab2), 0.5 * math.log(hi / ab2), _LOG_S_NODES)
    sv = np.exp(t)
    xi = ab2 * sv * sv
    # density of log s: 2 xi^{a+1} e^{-xi} / Gamma(a+1)
    logw = math.log(2.0) - xi + (a + 1.0) * np.log(xi) - math.lgamma(a + 1.0)
    wts = np.exp(logw) * sv * (t[1] - t[0])
    out = np.empty(y.shape)
    flat, res = y.reshape(-1), out.reshape(-1)
    for k in range(0, flat.size, _Y_BLOCK // 2):
        yb = flat[k : k + _Y_BLOCK // 2]
        vals = wts[:, None] * _first_eig_standard(p, sv[:, None] * yb)
        fine = vals.sum(axis=0)
        coarse = 2.0 * vals[::2].sum(axis=0)
        # pdf values are O(1) at their peak, so tiny blocks are judged absolutely
        bad = np.abs(fine - coarse) > _LOG_S_TOL * max(float(np.abs(fine).max()), 1e-4)
        if np.any(bad):
            warnings.warn(
                f"first-eigenvalue average not converged (change {np.abs(fine - coarse).max():.2e})",
                MixtureWarning,
                stacklevel=3,
            )
        res[k : k + yb.size] = fine
    return out


def first_eigenvalue_pdf(y, p: MicroParams, generalized: bool = True):
    """Distribution of the smallest eigenvalue in the squared microscopic variable."""
    _check_first_eig(p)
    scalar = np.ndim(y) == 0
    ya = np.abs(np.atleast_1d(np.asarray(y, dtype=float)))
    if not generalized or p.standard:
        return _scalar_out(_first_eig_standard(p, ya), scalar)
    a, b = p.alpha, p.b
    if p.beta == 2 and p.nu == 0:
        q = ya * ya / (4.0 * a * b * b)
        val = ya * (a + 1.0) / (2.0 * a * b * b) * (1.0 + q) ** (-(a + 2.0))
        return _scalar_out(val, scalar)
    if p.beta == 1 and p.nu == 1:
        q = ya * ya / (8.0 * a * b * b)
        val = ya * (a + 1.0) / (4.0 * a * b * b) * (1.0 + q) ** (-(a + 2.0))
        return _scalar_out(val, scalar)
    return _scalar_out(_scale_average(p, ya), scalar)


# ---------------------------------------------------------------- lambda <-> y


def to_micro(lam, params, generalized: bool = True):
    """y = 2 N b sqrt(lambda / <lambda>): finite-N eigenvalue to squared micro variable."""
    from .finite_n import mean_eigenvalue

    b = b_constant(params.alpha) if generalized else 1.0
    mean = mean_eigenvalue(params, generalized)
    return 2.0 * params.N * b * np.sqrt(np.asarray(lam, dtype=float) / mean)


def from_micro(y, params, generalized: bool = True):
    from .finite_n import mean_eigenvalue

    b = b_constant(params.alpha) if generalized else 1.0
    mean = mean_eigenvalue(params, generalized)
    return (np.asarray(y, dtype=float) / (2.0 * params.N * b)) ** 2 * mean
