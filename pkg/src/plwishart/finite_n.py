"""Exact finite-N formulas for the deformed Laguerre ensemble.

The deformed joint density is the Gamma average of the Gaussian (Laguerre)
one at inverse variance xi * 2n / gamma (beta = 2).  Every correlation
function therefore reads

    R_gamma(...) = E_p[ R(...; xi) ],  p = gamma - 1 - (beta/2) N (N + nu),

with E_p the average under the normalized Gamma(p + 1) law.  After pulling
out the exponential exp(-xi 2n sum(lambda) / gamma) the remaining integrand
is a polynomial in xi, so the Gauss-Laguerre rule in ``gammamix`` is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError, MomentDivergenceError, UnsupportedCaseError
from .gammamix import mix
from .specfun import laguerre_table

__all__ = [
    "EnsembleParams",
    "LaguerreBasis",
    "partition_ratio",
    "log_partition_ratio",
    "log_partition_gamma",
    "mean_eigenvalue",
    "finite_density_xi",
    "gen_finite_density",
    "gen_finite_kpoint",
    "connected_two_point",
    "jpdf_kpoint_bruteforce",
    "micro_rescaled_density",
    "CD_THRESHOLD",
]

CD_THRESHOLD = 20


@dataclass(frozen=True)
class EnsembleParams:
    """Finite-N ensemble (beta, N, nu, n, gamma).

    Construction fails with ConvergenceError unless
    gamma > (beta/2) N (N + nu), the condition for the deformed weight to be
    normalizable.
    """

    beta: int
    N: int
    nu: int
    n: float
    gamma: float

    def __post_init__(self):
        if self.beta not in (1, 2, 4):
            raise DomainError(f"beta must be 1, 2 or 4, got {self.beta}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if int(self.nu) != self.nu or self.nu < 0:
            raise DomainError(f"nu must be a nonnegative integer, got {self.nu}")
        if not self.n > 0:
            raise DomainError(f"n must be positive, got {self.n}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.gamma > self.dof:
            raise ConvergenceError(
                f"gamma = {self.gamma} must exceed (beta/2) N (N + nu) = {self.dof} "
                "for the deformed weight to be integrable"
            )

    @classmethod
    def from_alpha(cls, beta: int, N: int, nu: int, alpha: float, n: float = 1.0):
        """gamma = alpha + (beta/2) N (N + nu) + 1."""
        return cls(beta, N, nu, n, alpha + 0.5 * beta * N * (N + nu) + 1.0)

    @property
    def dof(self) -> float:
        return 0.5 * self.beta * self.N * (self.N + self.nu)

    @property
    def alpha(self) -> float:
        """Gamma-mixture exponent gamma - 1 - (beta/2) N (N + nu)."""
        return self.gamma - 1.0 - self.dof

    @property
    def has_first_moment(self) -> bool:
        return self.gamma > self.dof + 1.0

    def as_dict(self) -> dict:
        return {"beta": self.beta, "N": self.N, "nu": self.nu, "n": self.n, "gamma": self.gamma}


def _require_beta2(p: EnsembleParams):
    if p.beta != 2:
        raise UnsupportedCaseError(
            "finite-N correlation functions are implemented for beta = 2 only"
        )


@dataclass(frozen=True)
class LaguerreBasis:
    """Monic Laguerre polynomials for the weight lambda^nu exp(-scale lambda)."""

    N: int
    nu: int
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    @cached_property
    def log_norms(self) -> np.ndarray:
        k = np.arange(self.N)
        lg = np.vectorize(math.lgamma)
        return lg(k + 1.0) + lg(k + self.nu + 1.0) - (2 * k + self.nu + 1) * math.log(self.scale)

    @property
    def norms(self) -> np.ndarray:
        return np.exp(self.log_norms)

    def monic(self, lam) -> np.ndarray:
        """Rows P_0(lam), ..., P_{N-1}(lam)."""
        lam = np.asarray(lam, dtype=float)
        tab = laguerre_table(self.N - 1, self.nu, self.scale * lam)
        k = np.arange(self.N)
        lg = np.vectorize(math.lgamma)
        coef = (-1.0) ** k * np.exp(lg(k + 1.0) - k * math.log(self.scale))
        return coef.reshape((-1,) + (1,) * lam.ndim) * tab


def log_partition_ratio(p: EnsembleParams, xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise DomainError("xi must be positive")
    return -p.dof * np.log(xi) - math.lgamma(p.gamma - p.dof)


def partition_ratio(p: EnsembleParams, xi):
    """Z(xi) / (Gamma(gamma) Z_gamma) = xi^{-(beta/2)N(N+nu)} / Gamma(gamma - (beta/2)N(N+nu))."""
    val = np.exp(log_partition_ratio(p, xi))
    return float(val) if np.ndim(val) == 0 else val


def log_partition_gamma(p: EnsembleParams) -> float:
    """log Z_gamma for beta = 2 from the product of Laguerre norms."""
    _require_beta2(p)
    e = p.N * (p.N + p.nu)
    s = sum(math.lgamma(k + 2.0) + math.lgamma(k + p.nu + 1.0) for k in range(p.N))
    return e * math.log(p.gamma / (2.0 * p.n)) + math.lgamma(p.gamma - e) - math.lgamma(p.gamma) + s


def mean_eigenvalue(p: EnsembleParams, generalized: bool = True) -> float:
    if not generalized:
        return (p.N + p.nu) / (2.0 * p.n)
    if not p.has_first_moment:
        raise MomentDivergenceError(
            f"mean eigenvalue needs gamma > (beta/2) N (N + nu) + 1 = {p.dof + 1}, got {p.gamma}"
        )
    return p.gamma * (p.N + p.nu) / (2.0 * p.n * (p.gamma - p.dof - 1.0))


def _kernel_diag_sum(N: int, nu: int, x, weighted: bool, method: str):
    """sum_{k<N} k!/(k+nu)! L_k^nu(x)^2, optionally times exp(-x)."""
    if method == "auto":
        method = "cd" if N > CD_THRESHOLD else "direct"
    if method == "direct":
        tab = laguerre_table(N - 1, nu, x, weighted=weighted)
        k = np.arange(N, dtype=float)
        c = np.exp(np.vectorize(math.lgamma)(k + 1.0) - np.vectorize(math.lgamma)(k + nu + 1.0))
        return np.tensordot(c, tab**2, axes=(0, 0))
    if method == "cd":
        if N < 2:
            raise DomainError("Christoffel-Darboux form needs N >= 2")
        a = laguerre_table(N, nu, x, weighted=weighted)
        b = laguerre_table(N - 1, nu + 1, x, weighted=weighted)
        pref = math.exp(math.lgamma(N + 1.0) - math.lgamma(N + nu))
        return pref * (a[N - 1] * b[N - 1] - a[N] * b[N - 2])
    raise DomainError(f"unknown method {method!r}")


def finite_density_xi(lam, p: EnsembleParams, xi: float, method: str = "auto"):
    """Laguerre density R(lambda; xi) at fixed xi, normalized to N."""
    _require_beta2(p)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("lambda must be nonnegative")
    a = 2.0 * p.n * xi / p.gamma
    x = a * lam
    s = _kernel_diag_sum(p.N, p.nu, x, True, method)
    with np.errstate(divide="ignore"):
        logpre = (p.nu + 1) * math.log(a) + (p.nu * np.log(lam) if p.nu else 0.0)
    val = np.exp(logpre) * s
    return float(val) if val.ndim == 0 else val


def gen_finite_density(lam, p: EnsembleParams, method: str = "auto", rel_tol: float = 1e-9):
    """Deformed density R_gamma(lambda), normalized to N."""
    _require_beta2(p)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("lambda must be nonnegative")
    d = 2.0 * p.n * lam / p.gamma

    def inner(xi):
        a = 2.0 * p.n * xi / p.gamma
        s = _kernel_diag_sum(p.N, p.nu, a * lam, False, method)
        return a ** (p.nu + 1) * lam**p.nu * s

    node_count = max(64, p.N + p.nu + 8)
    val = mix(p.alpha, inner, d, rel_tol=rel_tol, node_count=node_count)
    return float(val) if np.ndim(val) == 0 else np.asarray(val)


def micro_rescaled_density(y, p: EnsembleParams, generalized: bool = True):
    """Finite-N density in the hard-edge variable y = 2 N b sqrt(lambda / <lambda>).

    R(lambda) d lambda / dy, the finite-N counterpart of the microscopic
    density.  ``generalized=False`` uses the Gaussian ensemble at xi = gamma
    (the undeformed Laguerre density) with b = 1.
    """
    from .microlaw import b_constant, from_micro

    y = np.abs(np.asarray(y, dtype=float))
    lam = from_micro(y, p, generalized)
    if generalized:
        dens = gen_finite_density(lam, p)
        b = b_constant(p.alpha)
    else:
        dens = finite_density_xi(lam, p, p.gamma)
        b = 1.0
    val = dens * 2.0 * y * mean_eigenvalue(p, generalized) / (2.0 * p.N * b) ** 2
    return float(val) if np.ndim(val) == 0 else val


def _kernel_matrix(p: EnsembleParams, lam: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """K(lam_i, lam_j; xi) without the exponential, shape xi.shape + (k, k)."""
    a = 2.0 * p.n * xi / p.gamma
    x = a[..., None] * lam
    tab = laguerre_table(p.N - 1, p.nu, x)  # (N, ..., k)
    k = np.arange(p.N, dtype=float)
    c = np.exp(np.vectorize(math.lgamma)(k + 1.0) - np.vectorize(math.lgamma)(k + p.nu + 1.0))
    ker = np.einsum("k,k...i,k...j->...ij", c, tab, tab)
    root = np.sqrt(lam) ** p.nu
    return (a ** (p.nu + 1))[..., None, None] * ker * np.outer(root, root)


def gen_finite_kpoint(lams, p: EnsembleParams, rel_tol: float = 1e-9) -> float:
    """k-point correlation R_gamma(lambda_1, ..., lambda_k), k <= 4."""
    _require_beta2(p)
    lam = np.asarray(lams, dtype=float).ravel()
    k = lam.size
    if not 1 <= k <= 4:
        raise DomainError(f"k must lie in 1..4, got {k}")
    if np.any(lam < 0):
        raise DomainError("lambda must be nonnegative")
    if k > 1 and np.min(np.diff(np.sort(lam))) <= 1e-14 * max(1.0, float(lam.max())):
        raise DomainError("points must be distinct; use gen_finite_density for k = 1")
    if k > p.N:
        return 0.0
    d = 2.0 * p.n * float(lam.sum()) / p.gamma

    def inner(xi):
        return np.linalg.det(_kernel_matrix(p, lam, np.asarray(xi)))

    node_count = max(64, k * (p.N + p.nu) + 8)
    return float(mix(p.alpha, inner, d, rel_tol=rel_tol, node_count=node_count))


def connected_two_point(p: EnsembleParams, lam: float, mu: float, rel_tol: float = 1e-10):
    """(R_gamma^conn(lam, mu), E_p[R^conn(lam, mu; xi)]).

    The first subtracts the product of two averaged one-point functions, the
    second averages the Gaussian connected function.  They differ whenever
    the xi distribution is not a point mass.
    """
    _require_beta2(p)
    if lam == mu:
        raise DomainError("lam and mu must differ")
    r2 = gen_finite_kpoint([lam, mu], p, rel_tol=rel_tol)
    r1 = gen_finite_density(np.array([lam, mu]), p, rel_tol=rel_tol)
    pts = np.array([lam, mu], dtype=float)
    d = 2.0 * p.n * (lam + mu) / p.gamma

    def inner(xi):
        kmat = _kernel_matrix(p, pts, np.asarray(xi))
        return -kmat[..., 0, 1] ** 2

    mixed = float(mix(p.alpha, inner, d, rel_tol=rel_tol, node_count=max(64, 2 * (p.N + p.nu) + 8)))
    return r2 - float(r1[0] * r1[1]), mixed


def _jpdf_weight(p: EnsembleParams):
    expo = 0.5 * p.beta * (p.nu + 1) - 1.0
    t = p.n * p.beta / p.gamma

    def w(*lam):
        lam = np.asarray(lam, dtype=float)
        vd = 1.0
        for i in range(len(lam)):
            for j in range(i + 1, len(lam)):
                vd *= abs(lam[i] - lam[j]) ** p.beta
        return vd * np.prod(lam**expo) * (1.0 + t * lam.sum()) ** (-p.gamma)

    return w


def jpdf_kpoint_bruteforce(lams, p: EnsembleParams) -> float:
    """k-point function N!/(N-k)! times the jpdf integrated over N - k variables.

    Direct nested quadrature of the eigenvalue joint density; N <= 3 only.
    """
    if p.N > 3:
        raise DomainError("brute-force jpdf quadrature is limited to N <= 3")
    lam = [float(v) for v in np.ravel(lams)]
    k = len(lam)
    if not 1 <= k <= p.N:
        raise DomainError("need 1 <= k <= N")
    w = _jpdf_weight(p)
    opts = {"limit": 200, "epsabs": 0.0, "epsrel": 1e-11}
    inf = [[0.0, np.inf]]
    z, _ = integrate.nquad(lambda *x: w(*x), inf * p.N, opts=[opts] * p.N)
    free = p.N - k
    if free:
        val, _ = integrate.nquad(lambda *x: w(*lam, *x), inf * free, opts=[opts] * free)
    else:
        val = w(*lam)
    return math.factorial(p.N) / math.factorial(free) * val / z
