"""Nearest-neighbour spacing laws from the two-eigenvalue (N = 2) ensembles.

With u the smaller eigenvalue and s the gap, the N = 2 joint density is
proportional to s^beta (u (u + s))^nubar w(2u + s), where w is exp(-n beta t)
for Wishart-Laguerre and (1 + n beta t / gamma)^{-gamma} for the deformed
ensemble.  Integrating out u gives the laws below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import ConvergenceError, DomainError, MomentDivergenceError

__all__ = [
    "SpacingParams",
    "wl_spacing_pdf",
    "gen_spacing_pdf",
    "spacing_pdf",
    "mean_spacing",
    "rescaled_spacing_pdf",
]


@dataclass(frozen=True)
class SpacingParams:
    """N = 2 spacing parameters.

    ``nu`` may be any real above -1 so that nubar = 0 is reachable for every
    beta (beta = 4 needs nu = -1/2); use :meth:`from_nubar` for that.
    ``gamma = inf`` describes the undeformed ensemble.
    """

    beta: int
    nu: float = 0.0
    n: float = 1.0
    gamma: float = math.inf

    def __post_init__(self):
        if self.beta not in (1, 2, 4):
            raise DomainError(f"beta must be 1, 2 or 4, got {self.beta}")
        if not self.nu > -1:
            raise DomainError(f"nu must exceed -1, got {self.nu}")
        if not self.n > 0:
            raise DomainError(f"n must be positive, got {self.n}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.varpi > 0:
            raise ConvergenceError(
                f"varpi = gamma - beta - 2 nubar - 2 = {self.varpi} must be positive "
                "for the two-eigenvalue weight to be integrable"
            )

    @classmethod
    def from_nubar(cls, beta: int, nubar: float, n: float = 1.0, gamma: float = math.inf):
        return cls(beta, 2.0 * (nubar + 1.0) / beta - 1.0, n, gamma)

    @classmethod
    def from_varpi(cls, beta: int, varpi: float, nubar: float = 0.0, n: float = 1.0):
        """Deformed parameters at fixed varpi (gamma = varpi + beta + 2 nubar + 2)."""
        return cls.from_nubar(beta, nubar, n, varpi + beta + 2.0 * nubar + 2.0)

    @property
    def nubar(self) -> float:
        return 0.5 * self.beta * (self.nu + 1.0) - 1.0

    @property
    def varpi(self) -> float:
        return self.gamma - self.beta - 2.0 * self.nubar - 2.0

    @property
    def standard(self) -> bool:
        return math.isinf(self.gamma)

    def as_dict(self) -> dict:
        return {"beta": self.beta, "nu": self.nu, "n": self.n, "gamma": self.gamma}


def _prep(s):
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0):
        raise DomainError("spacings must be nonnegative")
    return s, scalar


def _out(val, scalar):
    return float(val[0]) if scalar else val


def _log_wl_constant(p: SpacingParams) -> float:
    b, nb, nbeta = p.beta, p.nubar, p.n * p.beta
    return -(
        (-0.5 + b + nb) * math.log(2.0)
        + (-1.5 - b - nb) * math.log(nbeta)
        + math.lgamma(0.5 * (1.0 + b))
        + math.lgamma(1.0 + nb + 0.5 * b)
    )


def wl_spacing_pdf(s, p: SpacingParams):
    """C s^{beta+nubar+1/2} K_{1/2+nubar}(n beta s)."""
    s, scalar = _prep(s)
    x = p.n * p.beta * s
    out = np.zeros_like(s)
    pos = s > 0
    logv = (
        _log_wl_constant(p)
        + (p.beta + p.nubar + 0.5) * np.log(s[pos])
        + np.log(_sp.kve(0.5 + p.nubar, x[pos]))
        - x[pos]
    )
    out[pos] = np.exp(logv)
    return _out(out, scalar)


def _log_gen_constant(p: SpacingParams) -> float:
    g, b, nb = p.gamma, p.beta, p.nubar
    log_beta_fn = math.lgamma(nb + 1.0) + math.lgamma(g - 2.0 * nb - 1.0) - math.lgamma(g - nb)
    return (
        (1.0 - g) * math.log(2.0)
        + log_beta_fn
        + math.lgamma(g)
        + math.lgamma(1.0 + 0.5 * b)
        - math.lgamma(nb + 1.0)
        - math.lgamma(1.0 + b)
        - math.lgamma(nb + 1.0 + 0.5 * b)
        - math.lgamma(p.varpi)
        + (2.0 + 2.0 * nb + b - g) * math.log(p.n * b / g)
    )


def gen_spacing_pdf(s, p: SpacingParams):
    """Deformed N = 2 spacing law; tail ~ s^{-(varpi+1)}.

    The 2F1 argument z = 1/2 - gamma/(2 n beta s) runs to -inf as s -> 0; the
    Pfaff transformation 2F1(a,b;c;z) = (1-z)^{-a} 2F1(a,c-b;c;z/(z-1)) maps
    it into (-1, 1) where the series converges.
    """
    if p.standard:
        return wl_spacing_pdf(s, p)
    s, scalar = _prep(s)
    g, b, nb = p.gamma, p.beta, p.nubar
    nbeta = p.n * b
    out = np.zeros_like(s)
    pos = s > 0
    sp_ = s[pos]
    if nb == 0.0:
        logc = (
            math.log(p.n)
            + b * math.log(nbeta / g)
            + math.lgamma(g - 1.0)
            - math.log(g)
            - math.lgamma(b)
            - math.lgamma(g - b - 2.0)
        )
        out[pos] = np.exp(logc + b * np.log(sp_) + (1.0 - g) * np.log1p(sp_ * nbeta / g))
        return _out(out, scalar)
    h = g / (2.0 * nbeta)
    # 1 - z = (h + s/2)/s and z/(z-1) = (h - s/2)/(h + s/2)
    one_minus_z = (h + 0.5 * sp_) / sp_
    w = (h - 0.5 * sp_) / (h + 0.5 * sp_)
    f = _sp.hyp2f1(-nb, g - 2.0 * nb - 1.0, g - nb, w)
    logv = (
        _log_gen_constant(p)
        + (b + nb) * np.log(sp_)
        + (nb + 1.0 - g) * np.log(h + 0.5 * sp_)
        + nb * np.log(one_minus_z)
        + np.log(f)
    )
    out[pos] = np.exp(logv)
    return _out(out, scalar)


def spacing_pdf(s, p: SpacingParams, generalized: bool = True):
    if generalized and not p.standard:
        return gen_spacing_pdf(s, p)
    return wl_spacing_pdf(s, p)


def _wl_mean(p: SpacingParams) -> float:
    # int_0^inf t^a K_mu(t) dt = 2^{a-1} Gamma((a+1-mu)/2) Gamma((a+1+mu)/2)
    b, nb = p.beta, p.nubar
    a = b + nb + 1.5
    log_m = (
        _log_wl_constant(p)
        + (a - 1.0) * math.log(2.0)
        - (a + 1.0) * math.log(p.n * b)
        + math.lgamma(0.5 * b + 1.0)
        + math.lgamma(0.5 * b + nb + 1.5)
    )
    return math.exp(log_m)


def mean_spacing(p: SpacingParams, generalized: bool = True) -> float:
    """First moment of the spacing law.

    The deformed law is the undeformed one averaged over the rate, which
    gives <s>_gamma = <s> gamma / (varpi - 1) for every nubar.
    """
    m = _wl_mean(p)
    if not generalized or p.standard:
        return m
    if not p.varpi > 1:
        raise MomentDivergenceError(
            f"the mean spacing requires varpi > 1, got varpi = {p.varpi}"
        )
    return m * p.gamma / (p.varpi - 1.0)


def rescaled_spacing_pdf(x, p: SpacingParams, generalized: bool = True):
    """Unit-mean form <s> P(<s> x)."""
    m = mean_spacing(p, generalized)
    return m * np.asarray(spacing_pdf(m * np.asarray(x, dtype=float), p, generalized))
