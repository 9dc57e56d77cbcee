"""Gamma-weight mixtures.

Every deformed quantity is an average of the undeformed one over a Gamma
distributed scale variable xi with density e^{-xi} xi^p / Gamma(p+1).  This
module builds generalized Gauss-Laguerre rules for that weight and evaluates
such averages with adaptive node doubling.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import AccuracyError, ConvergenceError, DomainError

__all__ = [
    "GammaWeightRule",
    "build_rule",
    "mix",
    "mix_sqrt",
    "truncated_rule",
    "MixtureWarning",
]

DEFAULT_NODES = 200
MAX_DOUBLINGS = 2


class MixtureWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GammaWeightRule:
    """Gauss rule for the weight e^{-xi} xi^exponent on (0, inf).

    ``weights`` are normalized to sum to one; the unnormalized weights are
    ``weights * Gamma(exponent + 1)`` (kept implicit because that mass
    overflows for the large exponents the limits require).
    """

    exponent: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def log_mass(self) -> float:
        return math.lgamma(self.exponent + 1.0)

    def integrate(self, f: Callable) -> float:
        """Integral of e^{-xi} xi^exponent f(xi) over (0, inf)."""
        vals = np.asarray(f(self.nodes), dtype=float)
        return math.exp(self.log_mass) * float(self.weights @ vals)

    def expect(self, f: Callable):
        """Average of f under the normalized Gamma(exponent + 1) law."""
        vals = np.asarray(f(self.nodes), dtype=float)
        return np.tensordot(self.weights, vals, axes=(0, 0))


@lru_cache(maxsize=256)
def _rule(exponent: float, node_count: int) -> GammaWeightRule:
    k = np.arange(node_count, dtype=float)
    diag = 2.0 * k + exponent + 1.0
    off = np.sqrt(k[1:] * (k[1:] + exponent))
    try:
        nodes, vecs = eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise AccuracyError(f"Gauss-Laguerre nodes failed to converge: {exc}") from exc
    weights = vecs[0] ** 2
    weights = weights / weights.sum()
    if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
        raise AccuracyError("Gauss-Laguerre nodes are not positive and increasing")
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GammaWeightRule(float(exponent), nodes, weights)


def build_rule(exponent: float, node_count: int = DEFAULT_NODES) -> GammaWeightRule:
    if exponent <= -1:
        raise DomainError(f"Gamma weight exponent must exceed -1, got {exponent}")
    if node_count < 8:
        raise DomainError(f"node_count must be >= 8, got {node_count}")
    return _rule(float(exponent), int(node_count))


def _converged(prev, cur, rel_tol, abs_tol=0.0):
    prev = np.asarray(prev)
    cur = np.asarray(cur)
    scale = max(float(np.max(np.abs(cur))) if cur.size else 0.0, 1e-300)
    tol = np.maximum(rel_tol * np.maximum(np.abs(cur), scale), abs_tol)
    return bool(np.all(np.abs(cur - prev) <= tol))


def _mix_once(rule: GammaWeightRule, inner, damping):
    p = rule.exponent
    if damping is None:
        return rule.expect(inner)
    d = np.asarray(damping, dtype=float)
    if np.any(d <= -1):
        raise DomainError("damping must exceed -1")
    shrink = 1.0 / (1.0 + d)
    xi = rule.nodes.reshape((-1,) + (1,) * d.ndim) * shrink
    vals = np.asarray(inner(xi), dtype=float)
    return np.tensordot(rule.weights, vals, axes=(0, 0)) * shrink ** (p + 1.0)


def mix(
    rule: GammaWeightRule | float,
    inner: Callable,
    damping=None,
    *,
    rel_tol: float = 1e-9,
    abs_tol: float = 0.0,
    node_count: int = DEFAULT_NODES,
):
    """Average of ``inner(xi)`` under the normalized Gamma(p + 1) weight.

    ``rule`` may be a prebuilt rule or just the exponent p.  With ``damping``
    d the integrand carries an extra factor e^{-d xi}; the substitution
    u = (1 + d) xi moves that factor into the rule, so ``inner`` must not
    include it.  An array-valued ``damping`` evaluates one mixture per entry:
    ``inner`` then receives xi with a trailing axis of that shape.

    The rule is doubled (at most twice) until successive results agree to
    ``rel_tol``; a MixtureWarning is emitted otherwise.
    """
    if isinstance(rule, GammaWeightRule):
        p, n = rule.exponent, len(rule.nodes)
    else:
        p, n = float(rule), node_count
    if p <= -1:
        raise ConvergenceError(
            f"mixture exponent {p} <= -1: the deformed measure is not integrable"
        )
    value, change, ok = _mix_adaptive(p, n, inner, damping, rel_tol, abs_tol)
    if not ok:
        _warn_unconverged(p, rel_tol, n, change)
    return value


def _mix_adaptive(p: float, n: int, inner, damping, rel_tol: float, abs_tol: float):
    """(finest result, last change, converged) after at most MAX_DOUBLINGS doublings."""
    prev = _mix_once(build_rule(p, n), inner, damping)
    change = math.inf
    for _ in range(MAX_DOUBLINGS):
        n *= 2
        cur = _mix_once(build_rule(p, n), inner, damping)
        if _converged(prev, cur, rel_tol, abs_tol):
            return cur, 0.0, True
        change = float(np.max(np.abs(np.asarray(cur) - np.asarray(prev))))
        prev = cur
    return prev, change, False


def _warn_unconverged(p: float, rel_tol: float, n: int, change: float):
    warnings.warn(
        f"Gamma mixture (exponent {p}) not converged to {rel_tol} at "
        f"{n * 2 ** MAX_DOUBLINGS} nodes (last change {change:.2e})",
        MixtureWarning,
        stacklevel=3,
    )


def mix_sqrt(
    exponent: float,
    inner: Callable,
    damping=None,
    *,
    rel_tol: float = 1e-9,
    node_count: int = DEFAULT_NODES,
):
    """Average of ``inner(u)`` with u = sqrt(xi), xi ~ Gamma(exponent + 1).

    ``inner`` must be analytic in u and accept negative u.  Splitting it into
    even and odd parts in u leaves two integrands that are analytic in xi, so
    both Gauss-Laguerre sums converge spectrally (a bare sqrt(xi) would only
    converge algebraically).  ``damping`` multiplies the integrand by
    e^{-damping * u^2} and must not be included in ``inner``.
    """
    p = float(exponent)
    if p <= -1:
        raise ConvergenceError(
            f"mixture exponent {p} <= -1: the deformed measure is not integrable"
        )

    def even(xi):
        u = np.sqrt(xi)
        return 0.5 * (np.asarray(inner(u)) + np.asarray(inner(-u)))

    def odd(xi):
        u = np.sqrt(xi)
        vals = 0.5 * (np.asarray(inner(u)) - np.asarray(inner(-u)))
        return vals / u.reshape(u.shape + (1,) * (vals.ndim - u.ndim))

    e, change_e, ok_e = _mix_adaptive(p, node_count, even, damping, rel_tol, 0.0)
    # E_p[sqrt(xi) g(xi)] = Gamma(p + 3/2)/Gamma(p + 1) E_{p+1/2}[g]
    ratio = math.exp(math.lgamma(p + 1.5) - math.lgamma(p + 1.0))
    # either part may be pure roundoff; judge both on the scale of the total
    floor = rel_tol * float(np.max(np.abs(e), initial=0.0)) / ratio
    o, change_o, ok_o = _mix_adaptive(p + 0.5, node_count, odd, damping, rel_tol, floor)
    total = e + ratio * o
    scale = rel_tol * float(np.max(np.abs(total), initial=0.0))
    if not (ok_e or change_e <= scale):
        _warn_unconverged(p, rel_tol, node_count, change_e)
    if not (ok_o or ratio * change_o <= scale):
        _warn_unconverged(p + 0.5, rel_tol, node_count, change_o)
    return total


@lru_cache(maxsize=32)
def truncated_rule(node_count: int = 400):
    """Gauss-Legendre nodes/weights in theta on [0, pi/2].

    Used with t = lo + (hi - lo) sin^2(theta) so that square-root edges of a
    finite support become smooth.
    """
    x, w = np.polynomial.legendre.leggauss(node_count)
    theta = (x + 1.0) * (math.pi / 4.0)
    w = w * (math.pi / 4.0)
    theta.setflags(write=False)
    w.setflags(write=False)
    return theta, w
