"""Finite-key secure key rate for the X-basis raw key.

``R = sum_n b_n Q_{X,n} - <Q_X> sqrt(ln(chi/eps_sec) / (2 s_X)) Width({b_n/p_n})
      - p_X^2 (Lambda_EC + <Q_X>/s_X (6 log2(chi/eps_sec) + log2(2/eps_cor)))``

``eps_sec`` is tied to the final key length (``kappa`` per secret bit), which
in turn depends on ``R``; :func:`secure_rate` solves that fixed point.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .bounds import (ALL_METHODS, HALF, DeviationTerms, Method, MethodBound, ZSummary,
                     asymptotic_e1, gamma_bar, method_bound, z_summary)
from .channel import ChannelModel, ObservedStats, ProtocolParams, observe
from .coeffs import DecoyCoefficients, b_weights, binary_entropy, decoy_coefficients, width
from .exceptions import DomainError, InfeasibleError, NonConvergenceError

__all__ = [
    "SecurityBudget", "KeyRateResult", "binary_entropy", "leakage", "phase_error",
    "secure_rate", "secure_rates", "asymptotic_rate", "evaluate",
]


@dataclass(frozen=True)
class SecurityBudget:
    kappa: float = 1e-15
    eps_cor: float = 1e-15

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not 0.0 < self.eps_cor < 1.0:
            raise DomainError(f"eps_cor must lie in (0, 1), got {self.eps_cor}")

    def eps_sec(self, ell_final: float) -> float:
        return self.kappa * ell_final


def leakage(stats: ObservedStats, p_mu) -> float:
    """Error-correction leakage ``<Q_X H2(E_X)>`` at the Shannon limit."""
    return math.fsum(p * q * binary_entropy(e) for p, q, e in zip(p_mu, stats.Q_X, stats.E_X))


def _single_photon_yield(coeffs: DecoyCoefficients, gains) -> float:
    return max(0.0, math.fsum(c * q for c, q in zip(coeffs.a1, gains)))


def _phase_error(e_Z1, stats, coeffs, eps, params, worst_case_gamma=False):
    if e_Z1 >= HALF:
        return HALF, True
    single = params.moments()[1]
    c = stats.s_Z * _single_photon_yield(coeffs, stats.Q_Z) * single / params.mean(stats.Q_Z)
    d = stats.s_X * _single_photon_yield(coeffs, stats.Q_X) * single / params.mean(stats.Q_X)
    if c <= 0 or d <= 0:
        return HALF, False
    try:
        gap = gamma_bar(eps, e_Z1, c, d)
    except InfeasibleError:
        # log argument below 1: the tail estimate is under eps already at zero gap
        if worst_case_gamma:
            return HALF, False
        return e_Z1, False
    return min(HALF, e_Z1 + gap), True


def phase_error(e_Z1: float, stats: ObservedStats, coeffs: DecoyCoefficients,
                eps: float, params: ProtocolParams, *, worst_case_gamma: bool = False) -> float:
    """Upper bound on the single-photon phase error rate of the raw key.

    When the gap formula has no real solution the tail estimate is already
    below ``eps`` at zero gap and ``e_Z1`` itself is returned;
    ``worst_case_gamma=True`` returns 1/2 instead.  Without a positive
    single-photon yield the result is 1/2.
    """
    if not 0.0 <= e_Z1 <= HALF:
        raise DomainError(f"e_Z1 must lie in [0, 1/2], got {e_Z1}")
    return _phase_error(e_Z1, stats, coeffs, eps, params, worst_case_gamma)[0]


@dataclass
class KeyRateResult:
    method: Method
    R: float
    feasible: bool
    e_Z1: float
    e_p: float
    eps_sec: float
    ell_final: float
    chi: int
    iterations: int
    leakage: float
    b: tuple[float, ...]
    bound: MethodBound
    gamma_feasible: bool = True
    raw_rate: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["bound"]["method"] = self.bound.method.value
        d["b"] = list(self.b)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KeyRateResult":
        d = dict(d)
        bd = dict(d.pop("bound"))
        bd["method"] = Method.parse(bd["method"])
        bd["terms"] = DeviationTerms(**bd["terms"])
        d["bound"] = MethodBound(**bd)
        d["method"] = Method.parse(d["method"])
        d["b"] = tuple(d["b"])
        return cls(**d)


@dataclass(frozen=True)
class _Context:
    params: ProtocolParams
    stats: ObservedStats
    coeffs: DecoyCoefficients
    z: ZSummary
    mean_QX: float
    moments: tuple[float, float]
    leak: float


def _context(params, stats, coeffs=None):
    if coeffs is None:
        coeffs = decoy_coefficients(params.mus, min_spacing=params.min_spacing,
                                    max_k=params.max_k)
    return _Context(params, stats, coeffs, z_summary(stats, coeffs, params.p_mu),
                    params.mean(stats.Q_X), params.moments(), leakage(stats, params.p_mu))


def _evaluate_at(ctx: _Context, method: Method, eps_sec: float, budget: SecurityBudget,
                 strict: bool, worst_case_gamma: bool = False):
    p = ctx.params
    chi = method.chi
    eps = eps_sec / chi
    bound = method_bound(method, ctx.stats, ctx.coeffs, p.p_mu, eps, strict=strict,
                         summary=ctx.z)
    e_p, gamma_real = _phase_error(bound.e_Z1_upper, ctx.stats, ctx.coeffs, eps, p,
                                   worst_case_gamma)
    gamma_ok = gamma_real or not worst_case_gamma
    b = b_weights(ctx.coeffs, e_p, p.p_X, ctx.moments)
    main = math.fsum(bn * q for bn, q in zip(b, ctx.stats.Q_X))
    log_term = math.log(chi / eps_sec)
    fluct = ctx.mean_QX * math.sqrt(log_term / (2.0 * p.s_X)) * width(
        bn / pn for bn, pn in zip(b, p.p_mu))
    overhead = ctx.mean_QX / p.s_X * (6.0 * log_term / math.log(2.0)
                                      + math.log2(2.0 / budget.eps_cor))
    R = main - fluct - p.p_X ** 2 * (ctx.leak + overhead)
    return R, bound, e_p, gamma_ok, b, {"main": main, "fluctuation": fluct,
                                       "overhead": p.p_X ** 2 * overhead}


def _pulses(ctx):
    return ctx.params.s_X / (ctx.params.p_X ** 2 * ctx.mean_QX)


def secure_rate(params: ProtocolParams, stats: ObservedStats, method,
                budget: SecurityBudget | None = None, *, strict: bool = False,
                coeffs: DecoyCoefficients | None = None, max_iter: int = 100,
                rtol: float = 1e-12, damping: float = 0.0,
                worst_case_gamma: bool = False) -> KeyRateResult:
    """Secure key rate (bits per pulse) for one ``e_Z1`` method.

    ``eps_sec = kappa * R * s_X / (p_X^2 <Q_X>)`` is solved by fixed-point
    iteration starting from ``R = 1``.  ``R`` increases with ``eps_sec`` with a
    slope well below one, so plain iteration decreases monotonically onto the
    fixed point; ``damping`` mixes in the previous iterate if ever needed.
    A non-positive rate ends the iteration with ``R = 0``.
    """
    method = Method.parse(method)
    budget = budget or SecurityBudget()
    if not 0.0 <= damping < 1.0:
        raise DomainError("damping must lie in [0, 1)")
    ctx = _context(params, stats, coeffs)
    pulses = _pulses(ctx)
    eps_sec = min(budget.kappa * pulses, 0.5)
    trace = []
    for it in range(1, max_iter + 1):
        R, bound, e_p, gamma_ok, b, parts = _evaluate_at(ctx, method, eps_sec, budget, strict,
                                                         worst_case_gamma)
        trace.append((eps_sec, R))
        if R <= 0:
            return KeyRateResult(method, 0.0, False, bound.e_Z1_upper, e_p, eps_sec,
                                 0.0, method.chi, it, ctx.leak, tuple(b), bound, gamma_ok,
                                 R, parts)
        target = budget.kappa * R * pulses
        if abs(target - eps_sec) <= rtol * eps_sec:
            return KeyRateResult(method, R, bound.feasible and gamma_ok, bound.e_Z1_upper,
                                 e_p, eps_sec, R * pulses, method.chi, it, ctx.leak, tuple(b),
                                 bound, gamma_ok, R, parts)
        eps_sec = damping * eps_sec + (1.0 - damping) * target
    raise NonConvergenceError(
        f"eps_sec fixed point did not converge in {max_iter} iterations", trace)


def secure_rates(params, stats, methods: Iterable = ALL_METHODS, budget=None,
                 **kwargs) -> dict:
    """Rates for several methods sharing one coefficient computation."""
    coeffs = kwargs.pop("coeffs", None) or decoy_coefficients(
        params.mus, min_spacing=params.min_spacing, max_k=params.max_k)
    return {Method.parse(m): secure_rate(params, stats, m, budget, coeffs=coeffs, **kwargs)
            for m in methods}


def asymptotic_rate(params: ProtocolParams, stats: ObservedStats, method=Method.M1,
                    coeffs: DecoyCoefficients | None = None) -> float:
    """Rate with every finite-size term removed (may be negative)."""
    method = Method.parse(method)
    ctx = _context(params, stats, coeffs)
    e1 = asymptotic_e1(method, ctx.z)
    b = b_weights(ctx.coeffs, e1, params.p_X, ctx.moments)
    main = math.fsum(bn * q for bn, q in zip(b, stats.Q_X))
    return main - params.p_X ** 2 * ctx.leak


def evaluate(params: ProtocolParams, method=Method.M1, channel: ChannelModel | None = None,
             budget: SecurityBudget | None = None, **kwargs) -> KeyRateResult:
    """Convenience: noiseless channel statistics followed by :func:`secure_rate`."""
    stats = observe(channel or ChannelModel(), params)
    return secure_rate(params, stats, method, budget, **kwargs)
