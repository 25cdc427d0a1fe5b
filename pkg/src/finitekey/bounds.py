"""Concentration bounds and the four upper bounds on the single-photon error rate.

Every Z-basis quantity is a sum of multivariate-hypergeometric draws whose
values are the decoy coefficients scaled by ``1/p_n``.  Deviations follow the
Hoeffding form ``sqrt(t ln(1/eps) / 2) * Width``; methods 3 and 4 use the
centering-sequence variant whose range term depends on the drawn values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .channel import ObservedStats
from .coeffs import DecoyCoefficients, width
from .exceptions import DomainError, InfeasibleError

HALF = 0.5


class Method(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"

    @property
    def chi(self) -> int:
        """Number of equal failure-probability terms making up ``eps_sec``."""
        return 10 if self is Method.M4 else 9

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        aliases = {"A": "M1", "B": "M2", "C": "M3", "D": "M4",
                   "1": "M1", "2": "M2", "3": "M3", "4": "M4"}
        text = aliases.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise DomainError(f"unknown method {value!r}") from None


ALL_METHODS = (Method.M1, Method.M2, Method.M3, Method.M4)


def gamma_bar(a: float, b: float, c: float, d: float) -> float:
    """Finite-sample gap between phase and bit error rates.

    ``a`` is the failure probability, ``b`` the bit error rate and ``c``, ``d``
    the single-photon sample sizes in the two bases.  Raises
    :class:`InfeasibleError` when the logarithm's argument drops below 1, i.e.
    no real gap exists at failure probability ``a``.  ``b`` equal to 0 or 1
    returns 0 (the limit of the expression).
    """
    if not 0.0 < a < 1.0:
        raise DomainError(f"failure probability must lie in (0, 1), got {a}")
    if not 0.0 <= b <= 1.0:
        raise DomainError(f"error rate must lie in [0, 1], got {b}")
    if not (c > 0 and d > 0):
        raise InfeasibleError(f"sample sizes must be positive, got c={c}, d={d}")
    if b == 0.0 or b == 1.0:
        return 0.0
    var = (1.0 - b) * b
    arg = (c + d) / (2.0 * math.pi * c * d * var * a * a)
    if arg < 1.0:
        raise InfeasibleError("gamma_bar radicand is negative")
    return math.sqrt((c + d) * var / (c * d) * math.log(arg))


def hoeffding_dev(t: float, eps: float, w) -> float:
    """Deviation ``sqrt(t ln(1/eps) / 2) * Width(w)`` exceeded with probability <= eps."""
    if t < 1:
        raise DomainError(f"sample size must be at least 1, got {t}")
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    return math.sqrt(t * math.log(1.0 / eps) / 2.0) * width(w)


@dataclass(frozen=True)
class ZSummary:
    """Z-basis sums shared by all four methods (computed once per candidate)."""
    mean_Q: float
    mean_QE: float
    mean_QEbar: float
    s_Z: float
    s_Z_e: float
    a1Q: float
    a1QE: float
    a1QEbar: float
    a2QE: float
    width_a1: float
    width_a2: float
    a2_over_p: tuple[float, ...]
    error_counts: tuple[float, ...]


def z_summary(stats: ObservedStats, coeffs: DecoyCoefficients,
              p_mu: Sequence[float]) -> ZSummary:
    if any(p <= 0 for p in p_mu):
        raise DomainError("intensity probabilities must be positive")
    Q, E = stats.Q_Z, stats.E_Z
    qe = [q * e for q, e in zip(Q, E)]
    qebar = [q * (1.0 - e) for q, e in zip(Q, E)]
    mean_Q = math.fsum(p * q for p, q in zip(p_mu, Q))
    mean_QE = math.fsum(p * v for p, v in zip(p_mu, qe))
    mean_QEbar = math.fsum(p * v for p, v in zip(p_mu, qebar))
    a1 = coeffs.a1
    a2 = coeffs.a2
    a1_over_p = [c / p for c, p in zip(a1, p_mu)]
    a2_over_p = tuple(c / p for c, p in zip(a2, p_mu))
    if mean_QE > 0:
        counts = tuple(stats.s_Z_e * p * v / mean_QE for p, v in zip(p_mu, qe))
    else:
        counts = tuple(0.0 for _ in p_mu)
    return ZSummary(
        mean_Q=mean_Q, mean_QE=mean_QE, mean_QEbar=mean_QEbar,
        s_Z=stats.s_Z, s_Z_e=stats.s_Z_e,
        a1Q=math.fsum(c * q for c, q in zip(a1, Q)),
        a1QE=math.fsum(c * v for c, v in zip(a1, qe)),
        a1QEbar=math.fsum(c * v for c, v in zip(a1, qebar)),
        a2QE=math.fsum(c * v for c, v in zip(a2, qe)),
        width_a1=width(a1_over_p),
        width_a2=width(a2_over_p),
        a2_over_p=a2_over_p,
        error_counts=counts,
    )


@dataclass(frozen=True)
class DeviationTerms:
    delta_Y1: float = 0.0
    delta_Y1e1: float = 0.0
    delta_Y1ebar1: float = 0.0
    delta_e1: float = 0.0


def _log_inv(eps: float) -> float:
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    return math.log(1.0 / eps)


def _dev_Y1(z: ZSummary, eps: float) -> float:
    return z.mean_Q * math.sqrt(_log_inv(eps) / (2.0 * z.s_Z)) * z.width_a1


def _dev_Y1e1(z: ZSummary, eps: float) -> float:
    return math.sqrt(z.mean_Q * z.mean_QE * _log_inv(eps) / (2.0 * z.s_Z)) * z.width_a2


def _dev_Y1ebar1(z: ZSummary, eps: float) -> float:
    return math.sqrt(z.mean_Q * z.mean_QEbar * _log_inv(eps) / (2.0 * z.s_Z)) * z.width_a1


def deviation_terms(stats: ObservedStats, coeffs: DecoyCoefficients,
                    p_mu: Sequence[float], eps: float) -> DeviationTerms:
    """Hoeffding deviations of ``Y_1``, ``Y_1 e_1`` and ``Y_1 (1 - e_1)``."""
    if stats.s_Z <= 0:
        raise DomainError("Z-basis sample count must be positive")
    z = z_summary(stats, coeffs, p_mu)
    return DeviationTerms(_dev_Y1(z, eps), _dev_Y1e1(z, eps), _dev_Y1ebar1(z, eps))


@dataclass(frozen=True)
class MethodBound:
    method: Method
    e_Z1_upper: float
    chi: int
    feasible: bool
    terms: DeviationTerms = field(default_factory=DeviationTerms)
    reason: str = ""


def _clamp(v: float) -> float:
    return max(0.0, min(HALF, v))


def _infeasible(method, terms, reason):
    return MethodBound(method, HALF, method.chi, False, terms, reason)


def _summary(stats, coeffs, p_mu, summary):
    return summary if summary is not None else z_summary(stats, coeffs, p_mu)


def method1_e1(stats, coeffs, p_mu, eps_Z, eps_Ze, *, summary=None) -> MethodBound:
    """Bound ``Y_1 e_1`` from above and ``Y_1`` from below separately."""
    z = _summary(stats, coeffs, p_mu, summary)
    terms = DeviationTerms(delta_Y1=_dev_Y1(z, eps_Z), delta_Y1e1=_dev_Y1e1(z, eps_Ze))
    den = z.a1Q - terms.delta_Y1
    if den <= 0:
        return _infeasible(Method.M1, terms, "Y1 lower bound is not positive")
    return MethodBound(Method.M1, _clamp((z.a2QE + terms.delta_Y1e1) / den), 9, True, terms)


def method2_e1(stats, coeffs, p_mu, eps_Ze, eps_Zebar, *, summary=None) -> MethodBound:
    """Split ``Y_1`` into its erroneous and error-free parts (independent samples)."""
    z = _summary(stats, coeffs, p_mu, summary)
    terms = DeviationTerms(delta_Y1e1=_dev_Y1e1(z, eps_Ze),
                           delta_Y1ebar1=_dev_Y1ebar1(z, eps_Zebar))
    den = z.a1QEbar + z.a2QE - terms.delta_Y1ebar1 + terms.delta_Y1e1
    if den <= 0 or z.a1QEbar - terms.delta_Y1ebar1 <= 0:
        return _infeasible(Method.M2, terms, "error-free yield bound is not positive")
    return MethodBound(Method.M2, _clamp((z.a2QE + terms.delta_Y1e1) / den), 9, True, terms)


def rhat_approx(t: float, y: float, x_mean: float, w) -> float:
    """Centering range with every drawn value replaced by the sample mean.

    ``sqrt(t) y Width / ((y + (t-1) x_mean + min w) (y + (t-1) x_mean + max w))``.
    """
    w = list(w)
    spread = width(w)
    if spread == 0:
        return 0.0
    base = y + (t - 1.0) * x_mean
    lo, hi = base + min(w), base + max(w)
    if lo <= 0 or hi <= 0:
        raise InfeasibleError("non-positive denominator in centering range")
    return math.sqrt(t) * y * spread / (lo * hi)


@dataclass(frozen=True)
class CenteringConfig:
    """Ratio functional ``(S + rest*x) / (y + S + rest*x)`` over ``t`` ordered draws.

    ``values`` are the distinct draw values in descending order and
    ``group_counts`` how many of each appear (real-valued counts allowed).
    """
    t: float
    x: float
    y: float
    values: tuple[float, ...]
    group_counts: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        counts = tuple(float(c) for c in self.group_counts)
        if len(vals) != len(counts) or not vals:
            raise DomainError("values and group_counts must be non-empty and aligned")
        if any(c < 0 for c in counts):
            raise DomainError("group counts must be non-negative")
        if any(a < b for a, b in zip(vals, vals[1:])):
            raise DomainError("values must be sorted in descending order")
        if abs(math.fsum(counts) - self.t) > 1e-9 * max(1.0, abs(self.t)):
            raise DomainError("group counts must sum to t")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "group_counts", counts)

    @property
    def width(self) -> float:
        return width(self.values)

    @property
    def observed_sum(self) -> float:
        return math.fsum(n * w for n, w in zip(self.group_counts, self.values))

    def positivity_holds(self) -> bool:
        """``y + sum of draws > Width >= 0``."""
        return self.y + self.observed_sum > self.width

    def anchor_in_range(self) -> bool:
        return min(self.values) <= self.x <= max(self.values)

    def anchor_condition_holds(self) -> bool:
        """Upper limit on the anchor ``x`` that keeps the sequence centering.

        Taken with the population equal to the observed draws and the
        correlation allowance at its envelope ``2 W + (3M - 3m + 2) W^2 / D``.
        The ratio of linear functions of ``m`` is monotone inside a group, so
        checking group endpoints covers every ``m``.
        """
        W = self.width
        M = self.t
        total = self.observed_sum
        checkpoints = []
        before_n, before_s = 0.0, 0.0
        for w, n in zip(self.values, self.group_counts):
            if n > 0:
                checkpoints.append((before_n + 1.0, before_s))
                last = max(n - 1.0, 0.0)
                checkpoints.append((before_n + 1.0 + last, before_s + last * w))
            before_n += n
            before_s += n * w
        for m, sup_prefix in checkpoints:
            D = self.y + (self.t - m + 1.0) * self.x + sup_prefix
            if D <= 0:
                return False
            delta = 2.0 * W + (3.0 * M - 3.0 * m + 2.0) * W * W / D
            den = 2.0 * M - self.t - m + 1.0
            if den <= 0:
                continue
            if self.x > (2.0 * total - sup_prefix + self.y - delta) / den:
                return False
        return True


# series coefficients of h(z) = -1 - 1/(1+z) + 2 log(1+z)/z = sum_{j>=2} c_j z^j
_H_SERIES = tuple((-1) ** j * (1.0 - j) / (j + 1.0) for j in range(2, 40))


def _h(z: float) -> float:
    if z < 0.1:
        acc, zp = 0.0, z * z
        for c in _H_SERIES:
            term = c * zp
            acc += term
            if abs(term) < 1e-18 * abs(acc):
                break
            zp *= z
        return acc
    return -1.0 - 1.0 / (1.0 + z) + 2.0 * math.log1p(z) / z


def _squared_gap_integral(a: float, d: float, n: float, W: float) -> float:
    """``int_0^n (1/u - 1/(u+W))^2 dmu`` with ``u = a + mu d``."""
    end = a + n * d
    if a <= 0 or end <= 0:
        raise InfeasibleError("non-positive denominator in centering integral")
    if abs(n * d) < 1e-7 * a:
        mid = a + 0.5 * n * d
        return n * (1.0 / mid - 1.0 / (mid + W)) ** 2
    # antiderivative in u is h(W/u)/u
    return (_h(W / end) / end - _h(W / a) / a) / d


def rhat_method4(cfg: CenteringConfig) -> float:
    """Integral approximation of the centering range for descending draws.

    Each run of equal draws contributes one closed-form term, so the cost is
    linear in the number of distinct values rather than in ``t``.
    """
    W = cfg.width
    if W == 0:
        return 0.0
    lo = min(cfg.values)
    total = 0.0
    before_n, before_s = 0.0, 0.0
    for w, n in zip(cfg.values, cfg.group_counts):
        if n > 0:
            a = cfg.y + (cfg.t - before_n + 1.0) * cfg.x + lo + before_s
            total += _squared_gap_integral(a, w - cfg.x, n, W)
        before_n += n
        before_s += n * w
    return cfg.y * math.sqrt(total)


def method4_config(z: ZSummary, eps_Ze: float, eps_Zebar: float) -> CenteringConfig:
    """Centering configuration for method 4 with draw counts at expectation."""
    t = z.s_Z_e
    scale = z.mean_Q / z.s_Z
    x = (z.a1QE - _dev_Y1e1(z, eps_Ze)) / t
    y = z.a1QEbar - _dev_Y1ebar1(z, eps_Zebar)
    order = sorted(range(len(z.a2_over_p)), key=lambda n: -z.a2_over_p[n])
    values = tuple(scale * z.a2_over_p[n] for n in order)
    counts = tuple(z.error_counts[n] for n in order)
    return CenteringConfig(t, x, y, values, counts)


def _ratio_part(z, y):
    return z.a2QE / (y + z.a2QE)


def method3_e1(stats, coeffs, p_mu, eps_Ze, eps_Zebar, *, strict=False,
               summary=None) -> MethodBound:
    """Centering-sequence bound with the mean-value range approximation."""
    z = _summary(stats, coeffs, p_mu, summary)
    d_e = _dev_Y1e1(z, eps_Ze)
    d_ebar = _dev_Y1ebar1(z, eps_Zebar)
    y = z.a1QEbar - d_ebar
    if y <= 0 or z.s_Z_e <= 0:
        return _infeasible(Method.M3, DeviationTerms(delta_Y1e1=d_e, delta_Y1ebar1=d_ebar),
                           "error-free yield bound is not positive")
    inv_t = z.mean_Q / (z.s_Z * z.mean_QE)
    tail = z.mean_Q * z.mean_Q / (z.s_Z * z.s_Z * z.mean_QE)
    base = y + (1.0 - inv_t) * z.a1QE
    den_hi = base + tail * max(z.a2_over_p)
    den_lo = base + tail * min(z.a2_over_p)
    if den_hi <= 0 or den_lo <= 0:
        return _infeasible(Method.M3, DeviationTerms(delta_Y1e1=d_e, delta_Y1ebar1=d_ebar),
                           "non-positive centering denominator")
    delta_e1 = (math.sqrt(z.mean_Q * z.mean_QE * _log_inv(eps_Ze) / (2.0 * z.s_Z))
                * y * z.width_a2 / (den_hi * den_lo))
    terms = DeviationTerms(delta_Y1e1=d_e, delta_Y1ebar1=d_ebar, delta_e1=delta_e1)
    if strict:
        cfg = method4_config(z, eps_Ze, eps_Zebar)
        cfg = CenteringConfig(cfg.t, cfg.observed_sum / cfg.t, y, cfg.values, cfg.group_counts)
        if not (cfg.positivity_holds() and cfg.anchor_condition_holds()):
            return _infeasible(Method.M3, terms, "centering conditions violated")
    return MethodBound(Method.M3, _clamp(_ratio_part(z, y) + delta_e1), 9, True, terms)


def method4_e1(stats, coeffs, p_mu, eps_Ze, eps_Zebar, *, strict=False,
               summary=None) -> MethodBound:
    """Centering-sequence bound using the full descending-order range."""
    z = _summary(stats, coeffs, p_mu, summary)
    d_e = _dev_Y1e1(z, eps_Ze)
    d_ebar = _dev_Y1ebar1(z, eps_Zebar)
    terms = DeviationTerms(delta_Y1e1=d_e, delta_Y1ebar1=d_ebar)
    if z.s_Z_e <= 0:
        return _infeasible(Method.M4, terms, "no erroneous Z-basis detections")
    cfg = method4_config(z, eps_Ze, eps_Zebar)
    if cfg.y <= 0:
        return _infeasible(Method.M4, terms, "error-free yield bound is not positive")
    if not cfg.anchor_in_range():
        return _infeasible(Method.M4, terms, "anchor outside the draw value range")
    if strict and not (cfg.positivity_holds() and cfg.anchor_condition_holds()):
        return _infeasible(Method.M4, terms, "centering conditions violated")
    try:
        rhat = rhat_method4(cfg)
    except InfeasibleError as exc:
        return _infeasible(Method.M4, terms, str(exc))
    delta_e1 = rhat * math.sqrt(_log_inv(eps_Ze) / 2.0)
    terms = DeviationTerms(delta_Y1e1=d_e, delta_Y1ebar1=d_ebar, delta_e1=delta_e1)
    return MethodBound(Method.M4, _clamp(_ratio_part(z, cfg.y) + delta_e1), 10, True, terms)


def method_bound(method: Method, stats, coeffs, p_mu, eps: float, *, strict=False,
                 summary=None) -> MethodBound:
    """Dispatch with every per-term failure probability equal to ``eps``."""
    method = Method.parse(method)
    summary = _summary(stats, coeffs, p_mu, summary)
    if method is Method.M1:
        return method1_e1(stats, coeffs, p_mu, eps, eps, summary=summary)
    if method is Method.M2:
        return method2_e1(stats, coeffs, p_mu, eps, eps, summary=summary)
    if method is Method.M3:
        return method3_e1(stats, coeffs, p_mu, eps, eps, strict=strict, summary=summary)
    return method4_e1(stats, coeffs, p_mu, eps, eps, strict=strict, summary=summary)


def asymptotic_e1(method: Method, z: ZSummary) -> float:
    """Infinite-sample limit of a method's bound (all deviations dropped)."""
    method = Method.parse(method)
    if method is Method.M1:
        if z.a1Q <= 0:
            return HALF
        return _clamp(z.a2QE / z.a1Q)
    if z.a1QEbar <= 0:
        return HALF
    return _clamp(z.a2QE / (z.a1QEbar + z.a2QE))
