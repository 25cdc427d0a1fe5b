"""Empirical and exhaustive checks of the concentration inequalities.

Draws are modelled as sampling without replacement from a finite multiset
(multivariate hypergeometric).  Three kinds of evidence are produced:

* Monte Carlo tail frequencies against ``exp(-2 delta^2 / (t W^2))``;
* exact two-value hypergeometric tails against the same bound;
* exhaustive verification of the centering property, in exact rational
  arithmetic, for the running-sum and the ratio functionals.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import hypergeom

from .bounds import CenteringConfig
from .exceptions import DomainError

__all__ = [
    "Population", "sample_without_replacement", "tail_bound", "tail_violation_rate",
    "exact_two_value_tail", "CenteringReport", "centering_check", "rhat_direct",
    "TailFixture", "default_fixtures", "run_tail_suite", "run_centering_suite",
    "random_centering_config", "SUM_CAP", "RATIO_CAP",
]

SUM_CAP = 40
RATIO_CAP = 12


@dataclass(frozen=True)
class Population:
    """Multiset with ``counts[j]`` copies of ``values[j]``."""
    values: tuple
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) != len(self.counts) or not self.values:
            raise DomainError("values and counts must be non-empty and aligned")
        if len(set(self.values)) != len(self.values):
            raise DomainError("population values must be distinct")
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts) or any(c != c0 for c, c0 in zip(counts, self.counts)):
            raise DomainError("counts must be non-negative integers")
        if sum(counts) < 1:
            raise DomainError("population must hold at least one object")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_dict(cls, d: dict) -> "Population":
        return cls(tuple(d), tuple(d.values()))

    @property
    def M(self) -> int:
        return sum(self.counts)

    @property
    def width(self) -> float:
        vals = [v for v, c in zip(self.values, self.counts) if c > 0]
        return float(max(vals) - min(vals))

    def mean(self) -> float:
        return math.fsum(float(v) * c for v, c in zip(self.values, self.counts)) / self.M

    def multiset(self) -> np.ndarray:
        return np.repeat(np.asarray(self.values, dtype=float), self.counts)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_draws(pop: Population, t: int) -> int:
    t = int(t)
    if t < 1:
        raise DomainError("need at least one draw")
    if t > pop.M:
        raise DomainError(f"cannot draw {t} objects from a population of {pop.M}")
    return t


def sample_without_replacement(pop: Population, t: int, seed=0) -> np.ndarray:
    """``t`` draws in order, uniformly over arrangements of the multiset."""
    t = _check_draws(pop, t)
    return _rng(seed).permutation(pop.multiset())[:t]


def tail_bound(t: int, delta: float, width: float) -> float:
    """``exp(-2 delta^2 / (t W^2))``; 1 at ``delta <= 0``, 0 when ``W == 0`` and ``delta > 0``."""
    if delta <= 0:
        return 1.0
    if width == 0:
        return 0.0
    return math.exp(-2.0 * delta * delta / (t * width * width))


def tail_violation_rate(pop: Population, t: int, delta: float, trials: int,
                        seed=0) -> tuple[float, float]:
    """Fraction of trials with ``sum(draws) - E >= delta`` and the analytic bound."""
    t = _check_draws(pop, t)
    if trials < 1:
        raise DomainError("trials must be positive")
    rng = _rng(seed)
    comp = rng.multivariate_hypergeometric(np.asarray(pop.counts), t, size=int(trials))
    sums = comp @ np.asarray(pop.values, dtype=float)
    expected = t * pop.mean()
    # tiny slack so float noise does not turn an exact-boundary sum into a miss
    hits = np.count_nonzero(sums - expected >= delta - 1e-12 * max(1.0, abs(expected)))
    return hits / trials, tail_bound(t, delta, pop.width)


def exact_two_value_tail(pop: Population, t: int, delta: float) -> float:
    """Exact ``Pr(sum - E >= delta)`` for a population with two values."""
    t = _check_draws(pop, t)
    if len(pop.values) != 2:
        raise DomainError("exact tail needs exactly two values")
    (lo, n_lo), (hi, n_hi) = sorted(zip(pop.values, pop.counts))
    W = float(hi - lo)
    if W == 0:
        return 1.0 if delta <= 0 else 0.0
    # sum = t lo + W K with K the number of high draws
    k_min = math.ceil(t * n_hi / pop.M + delta / W - 1e-9)
    if k_min <= 0:
        return 1.0
    return float(hypergeom.sf(k_min - 1, pop.M, n_hi, t))


class _NonPositive(Exception):
    pass


@dataclass
class CenteringReport:
    functional: str
    t: int
    passed: bool
    steps_checked: int
    violations: list = field(default_factory=list)


def _compositions(counts: Sequence[int], total: int):
    ranges = [range(min(c, total) + 1) for c in counts]
    for comp in itertools.product(*ranges):
        if sum(comp) == total:
            yield comp


def _conditional_means(pop, t, m, step_gain):
    """``E[U_m | history sum]`` grouped by the history sum, exactly."""
    M = pop.M
    vals = [Fraction(v) for v in pop.values]
    weight: dict[Fraction, Fraction] = {}
    acc: dict[Fraction, Fraction] = {}
    remaining = M - m + 1
    for comp in _compositions(pop.counts, m - 1):
        p = Fraction(math.prod(math.comb(c, k) for c, k in zip(pop.counts, comp)))
        s = sum((k * v for k, v in zip(comp, vals)), Fraction(0))
        e = sum(((c - k) * step_gain(s, v) for c, k, v in zip(pop.counts, comp, vals)),
                Fraction(0)) / remaining
        weight[s] = weight.get(s, Fraction(0)) + p
        acc[s] = acc.get(s, Fraction(0)) + p * e
    return sorted((s, acc[s] / weight[s]) for s in weight)


def centering_check(pop: Population, t: int, *, functional: str = "sum", x=None,
                    y=None) -> CenteringReport:
    """Exhaustively test that ``E[V_m - V_{m-1} | V_{m-1}]`` is non-increasing.

    ``functional="sum"`` is the running sum; ``"ratio"`` is
    ``((t-m) x + S_m) / (y + (t-m) x + S_m)`` and needs ``x`` and ``y``.
    Both functionals are increasing in the history sum ``S_{m-1}``, so
    conditioning on ``V_{m-1}`` is conditioning on ``S_{m-1}``.  Arithmetic is
    exact; floats are converted with :class:`fractions.Fraction`.
    """
    t = _check_draws(pop, t)
    if functional == "sum":
        if pop.M > SUM_CAP:
            raise DomainError(f"exhaustive sum check capped at M <= {SUM_CAP}")

        def gain(s, v):
            return v
    elif functional == "ratio":
        if pop.M > RATIO_CAP:
            raise DomainError(f"exhaustive ratio check capped at M <= {RATIO_CAP}")
        if x is None or y is None:
            raise DomainError("ratio functional needs x and y")
        x, y = Fraction(x), Fraction(y)
        if y <= 0:
            raise DomainError("y must be positive")

        def f(m, s):
            num = (t - m) * x + s
            if y + num <= 0:
                raise _NonPositive
            return num / (y + num)
        gain = None
    else:
        raise DomainError(f"unknown functional {functional!r}")

    violations = []
    steps = 0
    for m in range(2, t + 1):
        if functional == "ratio":
            def gain(s, v, m=m):
                return f(m, s + v) - f(m - 1, s)
        try:
            rows = _conditional_means(pop, t, m, gain)
        except _NonPositive:
            violations.append((m, "non-positive denominator"))
            continue
        for (s0, e0), (s1, e1) in zip(rows, rows[1:]):
            steps += 1
            if e1 > e0:
                violations.append((m, float(s0), float(s1), float(e0), float(e1)))
    return CenteringReport(functional, t, not violations, steps, violations)


def rhat_direct(cfg: CenteringConfig) -> float:
    """Term-by-term centering range for draws in descending order.

    ``r^2 = sum_m (y W / ([y + (t-m) x + sup + S_{m-1}] [y + (t-m) x + inf + S_{m-1}]))^2``
    with ``S_{m-1}`` the sum of the first ``m - 1`` draws.  Group counts must be
    integers.
    """
    counts = [int(round(c)) for c in cfg.group_counts]
    if any(abs(c - c0) > 1e-9 for c, c0 in zip(counts, cfg.group_counts)):
        raise DomainError("direct summation needs integer group counts")
    draws = np.repeat(np.asarray(cfg.values, dtype=float), counts)
    t = draws.size
    W = cfg.width
    if W == 0 or t == 0:
        return 0.0
    prefix = np.concatenate(([0.0], np.cumsum(draws)[:-1]))
    m = np.arange(1, t + 1)
    base = cfg.y + (t - m) * cfg.x + prefix
    lo = base + min(cfg.values)
    hi = base + max(cfg.values)
    if np.any(lo <= 0):
        raise DomainError("non-positive denominator in centering range")
    return float(cfg.y * W * math.sqrt(math.fsum(1.0 / (lo * hi) ** 2)))


def random_centering_config(rng: np.random.Generator, t: int, *, max_groups: int = 4,
                            width_ratio: float = 1e-3) -> CenteringConfig:
    """Random descending-draw configuration with ``W / y`` about ``width_ratio``.

    The anchor ``x`` is drawn inside the value range.  Small ``W / y`` is the
    regime the integral approximation is meant for.
    """
    k = int(rng.integers(1, min(max_groups, t) + 1))
    W = 1.0
    values = np.sort(rng.uniform(0.0, W, size=k))[::-1]
    if k > 1:
        values[0], values[-1] = W, 0.0
    cuts = np.sort(rng.choice(np.arange(1, t), size=k - 1, replace=False)) if k > 1 else []
    counts = np.diff(np.concatenate(([0], cuts, [t])))
    x = float(rng.uniform(values.min(), values.max())) if k > 1 else float(values[0])
    y = float(W / width_ratio * rng.uniform(1.0, 10.0))
    return CenteringConfig(float(t), x, y, tuple(values.tolist()),
                           tuple(float(c) for c in counts))


@dataclass(frozen=True)
class TailFixture:
    name: str
    population: Population
    t: int


def default_fixtures() -> list[TailFixture]:
    return [
        TailFixture("balanced-2", Population((0.0, 1.0), (50, 50)), 20),
        TailFixture("skewed-2", Population((0.0, 1.0), (90, 10)), 30),
        TailFixture("spread-3", Population((-1.0, 0.5, 2.0), (30, 40, 30)), 25),
        TailFixture("decoy-like-3", Population((-3.2, 0.4, 9.5), (12, 70, 18)), 40),
    ]


def _delta_for(eps, t, width):
    return width * math.sqrt(t * math.log(1.0 / eps) / 2.0)


def run_tail_suite(fixtures=None, eps_targets=(1e-2, 1e-3), trials: int = 100_000,
                   seed: int = 0) -> list[dict]:
    """One row per (fixture, eps): Monte Carlo and, for two values, exact tails."""
    rows = []
    fixtures = default_fixtures() if fixtures is None else fixtures
    for i, fx in enumerate(fixtures):
        pop = fx.population
        for j, eps in enumerate(eps_targets):
            delta = _delta_for(eps, fx.t, pop.width)
            emp, bound = tail_violation_rate(pop, fx.t, delta, trials,
                                             seed=(seed, i, j))
            allowance = 3.0 * math.sqrt(bound / trials)
            rows.append({"check": "tail", "fixture": fx.name, "t": fx.t, "eps": eps,
                         "delta": delta, "observed": emp, "bound": bound,
                         "passed": emp <= bound + allowance})
            if len(pop.values) == 2:
                exact = exact_two_value_tail(pop, fx.t, delta)
                rows.append({"check": "exact_tail", "fixture": fx.name, "t": fx.t,
                             "eps": eps, "delta": delta, "observed": exact,
                             "bound": bound, "passed": exact <= bound})
    return rows


def run_centering_suite(max_M: int = 8) -> list[dict]:
    """Sum-functional centering for every two- and three-value population up to ``max_M``.

    Values are fixed small integers; what varies is every split of ``M``
    objects among them and every ``t <= M``.
    """
    rows = []
    for values in ((0, 1), (-1, 2, 5)):
        k = len(values)
        for M in range(1, max_M + 1):
            for counts in _compositions([M] * k, M):
                if sum(1 for c in counts if c > 0) < 2:
                    continue
                pop = Population(values, counts)
                for t in range(1, M + 1):
                    rep = centering_check(pop, t)
                    rows.append({"check": "centering_sum", "fixture": f"{values}:{counts}",
                                 "t": t, "eps": "", "delta": "", "observed": rep.steps_checked,
                                 "bound": len(rep.violations), "passed": rep.passed})
    return rows
