"""Simulated-annealing search over protocol parameters.

The search vector is ``[p_X, mu_1 .. mu_{k-1}, p_mu_1 .. p_mu_k]``; the
smallest intensity ``mu_k`` is held fixed.  Candidates are mapped onto the
feasible set by :meth:`SearchSpace.project` before every evaluation, so the
objective never sees an invalid point.

Schedule: ``T_i = T0 * 0.995**i`` with ``T0`` one tenth of the objective
spread over 100 random probes.  The budget is split into ten segments; each
of the first nine starts from the best of a fresh batch of random samples
(the first reuses the probes), the last one polishes the global best.
Single-coordinate moves use per-dimension step sizes that adapt towards a
30% acceptance rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bounds import Method
from .channel import ChannelModel, ProtocolParams
from .coeffs import MAX_DECOYS, MIN_SPACING
from .exceptions import ConfigError, FiniteKeyError
from .keyrate import KeyRateResult, SecurityBudget, evaluate

__all__ = ["SearchSpace", "AnnealResult", "anneal", "OptimizeResult", "optimize_rate",
           "rate_objective"]

COOLING = 0.995
N_PROBES = 100
N_SEGMENTS = 10
_ADAPT_EVERY = 50
_TARGET_ACCEPT = 0.3


@dataclass(frozen=True)
class SearchSpace:
    """Box bounds plus the ordering/spacing/simplex constraints.

    ``bounds`` maps ``"p_X"``, ``"mu"`` and ``"p_mu"`` to closed intervals.
    """
    k: int
    mu_min: float = 1e-6
    bounds: dict = field(default_factory=lambda: {
        "p_X": (0.5, 0.995), "mu": (0.0, 1.0), "p_mu": (1e-3, 1.0)})
    spacing: float = MIN_SPACING

    def __post_init__(self):
        if not 2 <= self.k <= MAX_DECOYS:
            raise ConfigError(f"k must lie in 2..{MAX_DECOYS}, got {self.k}")
        for key in ("p_X", "mu", "p_mu"):
            if key not in self.bounds:
                raise ConfigError(f"missing bounds for {key!r}")
            lo, hi = self.bounds[key]
            if not lo < hi:
                raise ConfigError(f"empty interval for {key!r}: {(lo, hi)}")
        px_lo, px_hi = self.bounds["p_X"]
        if px_lo <= 0.0 or px_hi >= 1.0:
            raise ConfigError("p_X bounds must lie inside (0, 1)")
        if self.bounds["p_mu"][0] <= 0.0:
            raise ConfigError("p_mu lower bound must be positive")
        if self.k * self.bounds["p_mu"][0] >= 1.0:
            raise ConfigError("p_mu lower bound leaves no room on the simplex")
        if self.mu_min < 0:
            raise ConfigError("mu_min must be non-negative")
        mu_hi = self.bounds["mu"][1]
        if (self.k - 1) * self.spacing > mu_hi - self.mu_min:
            raise ConfigError(
                f"{self.k} intensities with spacing {self.spacing} do not fit in "
                f"[{self.mu_min}, {mu_hi}]")

    @property
    def dim(self) -> int:
        return 2 * self.k

    def lower_upper(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.k
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        lo[0], hi[0] = self.bounds["p_X"]
        lo[1:k] = max(self.bounds["mu"][0], self.mu_min)
        hi[1:k] = self.bounds["mu"][1]
        lo[k:], hi[k:] = self.bounds["p_mu"]
        return lo, hi

    def project(self, x: Sequence[float]) -> np.ndarray:
        """Clamp, sort intensities descending, enforce spacing, map ``p_mu`` onto the simplex.

        Spacing is restored by pushing intensities upwards from ``mu_min``
        (so ``(0.3, 0.25)`` over ``1e-6`` with spacing 0.1 becomes
        ``(0.35, 0.25)``); anything pushed past the upper bound is then pulled
        back down in a second pass.
        """
        x = np.asarray(x, dtype=float).copy()
        if x.shape != (self.dim,):
            raise ConfigError(f"expected a vector of length {self.dim}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConfigError("non-finite search vector")
        k = self.k
        lo, hi = self.lower_upper()
        x = np.clip(x, lo, hi)
        mus = np.sort(x[1:k])[::-1]
        # spacing floor relative to the next intensity down
        below = self.mu_min
        for i in range(k - 2, -1, -1):
            mus[i] = max(mus[i], below + self.spacing)
            below = mus[i]
        above = hi[1] + self.spacing
        for i in range(k - 1):
            mus[i] = min(mus[i], above - self.spacing)
            above = mus[i]
        x[1:k] = mus
        # shifted simplex: every p_mu stays >= its floor and feasible points are fixed
        floor = lo[k]
        q = x[k:] - floor
        total = q.sum()
        free = 1.0 - k * floor
        x[k:] = floor + (free * q / total if total > 0 else free / k)
        return x

    def to_params(self, x: Sequence[float], s_X: float) -> ProtocolParams:
        x = self.project(x)
        k = self.k
        mus = tuple(float(m) for m in x[1:k]) + (self.mu_min,)
        return ProtocolParams(mus, tuple(float(p) for p in x[k:]), float(x[0]), s_X,
                              min_spacing=self.spacing)

    def from_params(self, params: ProtocolParams) -> np.ndarray:
        if params.k != self.k:
            raise ConfigError(f"parameters have k={params.k}, space has k={self.k}")
        return np.array([params.p_X, *params.mus[:-1], *params.p_mu])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.lower_upper()
        return self.project(rng.uniform(lo, hi))


@dataclass
class AnnealResult:
    x: np.ndarray
    value: float
    evaluations: int
    trace: list[float]
    T0: float


def _spread_temperature(values: np.ndarray) -> float:
    spread = float(values.max() - values.min())
    if spread > 0:
        return 0.1 * spread
    scale = float(np.abs(values).max())
    return 0.1 * scale if scale > 0 else 1e-12


def anneal(space: SearchSpace, objective: Callable[[np.ndarray], float], budget: int,
           seed: int = 0, *, x0: Sequence[float] | None = None) -> AnnealResult:
    """Maximize ``objective`` over ``space`` with at most ``budget`` evaluations.

    ``trace[i]`` is the best value after ``i + 1`` evaluations, so it is
    non-decreasing.  The run is a pure function of ``(space, objective,
    budget, seed, x0)``.
    """
    budget = int(budget)
    if budget < 2 * N_PROBES:
        raise ConfigError(f"budget must be at least {2 * N_PROBES}, got {budget}")
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = space.lower_upper()
    span = hi - lo
    trace: list[float] = []
    best = {"x": None, "v": -math.inf}

    def f(x):
        v = float(objective(x))
        if not math.isfinite(v):
            v = -math.inf
        if v > best["v"]:
            best["x"], best["v"] = x.copy(), v
        trace.append(best["v"])
        return v

    probes = [space.sample(rng) for _ in range(N_PROBES)]
    if x0 is not None:
        probes[0] = space.project(x0)
    probe_vals = np.array([f(x) for x in probes])
    finite = probe_vals[np.isfinite(probe_vals)]
    T0 = _spread_temperature(finite) if finite.size else 1e-12

    segment = (budget - N_PROBES) // N_SEGMENTS
    n_restart = min(N_PROBES, max(1, segment // 20))
    for s in range(N_SEGMENTS):
        if s == 0:
            i0 = int(np.argmax(probe_vals))
            cur, cur_v = probes[i0], float(probe_vals[i0])
        elif s == N_SEGMENTS - 1:
            cur, cur_v = best["x"].copy(), best["v"]
        else:
            fresh = [space.sample(rng) for _ in range(n_restart)]
            vals = [f(x) for x in fresh]
            i0 = int(np.argmax(vals))
            cur, cur_v = fresh[i0], vals[i0]
        steps = 0.1 * span
        if s == N_SEGMENTS - 1:
            steps = 0.01 * span
        tried = np.zeros(space.dim)
        taken = np.zeros(space.dim)
        n_moves = segment - (n_restart if 0 < s < N_SEGMENTS - 1 else 0)
        if s == N_SEGMENTS - 1:
            n_moves = budget - len(trace)
        for i in range(n_moves):
            T = T0 * COOLING ** i
            d = int(rng.integers(space.dim))
            cand = cur.copy()
            cand[d] += steps[d] * rng.standard_normal()
            cand = space.project(cand)
            v = f(cand)
            tried[d] += 1
            if v >= cur_v or (T > 0 and rng.random() < math.exp((v - cur_v) / T)):
                cur, cur_v = cand, v
                taken[d] += 1
            if (i + 1) % _ADAPT_EVERY == 0:
                rate = np.divide(taken, tried, out=np.full(space.dim, _TARGET_ACCEPT),
                                 where=tried > 0)
                steps = np.clip(steps * np.where(rate > _TARGET_ACCEPT, 1.25, 0.8),
                                1e-9 * span, 0.5 * span)
                tried[:] = 0
                taken[:] = 0
    return AnnealResult(space.project(best["x"]), best["v"], len(trace), trace, T0)


def rate_objective(space: SearchSpace, s_X: float, method, channel: ChannelModel,
                   budget: SecurityBudget, **kwargs) -> Callable[[np.ndarray], float]:
    """Key rate as a function of the search vector; any numerical failure scores 0."""
    method = Method.parse(method)

    def objective(x):
        try:
            return evaluate(space.to_params(x, s_X), method, channel, budget, **kwargs).R
        except FiniteKeyError:
            return 0.0
    return objective


@dataclass
class OptimizeResult:
    method: Method
    params: ProtocolParams
    result: KeyRateResult
    anneal: AnnealResult
    seed: int


def optimize_rate(k: int, s_X: float, method=Method.M1, channel: ChannelModel | None = None,
                  budget: SecurityBudget | None = None, *, evaluations: int = 200_000,
                  seed: int = 0, space: SearchSpace | None = None,
                  x0: Sequence[float] | None = None, **kwargs) -> OptimizeResult:
    """Best rate found for ``k`` intensities at raw key length ``s_X``."""
    method = Method.parse(method)
    channel = channel or ChannelModel()
    budget = budget or SecurityBudget()
    space = space or SearchSpace(k)
    if space.k != k:
        raise ConfigError(f"search space has k={space.k}, requested k={k}")
    obj = rate_objective(space, s_X, method, channel, budget, **kwargs)
    run = anneal(space, obj, evaluations, seed, x0=x0)
    params = space.to_params(run.x, s_X)
    result = evaluate(params, method, channel, budget, **kwargs)
    return OptimizeResult(method, params, result, run, seed)
