"""Fibre channel model, protocol parameters and observed statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coeffs import MAX_DECOYS, MIN_SPACING, validate_intensities
from .exceptions import DegenerateInputError, DomainError

_PROB_TOL = 1e-9


def transmittance(length_km: float) -> tuple[float, float]:
    """Fibre and system transmittance ``(eta_ch, eta_sys)`` for 0.2 dB/km loss."""
    if length_km < 0:
        raise DomainError(f"fibre length must be non-negative, got {length_km}")
    eta_ch = 10.0 ** (-0.2 * length_km / 10.0)
    return eta_ch, 0.1 * eta_ch


@dataclass(frozen=True)
class ChannelModel:
    """Threshold-detector fibre link.

    Defaults are the 100 km link with afterpulsing 4e-2, dark counts 6e-7 and
    misalignment 5e-3.
    """
    length_km: float = 100.0
    p_ap: float = 4e-2
    p_dc: float = 6e-7
    e_mis: float = 5e-3

    def __post_init__(self):
        if self.length_km < 0:
            raise DomainError("fibre length must be non-negative")
        for name in ("p_ap", "p_dc", "e_mis"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be a probability, got {v}")


def gain_and_error(model: ChannelModel, mu: float) -> tuple[float, float]:
    """Gain ``Q`` and bit error rate ``E`` for pulses of intensity ``mu``.

    Both bases share the same values under this model.
    """
    if mu < 0:
        raise DomainError(f"intensity must be non-negative, got {mu}")
    eta_ch, eta_sys = transmittance(model.length_km)
    # 1 - (1 - 2 p_dc) e^{-x} without cancellation at small x
    d_mu = -math.expm1(-eta_sys * mu) + 2.0 * model.p_dc * math.exp(-eta_sys * mu)
    gain = (1.0 + model.p_ap) * d_mu
    if gain == 0.0:
        raise DegenerateInputError("zero gain: error rate undefined")
    err_gain = (model.p_dc + model.e_mis * -math.expm1(-eta_ch * mu)
                + model.p_ap * d_mu / 2.0)
    return gain, err_gain / gain


@dataclass(frozen=True)
class ProtocolParams:
    """Intensities (descending), their probabilities, X-basis probability, raw key length."""
    mus: tuple[float, ...]
    p_mu: tuple[float, ...]
    p_X: float
    s_X: float
    min_spacing: float = field(default=MIN_SPACING, compare=False)
    max_k: int | None = field(default=MAX_DECOYS, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mus", validate_intensities(
            self.mus, min_spacing=self.min_spacing, max_k=self.max_k))
        p_mu = tuple(float(p) for p in self.p_mu)
        object.__setattr__(self, "p_mu", p_mu)
        if len(p_mu) != len(self.mus):
            raise DomainError("p_mu and mus differ in length")
        if any(p <= 0 for p in p_mu) or abs(math.fsum(p_mu) - 1.0) > _PROB_TOL:
            raise DomainError(f"p_mu must be positive and sum to 1, got {p_mu}")
        if not 0.0 < self.p_X < 1.0:
            raise DomainError(f"p_X must lie in (0, 1), got {self.p_X}")
        if not self.s_X >= 1:
            raise DomainError(f"s_X must be at least 1, got {self.s_X}")

    @property
    def k(self) -> int:
        return len(self.mus)

    def mean(self, values: Sequence[float]) -> float:
        """Intensity average ``<f(mu)> = sum_n p_n f(mu_n)``."""
        return math.fsum(p * v for p, v in zip(self.p_mu, values))

    def moments(self) -> tuple[float, float]:
        """``(<exp(-mu)>, <mu exp(-mu)>)``."""
        return (self.mean([math.exp(-m) for m in self.mus]),
                self.mean([m * math.exp(-m) for m in self.mus]))

    def with_length(self, s_X: float) -> "ProtocolParams":
        return ProtocolParams(self.mus, self.p_mu, self.p_X, s_X, self.min_spacing, self.max_k)


@dataclass(frozen=True)
class ObservedStats:
    """Per-intensity gains and error rates for both bases plus sample counts.

    Counts are real-valued; nothing is rounded.
    """
    Q_X: tuple[float, ...]
    Q_Z: tuple[float, ...]
    E_X: tuple[float, ...]
    E_Z: tuple[float, ...]
    s_X: float
    s_Z: float
    s_Z_e: float
    s_Z_ebar: float


def derive_counts(params: ProtocolParams, Q_X, Q_Z, E_Z) -> tuple[float, float, float]:
    """Z-basis sample count and its erroneous / error-free split."""
    mean_qx = params.mean(Q_X)
    mean_qz = params.mean(Q_Z)
    if mean_qx <= 0:
        raise DegenerateInputError("mean X-basis gain is zero")
    if mean_qz <= 0:
        raise DegenerateInputError("mean Z-basis gain is zero")
    p_X = params.p_X
    s_Z = (1.0 - p_X) ** 2 * params.s_X * mean_qz / (p_X * p_X * mean_qx)
    mean_qe = params.mean([q * e for q, e in zip(Q_Z, E_Z)])
    mean_qebar = params.mean([q * (1.0 - e) for q, e in zip(Q_Z, E_Z)])
    return s_Z, s_Z * mean_qe / mean_qz, s_Z * mean_qebar / mean_qz


def observe(model: ChannelModel, params: ProtocolParams, *,
            rng: np.random.Generator | None = None) -> ObservedStats:
    """Statistics the channel produces for ``params``.

    Without ``rng`` the model values are returned as-is (noiseless
    statistics).  With ``rng`` detections and errors are drawn binomially over
    the implied number of pulses per basis and intensity; this is a
    demonstration aid only.
    """
    ge = [gain_and_error(model, mu) for mu in params.mus]
    Q = tuple(g for g, _ in ge)
    E = tuple(e for _, e in ge)
    Q_X, Q_Z, E_X, E_Z = Q, Q, E, E
    if rng is not None:
        Q_X, E_X = _sample(rng, Q, E, params, params.p_X)
        Q_Z, E_Z = _sample(rng, Q, E, params, 1.0 - params.p_X)
    s_Z, s_Z_e, s_Z_ebar = derive_counts(params, Q_X, Q_Z, E_Z)
    return ObservedStats(Q_X, Q_Z, E_X, E_Z, float(params.s_X), s_Z, s_Z_e, s_Z_ebar)


def _sample(rng, Q, E, params, p_basis):
    pulses = params.s_X / (params.p_X ** 2 * params.mean(Q))
    gains, errs = [], []
    for q, e, p in zip(Q, E, params.p_mu):
        n = max(1, int(round(pulses * p_basis ** 2 * p)))
        det = max(1, int(rng.binomial(n, q)))
        gains.append(det / n)
        errs.append(int(rng.binomial(det, e)) / det)
    return tuple(gains), tuple(errs)
