"""Decoy-state interpolation coefficients.

For a phase-randomised Poissonian source the gains satisfy
``Q_n exp(mu_n) = sum_m Y_m mu_n**m / m!``.  Linear combinations of the
``Q_n`` with the coefficients computed here give one-sided bounds on the
vacuum yield ``Y_0``, the single-photon yield ``Y_1`` and the single-photon
error yield ``Y_1 e_1``:

* ``sum_n a0[n] Q_n <= Y_0``
* ``sum_n a1[n] Q_n <= Y_1`` (also for ``Q E`` and ``Q (1 - E)``)
* ``sum_n a2[n] Q_n E_n >= Y_1 e_1``

Indices in docstrings are 1-based to match the usual decoy notation; the
returned sequences are ordinary 0-based Python tuples of length ``k``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .exceptions import DegenerateInputError, DomainError

MAX_DECOYS = 10
MIN_SPACING = 0.1
# relative slack when comparing float gaps against the spacing floor
_SPACING_RTOL = 1e-9


def parity_index(k: int) -> int:
    """Return ``k0``: 1 when ``k`` is even, 2 when ``k`` is odd."""
    return 1 if k % 2 == 0 else 2


def validate_intensities(mus: Sequence[float], *, min_spacing: float = MIN_SPACING,
                         max_k: int | None = MAX_DECOYS) -> tuple[float, ...]:
    """Check ordering, count and spacing of an intensity vector.

    ``min_spacing=0`` relaxes the spacing rule to plain strict ordering.
    ``max_k=None`` lifts the cap on the number of intensities (a warning is
    emitted above ``MAX_DECOYS`` since precision degrades quickly).
    """
    mus = tuple(float(m) for m in mus)
    k = len(mus)
    if k < 2:
        raise DomainError(f"need at least two intensities, got {k}")
    if max_k is not None and k > max_k:
        raise DomainError(f"k={k} exceeds the cap of {max_k} intensities")
    if max_k is None and k > MAX_DECOYS:
        warnings.warn(f"k={k} > {MAX_DECOYS}: coefficients lose precision",
                      RuntimeWarning, stacklevel=2)
    if not all(math.isfinite(m) for m in mus):
        raise DomainError("intensities must be finite")
    if mus[-1] < 0:
        raise DomainError("intensities must be non-negative")
    for hi, lo in zip(mus, mus[1:]):
        gap = hi - lo
        if gap == 0:
            raise DegenerateInputError(f"coincident intensities {hi} and {lo}")
        if gap < 0:
            raise DomainError(f"intensities must be strictly decreasing: {mus}")
        if min_spacing > 0 and gap < min_spacing * (1 - _SPACING_RTOL):
            raise DomainError(
                f"adjacent intensities {hi} and {lo} closer than {min_spacing}")
    return mus


def _exact_sum(terms) -> float:
    return math.fsum(terms)


def _ordered_prod(factors) -> float:
    # multiply smallest magnitudes first to keep intermediate products tame
    return math.prod(sorted(factors, key=abs))


def _esym(values: Sequence[float], degree: int) -> float:
    if degree < 0 or degree > len(values):
        return 0.0
    if degree == 0:
        return 1.0
    return _exact_sum(_ordered_prod(c) for c in itertools.combinations(values, degree))


def elementary_symmetric_sums(mus: Sequence[float], k0: int) -> list[float]:
    """Sums ``S_n`` of all products of ``k - k0 - 1`` distinct intensities.

    The factors are drawn from indices ``k0..k`` with ``n`` excluded.  Entries
    for ``n < k0`` are returned as 0.  When ``k - k0 - 1 == 0`` every sum is the
    empty product 1.
    """
    k = len(mus)
    if k0 < 1 or k0 > k:
        raise DomainError(f"start index {k0} outside 1..{k}")
    idx = range(k0 - 1, k)
    degree = k - k0 - 1
    out = [0.0] * k
    for n in idx:
        out[n] = _esym([mus[j] for j in idx if j != n], degree)
    return out


@dataclass(frozen=True)
class DecoyCoefficients:
    a0: tuple[float, ...]
    a1: tuple[float, ...]
    a2: tuple[float, ...]
    k0: int

    @property
    def k(self) -> int:
        return len(self.a0)


def _interp_terms(mus, start):
    """(exp(mu_n), product of other mus, S_n, product of differences) over ``start..k``."""
    k = len(mus)
    idx = range(start - 1, k)
    degree = k - start - 1
    rows = {}
    for n in idx:
        others = [mus[j] for j in idx if j != n]
        denom = _ordered_prod(mus[n] - m for m in others)
        if denom == 0:
            raise DegenerateInputError("coincident intensities in decoy coefficients")
        rows[n] = (math.exp(mus[n]), _ordered_prod(others), _esym(others, degree), denom)
    return rows


def decoy_coefficients(mus: Sequence[float], *, min_spacing: float = MIN_SPACING,
                       max_k: int | None = MAX_DECOYS) -> DecoyCoefficients:
    """Interpolation coefficients ``a0``, ``a1``, ``a2`` for intensities ``mus``.

    ``a0`` and ``a2`` interpolate over indices ``k0..k`` (an even number of
    points).  ``a1`` interpolates over ``3 - k0..k`` (an odd number of points),
    so ``a1[0] == 0`` exactly when ``k`` is even.  The odd/even split is what
    makes each combination a one-sided bound: the truncated Poisson tail then
    enters with a definite sign.  For ``k == 2`` the odd set is a single point
    and ``a1`` is identically zero (only the trivial bound ``Y_1 >= 0``).
    """
    mus = validate_intensities(mus, min_spacing=min_spacing, max_k=max_k)
    k = len(mus)
    k0 = parity_index(k)
    a0 = [0.0] * k
    a1 = [0.0] * k
    a2 = [0.0] * k
    for n, (ex, prod_mu, s_n, denom) in _interp_terms(mus, k0).items():
        a0[n] = -ex * prod_mu / denom
        a2[n] = ex * s_n / denom
    for n, (ex, _, s_n, denom) in _interp_terms(mus, 3 - k0).items():
        a1[n] = -ex * s_n / denom
    return DecoyCoefficients(tuple(a0), tuple(a1), tuple(a2), k0)


def binary_entropy(x: float) -> float:
    """``H2(x)`` in bits, with ``H2(0) = H2(1) = 0``."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def b_weights(coeffs: DecoyCoefficients, e_p: float, p_X: float,
              moments: tuple[float, float]) -> list[float]:
    """Per-intensity weights ``b_n`` of the key-rate sum ``sum_n b_n Q_{X,n}``.

    ``moments`` is ``(<exp(-mu)>, <mu exp(-mu)>)`` averaged over the intensity
    distribution.  ``b_n = p_X**2 (<e^-mu> a0_n + <mu e^-mu> a1_n (1 - H2(e_p)))``.
    """
    if not 0.0 <= e_p <= 0.5:
        raise DomainError(f"phase error rate must lie in [0, 1/2], got {e_p}")
    if not 0.0 < p_X < 1.0:
        raise DomainError(f"p_X must lie in (0, 1), got {p_X}")
    vac, single = moments
    keep = 1.0 - binary_entropy(e_p)
    pp = p_X * p_X
    return [pp * (vac * c0 + single * c1 * keep) for c0, c1 in zip(coeffs.a0, coeffs.a1)]


def width(values) -> float:
    """Spread ``max - min`` of a finite, non-empty set of reals."""
    values = list(values)
    if not values:
        raise DomainError("width of an empty set is undefined")
    return max(values) - min(values)
