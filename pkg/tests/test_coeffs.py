import itertools
import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from finitekey.coeffs import (DecoyCoefficients, b_weights, binary_entropy, decoy_coefficients,
                              elementary_symmetric_sums, parity_index, validate_intensities,
                              width)
from finitekey.exceptions import DegenerateInputError, DomainError

mp.mp.dps = 50


def oracle(mus, support, target):
    """Solve sum_n c_n e^{-mu_n} mu_n^m / m! = [m == target], m < |support|, in mpmath."""
    pts = [mp.mpf(mus[i]) for i in support]
    A = mp.matrix(len(pts), len(pts))
    rhs = mp.matrix(len(pts), 1)
    for m in range(len(pts)):
        for j, mu in enumerate(pts):
            A[m, j] = mp.e ** (-mu) * mu ** m / mp.factorial(m)
        rhs[m] = 1 if m == target else 0
    sol = mp.lu_solve(A, rhs)
    out = [0.0] * len(mus)
    for j, i in enumerate(support):
        out[i] = float(sol[j])
    return out


def supports(k):
    k0 = parity_index(k)
    return list(range(k0 - 1, k)), list(range(2 - k0, k))


@st.composite
def intensity_vectors(draw):
    k = draw(st.integers(2, 6))
    gaps = draw(st.lists(st.floats(0.1, 0.3), min_size=k - 1, max_size=k - 1))
    low = draw(st.sampled_from([0.0, 1e-6, 0.02]))
    mus = [low]
    for g in gaps:
        mus.append(mus[-1] + g)
    return tuple(reversed(mus))


@settings(max_examples=60, deadline=None)
@given(intensity_vectors())
def test_coefficients_match_mpmath_moment_solve(mus):
    c = decoy_coefficients(mus)
    even, odd = supports(len(mus))
    for got, want in ((c.a0, oracle(mus, even, 0)), (c.a2, oracle(mus, even, 1)),
                      (c.a1, oracle(mus, odd, 1) if len(odd) > 1 else [0.0] * len(mus))):
        scale = max(abs(w) for w in want) or 1.0
        for g, w in zip(got, want):
            assert abs(g - w) <= 1e-10 * scale


def test_parity_index():
    assert [parity_index(k) for k in range(2, 8)] == [1, 2, 1, 2, 1, 2]


def test_k2_has_no_single_photon_coefficients():
    c = decoy_coefficients((0.5, 0.1))
    assert c.a1 == (0.0, 0.0)
    assert c.k0 == 1


def test_odd_k_zeroes_first_even_coefficients():
    c = decoy_coefficients((0.5, 0.3, 0.1))
    assert c.a0[0] == 0.0 and c.a2[0] == 0.0
    assert c.a1[0] != 0.0
    c4 = decoy_coefficients((0.6, 0.4, 0.2, 0.01))
    assert c4.a1[0] == 0.0 and c4.a0[0] != 0.0


def test_three_intensity_closed_form():
    # two-point vacuum and error-yield formulas for mu_2, mu_3
    m2, m3 = 0.3, 1e-6
    c = decoy_coefficients((0.5, m2, m3))
    assert c.a0[1] == pytest.approx(-math.exp(m2) * m3 / (m2 - m3), rel=1e-13)
    assert c.a0[2] == pytest.approx(-math.exp(m3) * m2 / (m3 - m2), rel=1e-13)
    assert c.a2[1] == pytest.approx(math.exp(m2) / (m2 - m3), rel=1e-13)
    assert c.a2[2] == pytest.approx(math.exp(m3) / (m3 - m2), rel=1e-13)


def test_elementary_symmetric_sums_brute_force():
    mus = (0.9, 0.7, 0.4, 0.2, 0.05)
    for k0 in (1, 2):
        got = elementary_symmetric_sums(mus, k0)
        idx = range(k0 - 1, len(mus))
        for n in range(len(mus)):
            if n < k0 - 1:
                assert got[n] == 0.0
                continue
            others = [mus[j] for j in idx if j != n]
            want = sum(math.prod(c) for c in itertools.combinations(others, len(mus) - k0 - 1))
            assert got[n] == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("mus,exc", [
    ((0.5,), DomainError),
    ((0.5, 0.5, 0.1), DegenerateInputError),
    ((0.1, 0.5), DomainError),
    ((0.5, 0.45, 0.1), DomainError),
    ((0.5, -0.1), DomainError),
    ((float("nan"), 0.1), DomainError),
    (tuple(1.0 - 0.1 * i for i in range(11)), DomainError),
])
def test_invalid_intensities(mus, exc):
    with pytest.raises(exc):
        validate_intensities(mus)


def test_spacing_can_be_relaxed():
    assert validate_intensities((0.5, 0.45, 0.1), min_spacing=0) == (0.5, 0.45, 0.1)


def test_cap_lift_warns():
    mus = tuple(1.1 - 0.1 * i for i in range(11))
    with pytest.warns(RuntimeWarning):
        validate_intensities(mus, max_k=None)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0))
def test_binary_entropy_matches_mpmath(x):
    want = 0.0 if x in (0.0, 1.0) else float(-x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2))
    assert binary_entropy(x) == pytest.approx(want, abs=1e-14)


def test_binary_entropy_domain():
    assert binary_entropy(0.5) == 1.0
    with pytest.raises(DomainError):
        binary_entropy(1.5)


def test_b_weights_by_hand():
    c = DecoyCoefficients((1.0, -2.0), (0.5, 3.0), (0.0, 0.0), 1)
    b = b_weights(c, 0.0, 0.5, (0.8, 0.3))
    assert b == pytest.approx([0.25 * (0.8 + 0.15), 0.25 * (-1.6 + 0.9)])
    b_half = b_weights(c, 0.5, 0.5, (0.8, 0.3))
    assert b_half == pytest.approx([0.2, -0.4])
    with pytest.raises(DomainError):
        b_weights(c, 0.6, 0.5, (0.8, 0.3))


def test_width():
    assert width([3.0, -1.0, 2.0]) == 4.0
    assert width([2.0]) == 0.0
    with pytest.raises(DomainError):
        width([])
