import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finitekey.channel import (ChannelModel, ObservedStats, ProtocolParams, derive_counts,
                               gain_and_error, observe, transmittance)
from finitekey.exceptions import DegenerateInputError, DomainError

mp.mp.dps = 40


def test_transmittance_endpoints():
    assert transmittance(0.0) == (1.0, 0.1)
    eta, sys_ = transmittance(50.0)
    assert eta == pytest.approx(0.1, rel=1e-15)
    assert sys_ == pytest.approx(0.01, rel=1e-15)
    with pytest.raises(DomainError):
        transmittance(-1.0)


def oracle_gain_error(model, mu):
    eta = mp.mpf(10) ** (-mp.mpf("0.02") * model.length_km)
    d = 1 - (1 - 2 * mp.mpf(model.p_dc)) * mp.e ** (-eta / 10 * mu)
    Q = (1 + mp.mpf(model.p_ap)) * d
    QE = model.p_dc + model.e_mis * (1 - mp.e ** (-eta * mu)) + model.p_ap * d / 2
    return float(Q), float(QE / Q)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 200.0))
def test_gain_and_error_matches_mpmath(mu, L):
    model = ChannelModel(length_km=L)
    Q, E = gain_and_error(model, mu)
    Qo, Eo = oracle_gain_error(model, mu)
    assert Q == pytest.approx(Qo, rel=1e-12)
    assert E == pytest.approx(Eo, rel=1e-12)


def test_vacuum_pulse_is_dark_counts_only():
    Q, E = gain_and_error(ChannelModel(), 0.0)
    p_dc, p_ap = 6e-7, 4e-2
    d = 2 * p_dc
    assert Q == pytest.approx((1 + p_ap) * d, rel=1e-12)
    assert Q * E == pytest.approx(p_dc + p_ap * d / 2, rel=1e-12)


def test_channel_validation():
    with pytest.raises(DomainError):
        ChannelModel(p_ap=1.5)
    with pytest.raises(DomainError):
        ChannelModel(length_km=-3)
    with pytest.raises(DomainError):
        gain_and_error(ChannelModel(), -0.1)


def test_protocol_validation():
    with pytest.raises(DomainError):
        ProtocolParams((0.5, 0.2), (0.5, 0.6), 0.9, 1e6)
    with pytest.raises(DomainError):
        ProtocolParams((0.5, 0.2), (0.5, 0.5), 1.0, 1e6)
    with pytest.raises(DomainError):
        ProtocolParams((0.5, 0.2), (1.0,), 0.9, 1e6)
    with pytest.raises(DomainError):
        ProtocolParams((0.5, 0.2), (0.5, 0.5), 0.9, 0.5)


def test_moments_and_mean(params_k3):
    vac, single = params_k3.moments()
    want_vac = sum(p * math.exp(-m) for p, m in zip(params_k3.p_mu, params_k3.mus))
    want_single = sum(p * m * math.exp(-m) for p, m in zip(params_k3.p_mu, params_k3.mus))
    assert vac == pytest.approx(want_vac, rel=1e-15)
    assert single == pytest.approx(want_single, rel=1e-15)
    assert params_k3.with_length(5e5).s_X == 5e5


def test_derived_counts(params_k3, channel):
    st_ = observe(channel, params_k3)
    mean_q = params_k3.mean(st_.Q_Z)
    p = params_k3.p_X
    assert st_.s_Z == pytest.approx((1 - p) ** 2 / p ** 2 * params_k3.s_X, rel=1e-14)
    mean_qe = params_k3.mean([q * e for q, e in zip(st_.Q_Z, st_.E_Z)])
    assert st_.s_Z_e == pytest.approx(st_.s_Z * mean_qe / mean_q, rel=1e-14)
    assert st_.s_Z_e + st_.s_Z_ebar == pytest.approx(st_.s_Z, rel=1e-14)
    assert st_.Q_X == st_.Q_Z and st_.E_X == st_.E_Z


def test_noisy_statistics_are_seeded(params_k3, channel):
    a = observe(channel, params_k3, rng=np.random.default_rng(3))
    b = observe(channel, params_k3, rng=np.random.default_rng(3))
    clean = observe(channel, params_k3)
    assert a == b
    assert isinstance(a, ObservedStats)
    for noisy, exact in zip(a.Q_X, clean.Q_X):
        assert noisy == pytest.approx(exact, rel=0.05)


def test_derive_counts_rejects_zero_gain(params_k3):
    with pytest.raises(DegenerateInputError):
        derive_counts(params_k3, (0.0, 0.0, 0.0), (1e-3,) * 3, (0.01,) * 3)
