import math

import pytest

from finitekey import ChannelModel, ProtocolParams, SecurityBudget, observe
from finitekey.bounds import ALL_METHODS, Method
from finitekey.coeffs import binary_entropy, decoy_coefficients
from finitekey.exceptions import DomainError, NonConvergenceError
from finitekey.keyrate import (KeyRateResult, asymptotic_rate, evaluate, leakage, phase_error,
                               secure_rate, secure_rates)


def recompute_rate(params, stats, res, budget):
    """Rate expression rebuilt from the result's own e_p and eps_sec."""
    c = decoy_coefficients(params.mus)
    vac = sum(p * math.exp(-m) for p, m in zip(params.p_mu, params.mus))
    one = sum(p * m * math.exp(-m) for p, m in zip(params.p_mu, params.mus))
    keep = 1 - binary_entropy(res.e_p)
    b = [params.p_X ** 2 * (vac * a0 + one * a1 * keep) for a0, a1 in zip(c.a0, c.a1)]
    qx = sum(p * q for p, q in zip(params.p_mu, stats.Q_X))
    ratios = [bn / pn for bn, pn in zip(b, params.p_mu)]
    L = math.log(res.chi / res.eps_sec)
    leak = sum(p * q * binary_entropy(e) for p, q, e in zip(params.p_mu, stats.Q_X, stats.E_X))
    return (sum(bn * q for bn, q in zip(b, stats.Q_X))
            - qx * math.sqrt(L / (2 * params.s_X)) * (max(ratios) - min(ratios))
            - params.p_X ** 2 * (leak + qx / params.s_X * (6 * L / math.log(2)
                                                             + math.log2(2 / budget.eps_cor))))


@pytest.mark.parametrize("method", ALL_METHODS)
def test_rate_expression_and_fixed_point(params_k3, channel, method):
    budget = SecurityBudget()
    stats = observe(channel, params_k3)
    res = secure_rate(params_k3, stats, method, budget)
    assert res.R > 0 and res.feasible
    assert res.R == pytest.approx(recompute_rate(params_k3, stats, res, budget), rel=1e-9)
    pulses = params_k3.s_X / (params_k3.p_X ** 2 * params_k3.mean(stats.Q_X))
    assert res.eps_sec == pytest.approx(budget.kappa * res.R * pulses, rel=1e-10)
    assert res.ell_final == pytest.approx(res.R * pulses, rel=1e-12)
    assert res.chi == method.chi


@pytest.mark.parametrize("damping", [0.0, 0.3, 0.7])
def test_damping_does_not_move_the_fixed_point(params_k4, channel, damping):
    stats = observe(channel, params_k4)
    base = secure_rate(params_k4, stats, Method.M4)
    damped = secure_rate(params_k4, stats, Method.M4, damping=damping, max_iter=500)
    assert damped.R == pytest.approx(base.R, rel=1e-10)


def test_non_convergence_reports_trace(params_k3, channel):
    stats = observe(channel, params_k3)
    with pytest.raises(NonConvergenceError):
        secure_rate(params_k3, stats, Method.M1, max_iter=1)
    with pytest.raises(DomainError):
        secure_rate(params_k3, stats, Method.M1, damping=1.0)


def test_tiny_sample_gives_zero_rate(params_k3):
    res = evaluate(params_k3.with_length(1e4), Method.M1)
    assert res.R == 0.0 and not res.feasible
    assert res.raw_rate < 0


@pytest.mark.parametrize("method", ALL_METHODS)
def test_rate_increases_with_sample_size(params_k3, method):
    rates = [evaluate(params_k3.with_length(s), method).R for s in (1e7, 1e8, 1e9, 1e10, 1e11)]
    assert all(a <= b for a, b in zip(rates, rates[1:]))


@pytest.mark.parametrize("method", ALL_METHODS)
def test_asymptotic_rate_dominates(params_k4, channel, method):
    stats = observe(channel, params_k4)
    asy = asymptotic_rate(params_k4, stats, method)
    assert evaluate(params_k4.with_length(1e12), method).R <= asy
    assert evaluate(params_k4.with_length(1e16), method).R == pytest.approx(asy, rel=1e-2)


def test_leakage_by_hand(params_k3, channel):
    stats = observe(channel, params_k3)
    want = math.fsum(p * q * binary_entropy(e)
                     for p, q, e in zip(params_k3.p_mu, stats.Q_X, stats.E_X))
    assert leakage(stats, params_k3.p_mu) == want


def test_phase_error_policies(params_k3, channel):
    stats = observe(channel, params_k3)
    coeffs = decoy_coefficients(params_k3.mus)
    assert phase_error(0.5, stats, coeffs, 1e-10, params_k3) == 0.5
    e = phase_error(0.02, stats, coeffs, 1e-10, params_k3)
    assert 0.02 < e < 0.03
    # a failure probability so loose that no real gap exists
    assert phase_error(0.02, stats, coeffs, 0.9, params_k3) == 0.02
    assert phase_error(0.02, stats, coeffs, 0.9, params_k3, worst_case_gamma=True) == 0.5
    with pytest.raises(DomainError):
        phase_error(0.7, stats, coeffs, 1e-10, params_k3)


def test_result_round_trip(params_k4):
    res = evaluate(params_k4, Method.M4)
    back = KeyRateResult.from_dict(res.to_dict())
    assert back == res


def test_secure_rates_shares_coefficients(params_k3, channel):
    stats = observe(channel, params_k3)
    many = secure_rates(params_k3, stats)
    assert set(many) == set(ALL_METHODS)
    for m, r in many.items():
        assert r.R == secure_rate(params_k3, stats, m).R


def test_budget_validation():
    with pytest.raises(DomainError):
        SecurityBudget(kappa=0.0)
    with pytest.raises(DomainError):
        SecurityBudget(eps_cor=1.0)


# Regression pins produced by this implementation (not external reference values).
PINNED = {
    "k3": (1.5312424185546563e-05, 1.574009151436671e-05, 1.5705280395281632e-05,
           1.5817969112841003e-05),
    "k4": (1.2473065352681844e-05, 1.2804488532647368e-05, 1.2765915561541882e-05,
           1.3257440093978924e-05),
}


@pytest.mark.parametrize("name", sorted(PINNED))
def test_pipeline_regression(request, name):
    params = request.getfixturevalue(f"params_{name}")
    got = tuple(evaluate(params, m).R for m in ALL_METHODS)
    assert got == pytest.approx(PINNED[name], rel=1e-9)


def test_channel_length_lowers_rate(params_k3):
    near = evaluate(params_k3, Method.M2, ChannelModel(length_km=50)).R
    far = evaluate(params_k3, Method.M2, ChannelModel(length_km=100)).R
    assert near > far
