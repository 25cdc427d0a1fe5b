import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finitekey import ProtocolParams
from finitekey.bounds import Method
from finitekey.exceptions import ConfigError
from finitekey.optimize import SearchSpace, anneal, optimize_rate


def test_project_restores_spacing():
    space = SearchSpace(3)
    got = space.project([0.9, 0.3, 0.25, 0.3, 0.3, 0.4])
    assert got == pytest.approx([0.9, 0.35, 0.25, 0.3, 0.3, 0.4])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.data())
def test_project_lands_in_feasible_set(k, data):
    space = SearchSpace(k)
    x = data.draw(st.lists(st.floats(-2, 2), min_size=2 * k, max_size=2 * k))
    y = space.project(x)
    lo, hi = space.lower_upper()
    assert np.all(y[:k] >= lo[:k] - 1e-12) and np.all(y[:k] <= hi[:k] + 1e-12)
    mus = list(y[1:k]) + [space.mu_min]
    assert all(a - b >= space.spacing - 1e-12 for a, b in zip(mus, mus[1:]))
    assert y[k:].sum() == pytest.approx(1.0)
    assert np.all(y[k:] > 0)
    assert space.project(y) == pytest.approx(y)
    space.to_params(y, 1e9)


def test_params_round_trip():
    space = SearchSpace(4)
    p = ProtocolParams((0.8468, 0.2467, 0.1467, 1e-6), (0.0064, 0.1956, 0.6363, 0.1617),
                       0.866, 1e8)
    assert space.to_params(space.from_params(p), 1e8) == p
    with pytest.raises(ConfigError):
        SearchSpace(3).from_params(p)


@pytest.mark.parametrize("kwargs", [dict(k=1), dict(k=11), dict(k=3, spacing=0.6),
                                    dict(k=3, bounds={"p_X": (0.5, 0.9), "mu": (0, 1)}),
                                    dict(k=3, bounds={"p_X": (0.5, 1.0), "mu": (0, 1),
                                                      "p_mu": (1e-3, 1)})])
def test_search_space_validation(kwargs):
    with pytest.raises(ConfigError):
        SearchSpace(**kwargs)


def test_project_rejects_bad_vectors():
    with pytest.raises(ConfigError):
        SearchSpace(3).project([0.5] * 5)
    with pytest.raises(ConfigError):
        SearchSpace(3).project([np.nan] * 6)


def toy(x):
    return -float(np.sum((x - 0.3) ** 2))


def test_anneal_finds_toy_optimum_and_is_deterministic():
    space = SearchSpace(2, bounds={"p_X": (0.1, 0.9), "mu": (0.0, 1.0), "p_mu": (1e-3, 1.0)})
    a = anneal(space, toy, 4000, seed=7)
    b = anneal(space, toy, 4000, seed=7)
    assert a.value == b.value and np.array_equal(a.x, b.x)
    assert a.evaluations == len(a.trace) == 4000
    assert all(u <= v for u, v in zip(a.trace, a.trace[1:]))
    # p_mu is forced onto the simplex, so (0.3, 0.3) is infeasible there; (0.5, 0.5) is best
    assert a.x == pytest.approx([0.3, 0.3, 0.5, 0.5], abs=2e-2)


def test_anneal_budget_floor():
    with pytest.raises(ConfigError):
        anneal(SearchSpace(2), toy, 100)


def test_optimize_rate_small_budget():
    res = optimize_rate(3, 1e9, Method.M1, evaluations=600, seed=1)
    again = optimize_rate(3, 1e9, "A", evaluations=600, seed=1)
    assert res.result.R == again.result.R > 0
    assert res.result.R == pytest.approx(res.anneal.value, rel=1e-12)
    assert res.params.k == 3 and res.params.mus[-1] == 1e-6
    with pytest.raises(ConfigError):
        optimize_rate(4, 1e9, space=SearchSpace(3), evaluations=300)
