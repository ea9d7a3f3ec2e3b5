import numpy as np
import pytest
from hypothesis import given, strategies as st

from noregret_queues.errors import DegenerateSystem, InvalidSpec
from noregret_queues.model import (
    SystemSpec,
    check_feasibility,
    feasibility_status,
    max_slack,
    prefix_surplus,
    preprocess,
)

rates = st.floats(min_value=0.01, max_value=1.0, allow_nan=False)
service = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
specs = st.builds(
    lambda lam, mu: SystemSpec(tuple(lam), tuple(mu)),
    st.lists(rates, min_size=1, max_size=6),
    st.lists(service, min_size=1, max_size=6),
)


def test_sorting_keeps_original_indices():
    s = SystemSpec((0.1, 0.5, 0.3), (0.2, 0.9))
    assert s.lam == (0.5, 0.3, 0.1)
    assert s.lam_order == (1, 2, 0)
    assert s.mu == (0.9, 0.2)
    assert s.mu_order == (1, 0)
    assert (s.n, s.m) == (3, 2)


@pytest.mark.parametrize("lam,mu", [((0.0,), (0.5,)), ((1.2,), (0.5,)), ((0.5,), (-0.1,)), ((), (0.5,)), ((0.5,), ())])
def test_invalid_rates(lam, mu):
    with pytest.raises(InvalidSpec):
        SystemSpec(lam, mu)


def test_padded():
    lam, mu = SystemSpec((0.3, 0.2, 0.1), (0.9,)).padded()
    assert lam.tolist() == [0.3, 0.2, 0.1]
    assert mu.tolist() == [0.9, 0.0, 0.0]


def test_preprocess_examples():
    out = preprocess(SystemSpec((1, 0.6, 0.3), (1, 0.9, 0.5)))
    assert out.lam == (0.6, 0.3) and out.mu == (0.9, 0.5)
    s = SystemSpec((0.6, 0.3), (0.9, 0.5))
    assert preprocess(s) == s
    with pytest.raises(DegenerateSystem):
        preprocess(SystemSpec((1.0,), (1.0,)))


def test_preprocess_removes_only_shared_prefix():
    out = preprocess(SystemSpec((1, 1, 0.2), (1, 0.9)))
    assert out.lam == (1.0, 0.2) and out.mu == (0.9,)


def test_feasibility_examples():
    assert check_feasibility(SystemSpec((0.6, 0.3), (0.9, 0.5)))
    assert not check_feasibility(SystemSpec((0.6, 0.1), (0.5, 0.5)))
    s = SystemSpec((0.5, 0.3), (0.8, 0.0))
    assert not check_feasibility(s)
    assert feasibility_status(s) == "boundary"
    assert feasibility_status(SystemSpec((0.6, 0.1), (0.5, 0.5))) == "infeasible"


def test_feasibility_pads_short_service_vector():
    # the third prefix compares 0.75 of arrivals against 0.75 + 0 of service
    s = SystemSpec((0.25, 0.25, 0.25), (0.75,))
    assert not check_feasibility(s)
    assert feasibility_status(s) == "boundary"


def test_max_slack_examples():
    r = max_slack(SystemSpec((0.2, 0.1), (1.0, 0.8)))
    assert r.eta == pytest.approx(0.6) and r.feasible
    r = max_slack(SystemSpec((0.5,), (1.0,)))
    assert r.eta == 0.0 and not r.feasible
    r = max_slack(SystemSpec((0.6,), (1.0,)))
    assert r.eta is None and r.violating_prefix == 1


def test_prefix_surplus():
    assert prefix_surplus(SystemSpec((0.6, 0.3), (0.5, 0.5))) == pytest.approx(0.1)
    assert prefix_surplus(SystemSpec((0.6, 0.3), (0.9, 0.5))) == 0.0


@given(specs)
def test_sorted_and_in_range(s):
    assert list(s.lam) == sorted(s.lam, reverse=True)
    assert list(s.mu) == sorted(s.mu, reverse=True)
    assert all(0 < x <= 1 for x in s.lam) and all(0 <= x <= 1 for x in s.mu)


@given(specs, st.floats(min_value=0.05, max_value=0.99))
def test_feasibility_monotone_under_scaling_down(s, factor):
    if check_feasibility(s):
        assert check_feasibility(SystemSpec(tuple(x * factor for x in s.lam), s.mu))


@given(specs)
def test_slack_certifies_scaled_feasibility(s):
    r = max_slack(s)
    if r.eta is None:
        return
    scaled = SystemSpec(s.lam, tuple(0.5 * (1 - r.eta) * x for x in s.mu))
    lam, mu = scaled.padded()
    # prefix sums over the queues dominate up to rounding
    margin = np.cumsum(mu)[: s.n] - np.cumsum(lam)[: s.n]
    assert margin.min() >= -1e-12


@given(specs)
def test_slack_is_maximal(s):
    r = max_slack(s)
    if r.eta is None or r.eta >= 1:
        return
    bumped = r.eta + 1e-6
    lam, mu = s.padded()
    margin = 0.5 * (1 - bumped) * np.cumsum(mu)[: s.n] - np.cumsum(lam)[: s.n]
    assert margin.min() < 0


@given(specs)
def test_preprocess_idempotent(s):
    try:
        once = preprocess(s)
    except DegenerateSystem:
        return
    assert preprocess(once) == once
