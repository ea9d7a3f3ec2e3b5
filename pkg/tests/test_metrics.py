import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noregret_queues.errors import IncompleteWindow, InsufficientData
from noregret_queues.metrics import (
    CheckpointSeries,
    PotentialSeries,
    RegretLedger,
    bootstrap_se,
    classify_exponent,
    classify_stability,
    fixed_windows,
    growth_exponent,
    linear_slope,
    log_checkpoints,
    potential,
    potential_many,
    potential_tau,
    square_windows,
    weighted_norms,
)


def ledger_from(rows, choices, m):
    led = RegretLedger(len(rows[0]), m, len(rows))
    for r, c in zip(rows, choices):
        led.record(np.array(r, dtype=bool), c)
    return led


def test_regret_examples():
    rows = [[[1, 0]], [[0, 1]], [[1, 0]]]
    assert ledger_from(rows, [[0], [0], [0]], 2).regret(0) == 0
    assert ledger_from(rows, [[1], [1], [1]], 2).regret(0) == 1
    empty = [[[0, 0]]] * 3
    assert ledger_from(empty, [[None]] * 3, 2).regret(0) == 0


def test_regret_incomplete_window():
    led = RegretLedger(1, 2, 5)
    led.record(np.zeros((1, 2), dtype=bool), [None])
    with pytest.raises(IncompleteWindow):
        led.regret(0)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 20), st.integers(0, 2 ** 31))
def test_regret_matches_brute_force(n, m, w, seed):
    rng = np.random.default_rng(seed)
    rows = rng.random((w, n, m)) < 0.4
    choices = [[None if rng.random() < 0.2 else int(rng.integers(m)) for _ in range(n)] for _ in range(w)]
    led = ledger_from(rows.tolist(), choices, m)
    for i in range(n):
        best = max(sum(rows[t, i, j] for t in range(w)) for j in range(m))
        own = sum(rows[t, i, choices[t][i]] for t in range(w) if choices[t][i] is not None)
        assert led.regret(i) == best - own
        assert led.regret(i) >= -own


def test_window_generators():
    f = fixed_windows(5)
    assert [next(f) for _ in range(3)] == [(0, 5), (5, 5), (10, 5)]
    s = square_windows()
    assert [next(s) for _ in range(4)] == [(0, 1), (1, 4), (5, 9), (14, 16)]


def test_potential_examples():
    assert potential([0.5, 0.25], [3, 2]) == pytest.approx(1.75)
    assert potential([0.5, 0.25], [0, 0]) == 0
    assert potential([0.5], [1]) == 0
    assert potential([Fraction(1, 2), Fraction(1, 4)], [3, 2], exact=True) == Fraction(7, 4)


@given(st.lists(st.tuples(st.integers(1, 64), st.integers(0, 50)), min_size=1, max_size=8))
def test_potential_equals_level_sum(pairs):
    lam = [Fraction(a, 64) for a, _ in pairs]
    ages = [b for _, b in pairs]
    oracle = sum((potential_tau(lam, ages, tau) for tau in range(1, max(ages) + 1)), Fraction(0))
    assert potential(lam, ages, exact=True) == oracle
    assert potential([float(l) for l in lam], ages) == float(oracle)


def test_potential_many_rows():
    ages = np.array([[0, 0], [3, 2], [1, 5]])
    assert potential_many([0.5, 0.25], ages).tolist() == [potential([0.5, 0.25], r) for r in ages]


def test_norm_examples():
    l1, l2 = weighted_norms([0.5, 0.25], [1, 1])
    assert l1 == 0.75 and l2 == pytest.approx(math.sqrt(0.75))
    assert l1 == pytest.approx(math.sqrt(0.75) * l2)
    assert weighted_norms([0.5, 0.25], [0, 0]) == (0.0, 0.0)
    l1, l2 = weighted_norms([0.5, 0.25], [0, 1])
    assert l1 == 0.25 and math.sqrt(0.25) * l2 == pytest.approx(0.25)
    with pytest.raises(ValueError):
        weighted_norms([0.5, 0.0], [1, 1])


@given(st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(-1e3, 1e3)), min_size=1, max_size=10))
def test_norm_sandwich_exact(pairs):
    pairs = sorted(pairs, key=lambda p: -p[0])
    lam = [Fraction(a) for a, _ in pairs]
    x = [abs(Fraction(b)) for _, b in pairs]
    one = sum(a * b for a, b in zip(lam, x))
    two_sq = sum(a * b * b for a, b in zip(lam, x))
    assert lam[-1] * two_sq <= one * one <= sum(lam) * two_sq


def test_potential_series(tmp_path):
    ages = np.array([[0, 0], [1, 0], [2, 1], [3, 0], [4, 1], [5, 2], [6, 3]])
    ps = PotentialSeries.from_ages([0.5, 0.25], ages, 3)
    assert ps.times.tolist() == [0, 3, 6]
    assert ps.phi.tolist() == [potential([0.5, 0.25], ages[t]) for t in (0, 3, 6)]
    assert np.allclose(ps.z, np.sqrt(ps.phi))
    assert ps.tau.tolist() == [[0, 0], [0, 0], [3, 0]]
    ps.write_csv(tmp_path / "p.csv")
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["window", "t", "phi", "z", "tau_0", "tau_1"]
    assert len(rows) == 4


def test_log_checkpoints():
    pts = log_checkpoints(100)
    assert pts[0] == 1 and pts[-1] == 100
    assert 10 in pts and 17 in pts
    assert np.all(np.diff(pts) > 0)
    assert log_checkpoints(50)[-1] == 50


def test_growth_exponent_recovers_power_laws():
    t = log_checkpoints(10 ** 5)
    for a in (0.0, 0.5, 1.0):
        assert growth_exponent(t, 3.0 * t.astype(float) ** a) == pytest.approx(a, abs=1e-9)
    assert linear_slope(t, 0.1 * t + 4) == pytest.approx(0.1)


def test_classify_thresholds():
    assert classify_exponent(0.05) == "bounded"
    assert classify_exponent(0.45) == "sqrt-growth"
    assert classify_exponent(0.9) == "linear-growth"
    assert classify_exponent(0.75) == "inconclusive"
    assert classify_exponent(0.2) == "inconclusive"


def test_bootstrap_se_close_to_analytic():
    x = np.random.default_rng(0).normal(size=400)
    se = bootstrap_se(x, resamples=2000)
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(400), rel=0.1)
    assert bootstrap_se(np.ones(30)) == 0.0


def test_classify_stability_requirements(tmp_path):
    t = log_checkpoints(10_000)
    values = np.tile(np.sqrt(t.astype(float)), (30, 1))
    rep = classify_stability(CheckpointSeries("total_q", t, values))
    assert rep.classification == "sqrt-growth"
    assert set(rep.moments) == {1, 2, 4}
    assert np.allclose(rep.moments[2], values[0] ** 2)
    rep.write_csv(tmp_path / "s.csv")
    header = open(tmp_path / "s.csv").readline().strip().split(",")
    assert header == ["t", "mean", "m1", "se1", "m2", "se2", "m4", "se4"]
    with pytest.raises(InsufficientData):
        classify_stability(CheckpointSeries("total_q", t, values[:5]))
    short = log_checkpoints(1000)
    with pytest.raises(InsufficientData):
        classify_stability(CheckpointSeries("total_q", short, np.ones((30, short.size))))
