"""Quick self-checks on tiny instances, for the ``verify`` verb.

Each check compares a library routine with an independent brute-force
computation. The full property suite lives in the test directory; this is the
subset that runs in a few seconds without pytest.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from ..central import DoublyStochastic, birkhoff_decompose
from ..metrics import RegretLedger, potential, potential_tau, weighted_norms
from ..model import SystemSpec
from ..params import compute_window, window_checks
from ..sim.engines import StandardState, step_standard
from ..sim.runner import run_coupled
from ..strategies import IndependentPolicy, UniformRandom


def random_spec(rng: np.random.Generator, max_n: int = 4, max_m: int = 4) -> SystemSpec:
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    lam = rng.uniform(0.05, 0.6, size=n)
    mu = rng.uniform(0.0, 1.0, size=m)
    return SystemSpec(tuple(lam), tuple(mu))


def brute_counterfactual(oldest, choices, coins, n, m) -> list[list[bool]]:
    """Would queue i clear at j: it holds a packet, j's coin is 1, and it beats every other sender."""
    out = [[False] * m for _ in range(n)]
    for i in range(n):
        if oldest[i] is None:
            continue
        for j in range(m):
            if not coins[j]:
                continue
            beats = all(
                (oldest[i], i) < (oldest[k], k)
                for k in range(n)
                if k != i and choices[k] == j
            )
            out[i][j] = beats
    return out


def brute_regret(rows, choices, n, m) -> list[int]:
    regrets = []
    for i in range(n):
        fixed = [sum(1 for r in rows if r[i][j]) for j in range(m)]
        own = sum(1 for r, c in zip(rows, choices) if c[i] is not None and r[i][c[i]])
        regrets.append(max(fixed) - own)
    return regrets


def check_coupling(rng, specs=5, horizon=2000) -> str:
    for k in range(specs):
        spec = random_spec(rng)
        policy = IndependentPolicy.build(spec.n, k, lambda i, r: UniformRandom(spec.m, r))
        std, dual = run_coupled(spec, policy, horizon, k)
        if not np.array_equal(std.age, dual.age):
            raise AssertionError(f"ages differ for spec {spec}")
    return f"{specs} specs x {horizon} steps, ages identical"


def check_potential(rng, cases=200) -> str:
    for _ in range(cases):
        n = int(rng.integers(1, 6))
        lam = [Fraction(int(rng.integers(1, 65)), 64) for _ in range(n)]
        ages = [int(a) for a in rng.integers(0, 51, size=n)]
        oracle = sum((potential_tau(lam, ages, tau) for tau in range(1, max(ages) + 1)), Fraction(0))
        if potential(lam, ages, exact=True) != oracle:
            raise AssertionError(f"potential mismatch at lam={lam}, ages={ages}")
    return f"{cases} instances, closed form equals level sum"


def check_norms(rng, cases=200) -> str:
    for _ in range(cases):
        n = int(rng.integers(1, 8))
        lam = sorted(rng.uniform(0.01, 1.0, size=n), reverse=True)
        x = rng.normal(size=n)
        l1, l2 = weighted_norms(lam, x)
        # squared and in exact arithmetic, so boundary cases cannot flip
        fl = [Fraction(v) for v in lam]
        fx = [abs(Fraction(v)) for v in x]
        one = sum(a * b for a, b in zip(fl, fx))
        two_sq = sum(a * b * b for a, b in zip(fl, fx))
        if not (fl[-1] * two_sq <= one * one <= sum(fl) * two_sq):
            raise AssertionError("norm sandwich fails")
        if not math.isclose(l1, float(one)) or not math.isclose(l2 * l2, float(two_sq)):
            raise AssertionError("norm values off")
    return f"{cases} vectors, sandwich holds"


def check_regret(rng, traces=30, steps=20) -> str:
    for k in range(traces):
        spec = random_spec(rng)
        n, m = spec.n, spec.m
        state = StandardState(spec, k, counterfactuals=True)
        pol = rng.integers(0, m, size=(steps, n))
        ledger = RegretLedger(n, m, steps)
        rows, chs = [], []
        for t in range(steps):
            active = state.active()
            choices = [int(pol[t, i]) if active[i] else None for i in range(n)]
            coins = [c.at(t) for c in state.server_coins]
            oldest_after_arrival = [
                (q[0] if q else (t if a.at(t) else None)) for q, a in zip(state.queues, state.arrivals)
            ]
            out = step_standard(state, choices)
            brute = brute_counterfactual(oldest_after_arrival, choices, coins, n, m)
            if out.counterfactual.tolist() != brute:
                raise AssertionError(f"counterfactual mismatch at step {t}")
            ledger.record(out.counterfactual, choices)
            rows.append(brute)
            chs.append(choices)
        if ledger.regrets().tolist() != brute_regret(rows, chs, n, m):
            raise AssertionError("regret mismatch")
    return f"{traces} traces x {steps} steps, ledger equals brute force"


def random_doubly_stochastic(rng, size: int, terms: int = 6) -> np.ndarray:
    weights = rng.dirichlet(np.ones(terms))
    p = np.zeros((size, size))
    for w in weights:
        p[np.arange(size), rng.permutation(size)] += w
    return p


def check_bvn(rng, cases=40) -> str:
    for _ in range(cases):
        size = int(rng.integers(1, 9))
        p = random_doubly_stochastic(rng, size)
        dist = birkhoff_decompose(DoublyStochastic(p))
        if np.abs(dist.matrix() - p).max() >= 1e-9 or dist.size > (size - 1) ** 2 + 1:
            raise AssertionError("decomposition out of bounds")
    return f"{cases} matrices, reconstruction < 1e-9"


def check_window(rng, cases=10) -> str:
    for _ in range(cases):
        spec = random_spec(rng)
        eta = float(rng.uniform(0.2, 1.0))
        if spec.mu[0] <= 0.05:
            continue
        p = compute_window(spec, eta)
        for name, (lhs, rhs) in window_checks(spec.n, spec.m, spec.mu[0], eta, p.w).items():
            if lhs > rhs:
                raise AssertionError(f"{name} fails at w={p.w}")
        if p.w > 1:
            half = window_checks(spec.n, spec.m, spec.mu[0], eta, p.w // 2)
            if all(l <= r for l, r in half.values()):
                raise AssertionError("w is not minimal")
    return f"{cases} (spec, eta) pairs, w minimal and all checks pass"


CHECKS: dict[str, Callable] = {
    "coupling": check_coupling,
    "potential": check_potential,
    "norms": check_norms,
    "regret": check_regret,
    "birkhoff": check_bvn,
    "window": check_window,
}


def run_checks(seed: int = 0, echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        rng = np.random.default_rng(seed)
        try:
            detail = fn(rng)
            echo(f"PASS {name}: {detail}")
        except AssertionError as exc:
            ok = False
            echo(f"FAIL {name}: {exc}")
    return ok
