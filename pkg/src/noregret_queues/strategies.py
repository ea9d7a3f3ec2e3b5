"""Server-selection strategies.

Per-queue strategies see only the current time, their own current age, and the
binary outcome of their own past sends. Queue lengths are never passed in, which
is what keeps the standard and dual engines exactly coupled.

Coordinated policies (the central matching scheduler and the equilibrium
coordinator used in the no-priority counterexample) choose for all queues at
once and may look at which queues currently hold a packet.
"""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .central import MatchingDistribution, sample_matching
from .errors import OutOfOrder
from .model import SystemSpec
from .sim.streams import ROLE_COORDINATOR, ROLE_STRATEGY, role_rng


class Strategy:
    """One queue's learner."""

    def choose(self, t: int, age: int) -> int:
        raise NotImplementedError

    def feedback(self, chosen: int, cleared: bool) -> None:
        pass


class FixedServer(Strategy):
    def __init__(self, server: int):
        self.server = server

    def choose(self, t: int, age: int) -> int:
        return self.server


def top_server_strategy() -> FixedServer:
    """Always send to the fastest server (index 0 in sorted order)."""
    return FixedServer(0)


class UniformRandom(Strategy):
    def __init__(self, m: int, rng: np.random.Generator):
        self.m = m
        self.rng = rng

    def choose(self, t: int, age: int) -> int:
        return int(self.rng.integers(self.m))


class Exp3P(Strategy):
    """EXP3.P with an exploration floor and optional per-window restarts.

    Sampling probabilities are ``(1 - gamma) * softmax(log_weights) + gamma / m``.
    Each step every arm's log-weight grows by ``gamma / (3m)`` times its
    importance-weighted reward estimate plus the confidence bonus
    ``alpha / (p_j * sqrt(m * window))``. Default ``alpha`` and ``gamma`` are the
    high-probability settings for horizon ``window`` and failure probability
    ``delta``.

    With ``freeze=True`` the learner restarts from uniform at every multiple of
    ``window`` (wall-clock), so the guarantee applies to each window separately.
    """

    def __init__(
        self,
        m: int,
        window: int,
        delta: float,
        rng: np.random.Generator,
        freeze: bool = True,
        gamma: Optional[float] = None,
        alpha: Optional[float] = None,
    ):
        if m < 1 or window < 1 or not (0 < delta < 1):
            raise ValueError("need m >= 1, window >= 1, 0 < delta < 1")
        self.m = m
        self.window = window
        self.delta = delta
        self.rng = rng
        self.freeze = freeze
        if alpha is None:
            alpha = 2.0 * math.sqrt(math.log(m * window / delta))
        if gamma is None:
            gamma = 0.0 if m == 1 else min(0.6, 2.0 * math.sqrt(0.6 * m * math.log(m) / window))
        if not (0.0 <= gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        self.alpha = alpha
        self.gamma = gamma
        self._eta = gamma / (3.0 * m)
        self._bonus_scale = alpha / math.sqrt(m * window)
        self._window_index = 0
        self._pending: Optional[tuple[int, list[float]]] = None
        self.reset()

    def reset(self) -> None:
        self.estimates = [0.0] * self.m
        self.bonuses = [0.0] * self.m

    def probabilities(self) -> list[float]:
        eta = self._eta
        logs = [eta * (g + b) for g, b in zip(self.estimates, self.bonuses)]
        top = max(logs)
        ws = [math.exp(x - top) for x in logs]
        total = sum(ws)
        g = self.gamma
        floor = g / self.m
        return [(1.0 - g) * w / total + floor for w in ws]

    def _sync_window(self, t: int) -> None:
        if self.freeze:
            idx = t // self.window
            if idx != self._window_index:
                self._window_index = idx
                self.reset()

    def choose(self, t: int, age: int) -> int:
        self._sync_window(t)
        probs = self.probabilities()
        u = self.rng.random()
        acc = 0.0
        arm = self.m - 1
        for j, p in enumerate(probs):
            acc += p
            if u < acc:
                arm = j
                break
        self._pending = (arm, probs)
        return arm

    def feedback(self, chosen: int, cleared: bool) -> None:
        if self._pending is None or self._pending[0] != chosen:
            raise OutOfOrder("feedback without a matching choose")
        _, probs = self._pending
        self._pending = None
        if cleared:
            self.estimates[chosen] += 1.0 / probs[chosen]
        scale = self._bonus_scale
        for j, p in enumerate(probs):
            self.bonuses[j] += scale / p


# -- policies: map (t, ages, active) to one choice per queue -----------------

class Policy:
    """Chooses for every queue each step. ``models`` restricts usable engines."""

    models: Optional[frozenset[str]] = None

    def select(self, t: int, ages: Sequence[int], active: Sequence[bool]) -> list[Optional[int]]:
        raise NotImplementedError

    def observe(self, t: int, choices: Sequence[Optional[int]], cleared: Sequence[bool]) -> None:
        pass


class IndependentPolicy(Policy):
    """Each queue runs its own strategy; inactive queues are neither asked nor updated."""

    def __init__(self, strategies: Sequence[Strategy]):
        self.strategies = list(strategies)

    @classmethod
    def build(cls, n: int, seed: int, factory: Callable[[int, np.random.Generator], Strategy]):
        return cls([factory(i, role_rng(seed, ROLE_STRATEGY, i)) for i in range(n)])

    def select(self, t, ages, active):
        return [s.choose(t, a) if act else None for s, a, act in zip(self.strategies, ages, active)]

    def observe(self, t, choices, cleared):
        for s, j, c in zip(self.strategies, choices, cleared):
            if j is not None:
                s.feedback(j, c)


class CentralPolicy(Policy):
    """Samples one matching per step, used whether or not queues have packets."""

    def __init__(self, dist: MatchingDistribution, spec: SystemSpec, rng: np.random.Generator):
        self.dist = dist
        self.n = spec.n
        self.m = spec.m
        self.rng = rng

    def select(self, t, ages, active):
        perm = sample_matching(self.dist, self.rng)
        out: list[Optional[int]] = []
        for i in range(self.n):
            j = perm[i]
            out.append(j if active[i] and j < self.m else None)
        return out


class NashCoordinator(Policy):
    """Equilibrium schedule for the no-priority counterexample.

    Each step ``group`` active queues share the fast server 0: the high-rate
    queue 0 whenever it holds a packet, topped up with randomly chosen active
    low-rate queues. Every other active queue gets its own slow server. With at
    most ``group`` active queues, all of them go to server 0.
    """

    models = frozenset({"no_priority"})

    def __init__(self, spec: SystemSpec, k_low: int, rng: np.random.Generator):
        self.spec = spec
        self.k_low = k_low
        self.group = k_low + 1
        self.rng = rng

    def select(self, t, ages, active):
        n = self.spec.n
        out: list[Optional[int]] = [None] * n
        idle = [i for i in range(n) if active[i]]
        if len(idle) <= self.group:
            for i in idle:
                out[i] = 0
            return out
        chosen: list[int] = []
        if active[0]:
            chosen.append(0)
        low = [i for i in idle if i != 0]
        need = self.group - len(chosen)
        picks = self.rng.choice(len(low), size=need, replace=False)
        chosen.extend(low[k] for k in sorted(picks))
        taken = set(chosen)
        for i in chosen:
            out[i] = 0
        server = 1
        for i in low:
            if i in taken:
                continue
            if server >= self.spec.m:
                out[i] = 0
                continue
            out[i] = server
            server += 1
        return out


def make_nash_coordinator(spec: SystemSpec, n_root: int, seed: int = 0) -> NashCoordinator:
    """Coordinator with ``k_low = ceil(n_root / 2 - 1)`` low-rate queues at the fast server."""
    k_low = max(1, math.ceil(n_root / 2 - 1))
    return NashCoordinator(spec, k_low, role_rng(seed, ROLE_COORDINATOR))


def success_probabilities(spec: SystemSpec, choices: Sequence[Optional[int]], queue: int) -> list[float]:
    """No-priority success chance of ``queue`` at each server, others' choices fixed."""
    counts = [0] * spec.m
    for i, j in enumerate(choices):
        if j is not None and i != queue:
            counts[j] += 1
    return [mu / (c + 1) for mu, c in zip(spec.mu, counts)]


def nash_audit(spec: SystemSpec, choices: Sequence[Optional[int]], tol: float = 1e-12) -> list[tuple[int, float, float]]:
    """Queues whose assigned server is not a best response; empty list means equilibrium.

    Each violation is ``(queue, assigned_probability, best_probability)``.
    """
    bad = []
    for i, j in enumerate(choices):
        if j is None:
            continue
        probs = success_probabilities(spec, choices, i)
        best = max(probs)
        if probs[j] < best - tol:
            bad.append((i, probs[j], best))
    return bad
