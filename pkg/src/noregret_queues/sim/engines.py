"""Single-step engines: standard (oldest-first), dual (oldest timestamp only), no-priority.

Step ``t`` runs as: arrivals stamped ``t`` join their queues, every queue that
holds a packet may send its oldest one to a server, each server that received
something picks one sender and clears it iff its coin for step ``t`` is 1.

Servers flip a coin every step whether or not anyone sends, so "would queue i
have cleared at server j" is well defined for every pair.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ChoiceFromEmptyQueue
from ..model import SystemSpec
from .streams import (
    ROLE_ARRIVAL,
    ROLE_COIN,
    ROLE_COUNTERFACTUAL,
    ROLE_PICK,
    BernoulliStream,
    role_rng,
)

NO_KEY = np.iinfo(np.int64).max
RELEASE_EVERY = 4096

Choices = Sequence[Optional[int]]


@dataclass
class StepOutcome:
    t: int
    choices: list[Optional[int]]
    cleared: list[bool]
    winners: list[Optional[int]]
    coins: list[bool]
    # counterfactual[i, j]: queue i would have cleared had it sent to server j
    counterfactual: Optional[np.ndarray] = None


def _arrival_streams(spec: SystemSpec, seed: int) -> list[BernoulliStream]:
    return [BernoulliStream(p, role_rng(seed, ROLE_ARRIVAL, i)) for i, p in enumerate(spec.lam)]


def _coin_streams(spec: SystemSpec, seed: int) -> list[BernoulliStream]:
    return [BernoulliStream(p, role_rng(seed, ROLE_COIN, j)) for j, p in enumerate(spec.mu)]


class StandardState:
    """Full queue contents: one deque of arrival timestamps per queue."""

    def __init__(self, spec: SystemSpec, seed: int, counterfactuals: bool = False):
        self.spec = spec
        self.t = 0
        self.queues: list[deque[int]] = [deque() for _ in range(spec.n)]
        self.arrivals = _arrival_streams(spec, seed)
        self.server_coins = _coin_streams(spec, seed)
        self.pick_rng = role_rng(seed, ROLE_PICK)
        self.cf_rng = role_rng(seed, ROLE_COUNTERFACTUAL)
        self.counterfactuals = counterfactuals

    def sizes(self) -> list[int]:
        return [len(q) for q in self.queues]

    def ages(self) -> list[int]:
        t = self.t
        return [t - q[0] if q else 0 for q in self.queues]

    def active(self) -> list[bool]:
        """Whether each queue holds a packet once this step's arrivals land."""
        t = self.t
        return [bool(q) or a.at(t) for q, a in zip(self.queues, self.arrivals)]

    def oldest(self) -> list[Optional[int]]:
        return [q[0] if q else None for q in self.queues]


class DualState:
    """Only the oldest unprocessed timestamp per queue.

    ``oldest[i] > t`` means queue ``i`` is empty and its next packet arrives at
    ``oldest[i]``. On a clear the next timestamp is the next success of the
    queue's arrival sequence, i.e. ``oldest + Geometric(lam_i)``.
    """

    def __init__(self, spec: SystemSpec, seed: int, counterfactuals: bool = False):
        self.spec = spec
        self.t = 0
        self.gap_stream = _arrival_streams(spec, seed)
        self.oldest = [s.next_success(-1) for s in self.gap_stream]
        self.server_coins = _coin_streams(spec, seed)
        self.cf_rng = role_rng(seed, ROLE_COUNTERFACTUAL)
        self.counterfactuals = counterfactuals
        # bookkeeping for reporting queue sizes; never read by the dynamics
        self._arrived = [0] * spec.n
        self._cleared = [0] * spec.n

    def ages(self) -> list[int]:
        t = self.t
        return [t - o if o < t else 0 for o in self.oldest]

    def active(self) -> list[bool]:
        t = self.t
        return [o <= t for o in self.oldest]

    def sizes(self) -> list[int]:
        return [a - c for a, c in zip(self._arrived, self._cleared)]


def _check_choices(choices: Choices, active: Sequence[bool], m: int) -> None:
    for i, j in enumerate(choices):
        if j is None:
            continue
        if not active[i]:
            raise ChoiceFromEmptyQueue(f"queue {i} has no packet but chose server {j}")
        if not 0 <= j < m:
            raise ValueError(f"queue {i} chose server {j}, only {m} servers")


def _priority_resolve(n, m, choices, keys, coins, active, want_cf):
    """Oldest-first resolution. ``keys[i] = oldest_ts * n + i`` so ties go to the lower index."""
    best = [NO_KEY] * m
    second = [NO_KEY] * m
    for i, j in enumerate(choices):
        if j is None:
            continue
        k = keys[i]
        if k < best[j]:
            second[j] = best[j]
            best[j] = k
        elif k < second[j]:
            second[j] = k
    winners: list[Optional[int]] = [None] * m
    cleared = [False] * n
    for j in range(m):
        if best[j] != NO_KEY:
            w = best[j] % n
            winners[j] = w
            if coins[j]:
                cleared[w] = True
    cf = None
    if want_cf:
        key_arr = np.array([k if a else NO_KEY for k, a in zip(keys, active)], dtype=np.int64)
        best_arr = np.array(best, dtype=np.int64)
        second_arr = np.array(second, dtype=np.int64)
        owner = np.where(best_arr != NO_KEY, best_arr % n, -1)
        # the competition queue i faces at j excludes its own send
        comp = np.where(owner[None, :] == np.arange(n)[:, None], second_arr[None, :], best_arr[None, :])
        act = np.array(active, dtype=bool)
        coin_arr = np.array(coins, dtype=bool)
        cf = act[:, None] & coin_arr[None, :] & (key_arr[:, None] < comp)
    return winners, cleared, cf


def step_standard(state: StandardState, choices: Choices) -> StepOutcome:
    spec = state.spec
    n, m, t = spec.n, spec.m, state.t
    queues = state.queues
    for q, a in zip(queues, state.arrivals):
        if a.at(t):
            q.append(t)
    active = [bool(q) for q in queues]
    _check_choices(choices, active, m)
    coins = [c.at(t) for c in state.server_coins]
    keys = [q[0] * n + i if q else NO_KEY for i, q in enumerate(queues)]
    winners, cleared, cf = _priority_resolve(n, m, choices, keys, coins, active, state.counterfactuals)
    for i in range(n):
        if cleared[i]:
            queues[i].popleft()
    state.t = t + 1
    if state.t % RELEASE_EVERY == 0:
        for a in state.arrivals:
            a.release(state.t)
        for c in state.server_coins:
            c.release(state.t)
    return StepOutcome(t, list(choices), cleared, winners, coins, cf)


def step_dual(state: DualState, choices: Choices) -> StepOutcome:
    spec = state.spec
    n, m, t = spec.n, spec.m, state.t
    oldest = state.oldest
    active = [o <= t for o in oldest]
    _check_choices(choices, active, m)
    coins = [c.at(t) for c in state.server_coins]
    keys = [oldest[i] * n + i if active[i] else NO_KEY for i in range(n)]
    winners, cleared, cf = _priority_resolve(n, m, choices, keys, coins, active, state.counterfactuals)
    streams = state.gap_stream
    for i in range(n):
        if streams[i].at(t):
            state._arrived[i] += 1
        if cleared[i]:
            oldest[i] = streams[i].next_success(oldest[i])
            state._cleared[i] += 1
    state.t = t + 1
    if state.t % RELEASE_EVERY == 0:
        low = min(min(oldest), state.t)
        for s in streams:
            s.release(low)
        for c in state.server_coins:
            c.release(state.t)
    return StepOutcome(t, list(choices), cleared, winners, coins, cf)


def step_no_priority(state: StandardState, choices: Choices) -> StepOutcome:
    """Each server serves a uniformly random sender; within a queue the oldest packet goes."""
    spec = state.spec
    n, m, t = spec.n, spec.m, state.t
    queues = state.queues
    for q, a in zip(queues, state.arrivals):
        if a.at(t):
            q.append(t)
    active = [bool(q) for q in queues]
    _check_choices(choices, active, m)
    coins = [c.at(t) for c in state.server_coins]
    senders: list[list[int]] = [[] for _ in range(m)]
    for i, j in enumerate(choices):
        if j is not None:
            senders[j].append(i)
    picks = state.pick_rng.random(m).tolist()
    winners: list[Optional[int]] = [None] * m
    cleared = [False] * n
    for j in range(m):
        s = senders[j]
        if s:
            w = s[int(picks[j] * len(s))]
            winners[j] = w
            if coins[j]:
                cleared[w] = True
    cf = None
    if state.counterfactuals:
        counts = np.array([len(s) for s in senders], dtype=float)
        u = state.cf_rng.random((n, m))
        act = np.array(active, dtype=bool)
        coin_arr = np.array(coins, dtype=bool)
        # a would-be sender joins the actual senders and is picked with prob 1/(k+1)
        cf = act[:, None] & coin_arr[None, :] & (u * (counts[None, :] + 1.0) < 1.0)
        for i, j in enumerate(choices):
            if j is not None:
                cf[i, j] = cleared[i]
    for i in range(n):
        if cleared[i]:
            queues[i].popleft()
    state.t = t + 1
    if state.t % RELEASE_EVERY == 0:
        for a in state.arrivals:
            a.release(state.t)
        for c in state.server_coins:
            c.release(state.t)
    return StepOutcome(t, list(choices), cleared, winners, coins, cf)
