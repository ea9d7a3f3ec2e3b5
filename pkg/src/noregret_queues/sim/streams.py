"""Role-separated random streams.

Every source of randomness in a run gets its own generator, derived from the
run seed and a (role, index) spawn key. Draws are positional: the Bernoulli
outcome of queue ``i`` at step ``t`` is a fixed function of the seed, however
many times or in whatever order it is read. This is what lets the standard and
dual engines see the same arrivals even though the dual engine reads ahead.
"""
from __future__ import annotations

import numpy as np

ROLE_ARRIVAL = 1
ROLE_COIN = 2
ROLE_STRATEGY = 3
ROLE_PICK = 4
ROLE_COUNTERFACTUAL = 5
ROLE_COORDINATOR = 6

BLOCK = 4096


def role_rng(seed: int, role: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(role, index)))


class BernoulliStream:
    """Positional Bernoulli(p) sequence with block buffering.

    ``at(k)`` returns draw ``k``. Indices below ``release``'d marks may be
    discarded to bound memory.
    """

    __slots__ = ("p", "_rng", "_buf", "_offset", "_list")

    def __init__(self, p: float, rng: np.random.Generator):
        self.p = float(p)
        self._rng = rng
        self._buf = np.zeros(0, dtype=bool)
        self._offset = 0
        self._list: list[bool] = []

    def _extend(self, upto: int) -> None:
        need = upto - (self._offset + self._buf.size) + 1
        blocks = max(1, -(-need // BLOCK))
        fresh = self._rng.random(blocks * BLOCK) < self.p
        self._buf = np.concatenate([self._buf, fresh])
        self._list.extend(fresh.tolist())

    def at(self, k: int) -> bool:
        idx = k - self._offset
        if idx >= len(self._list):
            self._extend(k)
        return self._list[idx]

    def next_success(self, after: int) -> int:
        """Smallest index ``> after`` whose draw is 1."""
        start = after + 1
        while True:
            end = self._offset + self._buf.size
            if start >= end:
                self._extend(start)
                continue
            hits = np.flatnonzero(self._buf[start - self._offset:])
            if hits.size:
                return start + int(hits[0])
            self._extend(end)
            start = end

    def count(self, lo: int, hi: int) -> int:
        """Number of successes with index in ``[lo, hi)``."""
        if hi <= lo:
            return 0
        self.at(hi - 1)
        return int(self._buf[lo - self._offset: hi - self._offset].sum())

    def release(self, below: int) -> None:
        drop = below - self._offset
        if drop >= BLOCK * 4:
            drop -= drop % BLOCK
            self._buf = self._buf[drop:]
            self._list = self._list[drop:]
            self._offset += drop
