"""System specification, preprocessing, central feasibility and slack."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateSystem, InvalidSpec


@dataclass(frozen=True)
class SystemSpec:
    """Arrival rates ``lam`` (one per queue) and service rates ``mu`` (one per server).

    Both vectors are sorted non-increasing on construction. ``lam_order[k]`` and
    ``mu_order[k]`` give the caller's original index of the k-th sorted entry.
    """

    lam: tuple[float, ...]
    mu: tuple[float, ...]
    lam_order: tuple[int, ...] = field(default=(), compare=False)
    mu_order: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        lam = [float(x) for x in self.lam]
        mu = [float(x) for x in self.mu]
        if not lam or not mu:
            raise InvalidSpec("need at least one queue and one server")
        for x in lam:
            if not (0.0 < x <= 1.0):
                raise InvalidSpec(f"arrival rate {x} outside (0, 1]")
        for x in mu:
            if not (0.0 <= x <= 1.0):
                raise InvalidSpec(f"service rate {x} outside [0, 1]")
        # stable descending sort keeps equal rates in caller order
        lam_idx = sorted(range(len(lam)), key=lambda i: -lam[i])
        mu_idx = sorted(range(len(mu)), key=lambda j: -mu[j])
        if self.lam_order:
            lam_idx_orig = [self.lam_order[i] for i in lam_idx]
        else:
            lam_idx_orig = lam_idx
        if self.mu_order:
            mu_idx_orig = [self.mu_order[j] for j in mu_idx]
        else:
            mu_idx_orig = mu_idx
        object.__setattr__(self, "lam", tuple(lam[i] for i in lam_idx))
        object.__setattr__(self, "mu", tuple(mu[j] for j in mu_idx))
        object.__setattr__(self, "lam_order", tuple(lam_idx_orig))
        object.__setattr__(self, "mu_order", tuple(mu_idx_orig))

    @property
    def n(self) -> int:
        return len(self.lam)

    @property
    def m(self) -> int:
        return len(self.mu)

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """Both rate vectors zero-padded to length max(n, m)."""
        size = max(self.n, self.m)
        lam = np.zeros(size)
        mu = np.zeros(size)
        lam[: self.n] = self.lam
        mu[: self.m] = self.mu
        return lam, mu


@dataclass(frozen=True)
class SlackReport:
    feasible: bool
    eta: Optional[float]
    violating_prefix: Optional[int]


def _leading_ones(xs: Sequence[float]) -> int:
    k = 0
    while k < len(xs) and xs[k] == 1.0:
        k += 1
    return k


def preprocess(spec: SystemSpec) -> SystemSpec:
    """Drop the longest equal-length prefix of 1's shared by ``lam`` and ``mu``.

    A rate-1 queue matched to a rate-1 server is served every step, so such pairs
    never affect stability and are removed before the feasibility comparison.
    """
    k = min(_leading_ones(spec.lam), _leading_ones(spec.mu))
    if k == 0:
        return spec
    lam, mu = spec.lam[k:], spec.mu[k:]
    if not lam or not mu:
        raise DegenerateSystem(
            f"removing {k} matched rate-1 pairs leaves an empty system"
        )
    if not any(lam) and not any(mu):
        raise DegenerateSystem("both rate vectors are zero after prefix removal")
    return SystemSpec(lam, mu, spec.lam_order[k:], spec.mu_order[k:])


def prefix_margins(spec: SystemSpec) -> np.ndarray:
    """Prefix sums of ``mu`` minus prefix sums of ``lam`` over the padded length."""
    lam, mu = spec.padded()
    return np.cumsum(mu) - np.cumsum(lam)


def feasibility_status(spec: SystemSpec) -> str:
    """'feasible', 'boundary' (some prefix ties exactly) or 'infeasible'."""
    lam, mu = spec.padded()
    lam_sums = np.cumsum(lam)
    mu_sums = np.cumsum(mu)
    if np.all(mu_sums > lam_sums):
        return "feasible"
    if np.all(mu_sums >= lam_sums):
        return "boundary"
    return "infeasible"


def check_feasibility(spec: SystemSpec) -> bool:
    return feasibility_status(spec) == "feasible"


def max_slack(spec: SystemSpec) -> SlackReport:
    """Largest eta with (1 - eta)/2 * prefix(mu) >= prefix(lam) for every prefix.

    Prefixes run over the queues; ``mu`` is zero-padded when there are more
    queues than servers.
    """
    lam, mu = spec.padded()
    lam_sums = np.cumsum(lam)[: spec.n]
    mu_sums = np.cumsum(mu)[: spec.n]
    etas = []
    violating = None
    for k in range(spec.n):
        if mu_sums[k] <= 0.0:
            value = -np.inf
        else:
            value = 1.0 - 2.0 * float(lam_sums[k]) / float(mu_sums[k])
        if value <= 0.0 and violating is None:
            violating = k + 1
        etas.append(value)
    eta = min(etas)
    if eta < 0.0:
        return SlackReport(feasible=False, eta=None, violating_prefix=violating)
    return SlackReport(feasible=eta > 0.0, eta=float(eta), violating_prefix=violating)


def prefix_surplus(spec: SystemSpec) -> float:
    """Largest amount by which a prefix of arrivals exceeds the matching prefix of service."""
    return float(max(0.0, -prefix_margins(spec).min()))
