"""Centralized scheduling via majorization and Birkhoff-von Neumann decomposition.

A feasible system admits a doubly stochastic matrix ``P`` with ``(P @ mu)_i > lam_i``
for every queue. Decomposing ``P`` into permutation matrices gives a randomized
matching: sample one permutation per step and let each queue send to its
matched server, alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DecompositionFailed, Infeasible, NotDominating
from .model import SystemSpec, check_feasibility, preprocess

ROW_TOL = 1e-9
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class DoublyStochastic:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("doubly stochastic matrix must be square")
        if np.any(a < -SUPPORT_TOL):
            raise ValueError("negative entry")
        if not (np.allclose(a.sum(axis=0), 1.0, atol=ROW_TOL, rtol=0)
                and np.allclose(a.sum(axis=1), 1.0, atol=ROW_TOL, rtol=0)):
            raise ValueError("rows and columns must sum to 1")
        a = np.clip(a, 0.0, None)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class MatchingDistribution:
    """Convex combination of permutations; ``permutations[k][row] = column``."""

    permutations: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.permutations[0]) if self.permutations else 0

    def matrix(self) -> np.ndarray:
        size = self.size
        out = np.zeros((size, size))
        rows = np.arange(size)
        for perm, w in zip(self.permutations, self.weights):
            out[rows, list(perm)] += w
        return out


# -- majorization -----------------------------------------------------------

def _pad(x: Sequence[float], size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: len(x)] = x
    return out


def weakly_dominates(x: Sequence[float], y: Sequence[float], tol: float = 0.0) -> bool:
    size = max(len(x), len(y))
    return bool(np.all(np.cumsum(_pad(x, size)) >= np.cumsum(_pad(y, size)) - tol))


def strictly_dominates(x: Sequence[float], y: Sequence[float]) -> bool:
    size = max(len(x), len(y))
    return bool(np.all(np.cumsum(_pad(x, size)) > np.cumsum(_pad(y, size))))


def majorizes(x: Sequence[float], y: Sequence[float], tol: float = 1e-12) -> bool:
    return weakly_dominates(x, y, tol) and abs(float(np.sum(x)) - float(np.sum(y))) <= tol


def scale_to_majorization(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Shrink ``x`` entrywise until it majorizes ``y``.

    Keeps the head of ``x`` intact and truncates the tail so the total equals
    ``sum(y)``. Each prefix sum becomes ``min(X_k, sum(y))``, which still covers
    the corresponding prefix of ``y``. The result is sorted and has length
    ``max(len(x), len(y))``.
    """
    size = max(len(x), len(y))
    xs = _pad(x, size)
    ys = _pad(y, size)
    if np.any(np.diff(xs) > 0) or np.any(np.diff(ys) > 0):
        raise ValueError("inputs must be sorted non-increasing")
    x_sums = np.cumsum(xs)
    y_sums = np.cumsum(ys)
    bad = np.flatnonzero(x_sums < y_sums)
    if bad.size:
        raise NotDominating(f"prefix k={bad[0] + 1} fails: {x_sums[bad[0]]} < {y_sums[bad[0]]}")
    capped = np.minimum(x_sums, y_sums[-1])
    out = np.diff(capped, prepend=0.0)
    return np.clip(out, 0.0, xs)


def t_transform_matrix(x: Sequence[float], y: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    """Doubly stochastic ``P`` with ``P @ x == y`` when ``x`` majorizes ``y``.

    Built as a product of at most ``L - 1`` T-transforms (Robin Hood transfers
    between one coordinate above its target and the next one below it).
    """
    cur = np.asarray(x, dtype=float).copy()
    target = np.asarray(y, dtype=float)
    size = cur.size
    if not majorizes(cur, target, tol=1e-9):
        raise NotDominating("x does not majorize y")
    p = np.eye(size)
    for _ in range(2 * size):
        over = np.flatnonzero(cur - target > tol)
        if over.size == 0:
            break
        j = over[-1]
        under = np.flatnonzero(target[j + 1:] - cur[j + 1:] > tol)
        if under.size == 0:
            break
        k = j + 1 + under[0]
        shift = min(cur[j] - target[j], target[k] - cur[k])
        gap = cur[j] - cur[k]
        a = shift / gap
        t = np.eye(size)
        t[j, j] = t[k, k] = 1.0 - a
        t[j, k] = t[k, j] = a
        cur = t @ cur
        p = t @ p
    if not np.allclose(p @ np.asarray(x, dtype=float), target, atol=1e-9, rtol=0):
        raise NotDominating("T-transform construction did not reach the target")
    return p


# -- Birkhoff-von Neumann ----------------------------------------------------

def _perfect_matching(support: np.ndarray) -> Optional[list[int]]:
    """Row -> column perfect matching on a boolean support, or None (Kuhn's algorithm)."""
    size = support.shape[0]
    adj = [np.flatnonzero(support[r]).tolist() for r in range(size)]
    match_col = [-1] * size

    def augment(root: int) -> bool:
        # iterative DFS; chosen[d] is the column taken by stack[d]
        seen = [False] * size
        stack = [root]
        iters = [iter(adj[root])]
        chosen: list[int] = []
        while stack:
            pushed = False
            for c in iters[-1]:
                if seen[c]:
                    continue
                seen[c] = True
                chosen.append(c)
                if match_col[c] == -1:
                    for r, col in zip(stack, chosen):
                        match_col[col] = r
                    return True
                stack.append(match_col[c])
                iters.append(iter(adj[match_col[c]]))
                pushed = True
                break
            if not pushed:
                stack.pop()
                iters.pop()
                if chosen:
                    chosen.pop()
        return False

    for r in range(size):
        if not augment(r):
            return None
    match_row = [-1] * size
    for c, r in enumerate(match_col):
        match_row[r] = c
    return match_row


def birkhoff_decompose(p: DoublyStochastic, tol: float = SUPPORT_TOL) -> MatchingDistribution:
    """Greedy peeling: repeatedly remove the largest multiple of a supported permutation."""
    residual = np.array(p.entries, dtype=float)
    size = residual.shape[0]
    rows = np.arange(size)
    perms: list[tuple[int, ...]] = []
    weights: list[float] = []
    while residual.max() > tol:
        match = _perfect_matching(residual > tol)
        if match is None:
            if residual.sum() <= 1e-9:
                break
            raise DecompositionFailed(
                f"no perfect matching on residual with mass {residual.sum():.3e}"
            )
        cols = np.asarray(match)
        w = float(residual[rows, cols].min())
        residual[rows, cols] -= w
        residual[residual <= tol] = 0.0
        perms.append(tuple(match))
        weights.append(w)
    return MatchingDistribution(tuple(perms), tuple(weights))


# -- scheduler ---------------------------------------------------------------

def _reduced_scheduler(spec: SystemSpec) -> MatchingDistribution:
    lam, mu = spec.padded()
    mu_sums = np.cumsum(mu)
    lam_sums = np.cumsum(lam)
    # shrink mu by a common factor that keeps dominance, so every queue with
    # positive arrivals ends up with strictly more service than it needs
    ratio = float(np.max(lam_sums / mu_sums))
    theta = 0.5 * (1.0 + ratio)
    shrunk = scale_to_majorization(theta * mu, lam)
    p = t_transform_matrix(shrunk, lam)
    p = np.clip(p, 0.0, None)
    return birkhoff_decompose(DoublyStochastic(p))


def build_central_scheduler(spec: SystemSpec) -> MatchingDistribution:
    """Randomized matching whose queue->server marginals ``P`` satisfy ``P @ mu > lam``.

    Queues and servers are indexed in the system's sorted order; indices
    ``>= n`` (rows) or ``>= m`` (columns) are zero-rate padding and a queue matched
    to a padding server idles. Rate-1 queue/server pairs stripped by
    :func:`preprocess` are matched to each other permanently.
    """
    reduced = preprocess(spec)
    if not check_feasibility(reduced):
        raise Infeasible("system is not centrally feasible")
    k = spec.n - reduced.n
    inner = _reduced_scheduler(reduced)
    if k == 0:
        return inner
    size = k + inner.size
    lifted = []
    for perm in inner.permutations:
        lifted.append(tuple(range(k)) + tuple(k + c for c in perm))
    assert size == len(lifted[0])
    return MatchingDistribution(tuple(lifted), inner.weights)


def service_probabilities(dist: MatchingDistribution, spec: SystemSpec) -> np.ndarray:
    """Per-queue probability of being served when sending under ``dist``."""
    size = dist.size
    mu = np.zeros(size)
    mu[: spec.m] = spec.mu
    return (dist.matrix() @ mu)[: spec.n]


def sample_matching(dist: MatchingDistribution, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one permutation with probability equal to its weight (one uniform per call)."""
    u = rng.random() * sum(dist.weights)
    acc = 0.0
    for perm, w in zip(dist.permutations, dist.weights):
        acc += w
        if u < acc:
            return perm
    return dist.permutations[-1]
