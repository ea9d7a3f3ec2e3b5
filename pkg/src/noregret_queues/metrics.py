"""Regret ledgers, potential functions, weighted norms and the stability classifier."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import IncompleteWindow, InsufficientData

MOMENT_ORDERS = (1, 2, 4)
BOOTSTRAP_RESAMPLES = 200


# -- regret -------------------------------------------------------------------

class RegretLedger:
    """Counterfactual success counts over one window of ``length`` steps.

    ``record`` takes the step's n x m would-have-cleared matrix and the realized
    choices. Regret of queue i is the best fixed server's count minus the count
    along the queue's own choices, on the same sample path.
    """

    def __init__(self, n: int, m: int, length: int, start: int = 0, keep_rows: bool = False):
        self.n = n
        self.m = m
        self.length = length
        self.start = start
        self.steps = 0
        self.totals = np.zeros((n, m), dtype=np.int64)
        self.realized = np.zeros(n, dtype=np.int64)
        self.keep_rows = keep_rows
        self.rows: list[np.ndarray] = []
        self.choices: list[list[Optional[int]]] = []

    @property
    def complete(self) -> bool:
        return self.steps >= self.length

    def record(self, counterfactual: np.ndarray, choices: Sequence[Optional[int]]) -> None:
        cf = np.asarray(counterfactual, dtype=bool)
        self.totals += cf
        for i, j in enumerate(choices):
            if j is not None and cf[i, j]:
                self.realized[i] += 1
        self.steps += 1
        if self.keep_rows:
            self.rows.append(cf.copy())
            self.choices.append(list(choices))

    def _check(self) -> None:
        if not self.complete:
            raise IncompleteWindow(f"window has {self.steps} of {self.length} steps")

    def regret(self, queue: int) -> int:
        self._check()
        return int(self.totals[queue].max() - self.realized[queue])

    def regrets(self) -> np.ndarray:
        self._check()
        return self.totals.max(axis=1) - self.realized

    def best_servers(self) -> np.ndarray:
        return self.totals.argmax(axis=1)


def fixed_windows(length: int) -> Iterator[tuple[int, int]]:
    """(start, length) pairs tiling time with windows of one length."""
    start = 0
    while True:
        yield start, length
        start += length


def square_windows() -> Iterator[tuple[int, int]]:
    """Windows of length 1, 4, 9, ... starting at t = 0."""
    start, k = 0, 1
    while True:
        yield start, k * k
        start += k * k
        k += 1


# -- potentials and norms -----------------------------------------------------

def potential(lam: Sequence[float], ages: Sequence[int], exact: bool = False) -> Union[float, Fraction]:
    """Sum over queues of lam_i * T_i * (T_i - 1) / 2.

    With ``exact=True`` the value is a Fraction computed from the binary values
    of ``lam``.
    """
    if exact:
        return sum((Fraction(l) * (int(t) * (int(t) - 1)) for l, t in zip(lam, ages)), Fraction(0)) / 2
    total = 0.0
    for l, t in zip(lam, ages):
        t = int(t)
        total += l * (t * (t - 1))
    return 0.5 * total


def potential_tau(lam: Sequence[float], ages: Sequence[int], tau: int) -> Fraction:
    """Sum of lam_i * (T_i - tau) over queues with T_i >= tau, exactly."""
    return sum((Fraction(l) * (int(t) - tau) for l, t in zip(lam, ages) if int(t) >= tau), Fraction(0))


def potential_many(lam: Sequence[float], ages: np.ndarray) -> np.ndarray:
    """Potential of each row of an ages matrix."""
    a = np.asarray(ages, dtype=np.float64)
    return 0.5 * (a * (a - 1.0)) @ np.asarray(lam, dtype=np.float64)


def weighted_norms(lam: Sequence[float], x: Sequence[float]) -> tuple[float, float]:
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0):
        raise ValueError("weights must be positive")
    xa = np.abs(np.asarray(x, dtype=float))
    return float(lam_arr @ xa), float(math.sqrt(lam_arr @ (xa * xa)))


@dataclass
class PotentialSeries:
    """Potential sampled every ``window`` steps.

    ``tau[l]`` holds, for the window ending at ``times[l]``, how old each queue's
    oldest packet is relative to that window's start (0 when everything that
    predates the window has been cleared). Row 0 is all zeros.
    """

    window: int
    times: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    tau: np.ndarray

    @classmethod
    def from_ages(cls, lam: Sequence[float], ages: np.ndarray, window: int) -> "PotentialSeries":
        times = np.arange(0, ages.shape[0], window)
        sampled = ages[times]
        phi = potential_many(lam, sampled)
        tau = np.maximum(sampled.astype(np.int64) - window, 0)
        tau[0] = 0
        return cls(window, times, phi, np.sqrt(phi), tau)

    def write_csv(self, path) -> None:
        n = self.tau.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "t", "phi", "z"] + [f"tau_{i}" for i in range(n)])
            for l, t in enumerate(self.times):
                w.writerow([l, int(t), repr(float(self.phi[l])), repr(float(self.z[l]))]
                           + [int(v) for v in self.tau[l]])


# -- stability classification -------------------------------------------------

def log_checkpoints(horizon: int) -> np.ndarray:
    """floor(10 ** (k / 8)) for k = 0, 1, ... up to ``horizon``, plus ``horizon``."""
    pts = set()
    k = 0
    while True:
        t = int(math.floor(10 ** (k / 8)))
        if t > horizon:
            break
        pts.add(t)
        k += 1
    pts.add(int(horizon))
    return np.array(sorted(pts), dtype=np.int64)


@dataclass
class CheckpointSeries:
    """One scalar series per seed, sampled at common checkpoint times."""

    name: str
    times: np.ndarray
    values: np.ndarray  # (seeds, checkpoints)

    @property
    def n_seeds(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return int(self.times[-1])

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)


def _tail(times: np.ndarray) -> slice:
    return slice(len(times) // 2, len(times))


def growth_exponent(times: np.ndarray, mean: np.ndarray) -> float:
    """Least-squares slope of log(mean) on log(t) over the tail half of the checkpoints."""
    sl = _tail(times)
    t = times[sl].astype(float)
    y = mean[sl].astype(float)
    keep = (y > 0) & (t > 0)
    if keep.sum() < 3:
        return 0.0
    slope, _ = np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)
    return float(slope)


def linear_slope(times: np.ndarray, mean: np.ndarray) -> float:
    """Least-squares slope of mean on t over the tail half of the checkpoints."""
    sl = _tail(times)
    t = times[sl].astype(float)
    if len(t) < 2:
        return 0.0
    slope, _ = np.polyfit(t, mean[sl].astype(float), 1)
    return float(slope)


def bootstrap_se(samples: Sequence[float], resamples: int = BOOTSTRAP_RESAMPLES, seed: int = 0) -> float:
    """Bootstrap standard error of the sample mean (resampling seeds with replacement)."""
    rng = np.random.default_rng(seed)
    samples = np.asarray(samples, dtype=float)
    k = samples.shape[0]
    idx = rng.integers(0, k, size=(resamples, k))
    return float(samples[idx].mean(axis=1).std(ddof=1))


def classify_exponent(exponent: float) -> str:
    if exponent < 0.1:
        return "bounded"
    if abs(exponent - 0.5) <= 0.15:
        return "sqrt-growth"
    if abs(exponent - 1.0) <= 0.15:
        return "linear-growth"
    return "inconclusive"


@dataclass
class StabilityReport:
    series: str
    n_seeds: int
    horizon: int
    times: np.ndarray
    mean: np.ndarray
    exponent: float
    slope: float
    classification: str
    moments: dict[int, np.ndarray] = field(default_factory=dict)
    moment_se: dict[int, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "series": self.series,
            "n_seeds": self.n_seeds,
            "horizon": self.horizon,
            "exponent": self.exponent,
            "slope": self.slope,
            "classification": self.classification,
            "final_mean": float(self.mean[-1]),
        }

    def write_csv(self, path) -> None:
        """Columns: t, mean, then m<r> and se<r> for each moment order r."""
        orders = sorted(self.moments)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mean"] + [c for r in orders for c in (f"m{r}", f"se{r}")])
            for k, t in enumerate(self.times):
                row = [int(t), repr(float(self.mean[k]))]
                for r in orders:
                    row += [repr(float(self.moments[r][k])), repr(float(self.moment_se[r][k]))]
                w.writerow(row)


def classify_stability(
    data: Union[CheckpointSeries, Sequence],
    series: str = "total_q",
    min_seeds: int = 30,
    min_horizon: int = 10_000,
    bootstrap: int = BOOTSTRAP_RESAMPLES,
) -> StabilityReport:
    """Fit the growth exponent of the seed-averaged series and classify it.

    ``data`` is either a :class:`CheckpointSeries` or a list of run traces
    (anything with ``checkpoint_values(series, times)`` and ``horizon``).
    """
    if not isinstance(data, CheckpointSeries):
        data = collect_series(data, series)
    if data.n_seeds < min_seeds:
        raise InsufficientData(f"{data.n_seeds} seeds, need {min_seeds}")
    if data.horizon < min_horizon:
        raise InsufficientData(f"horizon {data.horizon}, need {min_horizon}")
    mean = data.mean()
    exponent = growth_exponent(data.times, mean)
    moments: dict[int, np.ndarray] = {}
    ses: dict[int, np.ndarray] = {}
    for r in MOMENT_ORDERS:
        powered = data.values.astype(float) ** r
        moments[r] = powered.mean(axis=0)
        ses[r] = np.array([bootstrap_se(powered[:, k], resamples=bootstrap, seed=k)
                           for k in range(powered.shape[1])])
    return StabilityReport(
        series=data.name,
        n_seeds=data.n_seeds,
        horizon=data.horizon,
        times=data.times,
        mean=mean,
        exponent=exponent,
        slope=linear_slope(data.times, mean),
        classification=classify_exponent(exponent),
        moments=moments,
        moment_se=ses,
    )


def collect_series(traces: Sequence, series: str, times: Optional[np.ndarray] = None) -> CheckpointSeries:
    if not traces:
        raise InsufficientData("no traces")
    horizon = min(tr.horizon for tr in traces)
    if times is None:
        times = log_checkpoints(horizon)
    values = np.stack([tr.checkpoint_values(series, times) for tr in traces])
    return CheckpointSeries(series, times, values)
