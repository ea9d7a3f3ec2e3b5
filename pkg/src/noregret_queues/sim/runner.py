"""Driving engines with a policy over a horizon and recording what happened."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from ..errors import CouplingBroken, WrongModel
from ..metrics import RegretLedger
from ..model import SystemSpec
from .engines import (
    DualState,
    StandardState,
    StepOutcome,
    step_dual,
    step_no_priority,
    step_standard,
)

MODELS = ("standard", "dual", "no_priority")

TRACE_HEADER = "t,queue,Q,age,server,cleared"


@dataclass
class RegretRow:
    window: int
    start: int
    length: int
    queue: int
    regret: int
    clears: int
    best_fixed: int
    best_server: int


@dataclass
class RunTrace:
    """Per-step record of one run.

    ``q`` and ``age`` have ``horizon + 1`` rows: row ``t`` is the state at the
    start of step ``t`` (before that step's arrivals), the last row the state
    after the final step. ``choice`` uses -1 for "did not send".
    """

    model: str
    seed: int
    spec: SystemSpec
    q: np.ndarray
    age: np.ndarray
    choice: np.ndarray
    cleared: np.ndarray
    regret_rows: list[RegretRow] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.choice.shape[0]

    def total_q(self) -> np.ndarray:
        return self.q.sum(axis=1)

    def total_age(self) -> np.ndarray:
        return self.age.sum(axis=1)

    def series(self, name: str) -> np.ndarray:
        """'total_q', 'total_age', 'q:<i>' or 'age:<i>'."""
        if name == "total_q":
            return self.total_q()
        if name == "total_age":
            return self.total_age()
        kind, _, idx = name.partition(":")
        if kind in ("q", "age") and idx.isdigit():
            return (self.q if kind == "q" else self.age)[:, int(idx)]
        raise ValueError(f"unknown series {name!r}")

    def checkpoint_values(self, name: str, times) -> np.ndarray:
        return self.series(name)[np.asarray(times)]

    def write_csv(self, path) -> None:
        """One row per (step, queue): t, queue, Q, age, server (-1 = none), cleared (0/1).

        Q and age are the values at the start of step t.
        """
        h, n = self.choice.shape
        t = np.repeat(np.arange(h, dtype=np.int64), n)
        queue = np.tile(np.arange(n, dtype=np.int64), h)
        cols = np.column_stack([
            t, queue,
            self.q[:h].reshape(-1), self.age[:h].reshape(-1),
            self.choice.reshape(-1), self.cleared.reshape(-1).astype(np.int64),
        ]).astype(np.int64)
        with open(path, "w", newline="") as fh:
            fh.write(TRACE_HEADER + "\n")
            np.savetxt(fh, cols, fmt="%d", delimiter=",")


def _make_state(model: str, spec: SystemSpec, seed: int, counterfactuals: bool):
    if model == "standard":
        return StandardState(spec, seed, counterfactuals), step_standard
    if model == "no_priority":
        return StandardState(spec, seed, counterfactuals), step_no_priority
    if model == "dual":
        return DualState(spec, seed, counterfactuals), step_dual
    raise ValueError(f"unknown model {model!r}")


def _check_policy_model(policy, model: str) -> None:
    allowed = getattr(policy, "models", None)
    if allowed is not None and model not in allowed:
        raise WrongModel(f"{type(policy).__name__} only runs under {sorted(allowed)}, not {model}")


class _WindowAudit:
    def __init__(self, n: int, m: int, windows: Iterator[tuple[int, int]]):
        self.n, self.m = n, m
        self.windows = windows
        self.rows: list[RegretRow] = []
        self.index = 0
        self._open()

    def _open(self):
        start, length = next(self.windows)
        self.ledger = RegretLedger(self.n, self.m, length, start)

    def record(self, outcome: StepOutcome) -> None:
        led = self.ledger
        led.record(outcome.counterfactual, outcome.choices)
        if led.complete:
            regrets = led.regrets()
            best = led.best_servers()
            for i in range(self.n):
                self.rows.append(RegretRow(
                    self.index, led.start, led.length, i, int(regrets[i]),
                    int(led.realized[i]), int(led.totals[i].max()), int(best[i]),
                ))
            self.index += 1
            self._open()


def simulate(
    spec: SystemSpec,
    policy,
    horizon: int,
    seed: int,
    model: str = "standard",
    windows: Optional[Iterator[tuple[int, int]]] = None,
    on_step: Optional[Callable[[StepOutcome, list[bool]], None]] = None,
) -> RunTrace:
    """Run ``horizon`` steps of one engine.

    ``windows`` (an iterator of (start, length)) turns on counterfactual
    bookkeeping and a per-window regret audit; only completed windows are
    reported. ``on_step`` sees every outcome with the pre-step active mask.
    """
    _check_policy_model(policy, model)
    audit = windows is not None
    state, step = _make_state(model, spec, seed, counterfactuals=audit)
    n = spec.n
    q = np.zeros((horizon + 1, n), dtype=np.int32)
    age = np.zeros((horizon + 1, n), dtype=np.int32)
    choice = np.full((horizon, n), -1, dtype=np.int16 if spec.m < 32000 else np.int32)
    cleared = np.zeros((horizon, n), dtype=bool)
    auditor = _WindowAudit(n, spec.m, windows) if audit else None
    for t in range(horizon):
        ages = state.ages()
        q[t] = state.sizes()
        age[t] = ages
        active = state.active()
        choices = policy.select(t, ages, active)
        out = step(state, choices)
        policy.observe(t, out.choices, out.cleared)
        choice[t] = [-1 if j is None else j for j in choices]
        cleared[t] = out.cleared
        if auditor is not None:
            auditor.record(out)
        if on_step is not None:
            on_step(out, active)
    q[horizon] = state.sizes()
    age[horizon] = state.ages()
    return RunTrace(model, seed, spec, q, age, choice, cleared,
                    auditor.rows if auditor else [])


def run_coupled(spec: SystemSpec, policy, horizon: int, seed: int) -> tuple[RunTrace, RunTrace]:
    """Drive a standard and a dual engine from the same seed and the same policy.

    Both engines read one positional arrival sequence per queue and one coin
    sequence per server; the policy is consulted once per step with the
    standard engine's ages. Raises :class:`CouplingBroken` if the engines ever
    disagree on who may send or who cleared.
    """
    _check_policy_model(policy, "standard")
    std = StandardState(spec, seed)
    dual = DualState(spec, seed)
    n = spec.n
    traces = []
    for _ in range(2):
        traces.append((
            np.zeros((horizon + 1, n), dtype=np.int32),
            np.zeros((horizon + 1, n), dtype=np.int32),
            np.full((horizon, n), -1, dtype=np.int32),
            np.zeros((horizon, n), dtype=bool),
        ))
    for t in range(horizon):
        ages = std.ages()
        active = std.active()
        for st, (q, age, _, _) in zip((std, dual), traces):
            q[t] = st.sizes()
            age[t] = st.ages()
        if dual.active() != active:
            raise CouplingBroken(f"step {t}: active sets differ")
        choices = policy.select(t, ages, active)
        out_s = step_standard(std, choices)
        out_d = step_dual(dual, choices)
        if out_s.cleared != out_d.cleared:
            raise CouplingBroken(f"step {t}: clear outcomes differ")
        policy.observe(t, out_s.choices, out_s.cleared)
        row = [-1 if j is None else j for j in choices]
        for out, (_, _, ch, cl) in zip((out_s, out_d), traces):
            ch[t] = row
            cl[t] = out.cleared
    for st, (q, age, _, _) in zip((std, dual), traces):
        q[horizon] = st.sizes()
        age[horizon] = st.ages()
    (qs, ags, chs, cls), (qd, agd, chd, cld) = traces
    return (RunTrace("standard", seed, spec, qs, ags, chs, cls),
            RunTrace("dual", seed, spec, qd, agd, chd, cld))
