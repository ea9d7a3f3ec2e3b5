"""Window-length recipe for learning queues: delta, epsilon and the minimal window w."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import NoFiniteWindow
from .model import SystemSpec, max_slack

WINDOW_CAP = 2 ** 30

# regret_form(w, m, gamma) -> regret bound for a window of length w
RegretForm = Callable[[int, int, float], float]


def exp3p_regret(w: int, m: int, gamma: float) -> float:
    """sqrt(w * ln(m * w / gamma)), the EXP3.P high-probability shape."""
    return math.sqrt(w * math.log(m * w / gamma))


@dataclass(frozen=True)
class WindowParams:
    eta: float
    delta: float
    epsilon: float
    epsilon_i: tuple[float, ...]
    w: int
    regret_budget: float
    n: int
    m: int
    mu1: float

    def checks(self, regret_form: RegretForm = exp3p_regret) -> dict[str, tuple[float, float]]:
        """(lhs, rhs) of each requirement, evaluated at ``w``; each must satisfy lhs <= rhs."""
        return window_checks(self.n, self.m, self.mu1, self.eta, self.w, regret_form)

    def report(self) -> str:
        lines = [
            f"n = {self.n}, m = {self.m}, mu_1 = {self.mu1:g}",
            f"eta       = {self.eta:g}",
            f"delta     = eta / 8 = {self.delta:g}",
            f"epsilon   = delta * mu_1 / (4n) = {self.epsilon:g}",
            "epsilon_i = " + ", ".join(f"{e:g}" for e in self.epsilon_i),
            f"w         = {self.w} (2^{self.w.bit_length() - 1})",
            f"regret budget per queue = {self.regret_budget:.6g}",
        ]
        for name, (lhs, rhs) in self.checks().items():
            lines.append(f"{name:<14} {lhs:.6g} <= {rhs:.6g}  {'ok' if lhs <= rhs else 'FAIL'}")
        return "\n".join(lines)


def window_checks(n: int, m: int, mu1: float, eta: float, w: int,
                  regret_form: RegretForm = exp3p_regret) -> dict[str, tuple[float, float]]:
    delta = eta / 8.0
    eps = delta * mu1 / (4.0 * n)
    budget = regret_form(w, m, eta / (128.0 * n))
    return {
        "regret": (n * budget + n, w * delta * mu1 / 4.0),
        "geometric": (6.0 * n * math.exp(-eps * eps * w / 36.0), eta / 128.0),
        "bernoulli": (m * math.exp(-delta * delta * w * mu1 / 2.0), eta / 128.0),
    }


def _passes(n, m, mu1, eta, w, regret_form) -> bool:
    return all(lhs <= rhs for lhs, rhs in window_checks(n, m, mu1, eta, w, regret_form).values())


def compute_window(
    spec: SystemSpec,
    eta: Optional[float] = None,
    regret_form: RegretForm = exp3p_regret,
    cap: int = WINDOW_CAP,
) -> WindowParams:
    """Smallest power-of-two window meeting the regret and concentration requirements.

    ``eta`` defaults to the system's maximal slack. Each check is monotone in w
    beyond small w, so doubling from 1 finds the smallest passing power. Raises
    :class:`NoFiniteWindow` when no power of two up to ``cap`` works.
    """
    if eta is None:
        eta = max_slack(spec).eta
        if eta is None:
            raise NoFiniteWindow("spec has no positive slack", cap)
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    n, m = spec.n, spec.m
    mu1 = float(spec.mu[0])
    if mu1 <= 0.0:
        raise NoFiniteWindow("fastest server has rate 0", cap)
    top = cap.bit_length() - 1
    hi = 0
    while not _passes(n, m, mu1, eta, 1 << hi, regret_form):
        hi += 1
        if hi > top:
            raise NoFiniteWindow(f"no window up to {cap} satisfies the requirements for eta={eta}", cap)
    w = 1 << hi
    delta = eta / 8.0
    eps = delta * mu1 / (4.0 * n)
    params = WindowParams(
        eta=eta,
        delta=delta,
        epsilon=eps,
        epsilon_i=tuple(eps / float(l) for l in spec.lam),
        w=w,
        regret_budget=regret_form(w, m, eta / (128.0 * n)),
        n=n,
        m=m,
        mu1=mu1,
    )
    for name, (lhs, rhs) in params.checks(regret_form).items():
        assert lhs <= rhs, f"{name} requirement fails at w={w}"
    return params
