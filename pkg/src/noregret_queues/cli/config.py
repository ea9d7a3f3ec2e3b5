"""Scenario files: TOML parsing, schema validation and policy construction.

A scenario is a TOML document with ``schema_version = 1``. The grammar is the
JSON schema shipped next to this module (``schema.json``); the README walks
through every key. Rates are given in any order and sorted on load, so server
and queue indices in ``policy.servers`` refer to the sorted order (0 is the
fastest server, the highest-rate queue).
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import jsonschema

from ..errors import ConfigInvalid
from ..model import SystemSpec, max_slack

SCHEMA_VERSION = 1


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text())


def impossibility_spec(n: int, c: float = 0.75) -> tuple[SystemSpec, int]:
    """n = r**3 queues and servers; one fast queue and server, the rest slow.

    lam = (2/r, 1/r**2, ...), mu = (1/2, c/r, ...). ``c`` must satisfy
    1/(r+2) < c/r < 1/r. Returns the spec and r.
    """
    r = round(n ** (1.0 / 3.0))
    if r ** 3 != n or r < 2:
        raise ConfigInvalid("spec.n", f"impossibility family needs a perfect cube >= 8, got {n}")
    if not (1.0 / (r + 2) < c / r < 1.0 / r):
        raise ConfigInvalid("spec.c", f"need 1/(r+2) < c/r < 1/r with r={r}, got c={c}")
    lam = [2.0 / r] + [1.0 / r ** 2] * (n - 1)
    mu = [0.5] + [c / r] * (n - 1)
    return SystemSpec(tuple(lam), tuple(mu)), r


def tightness_spec(n: int) -> SystemSpec:
    """n queues at rate (n+1)/n**2; one rate-1 server and n-1 at rate (n-1)/n**2."""
    if n < 2:
        raise ConfigInvalid("spec.n", "tightness family needs n >= 2")
    lam = [(n + 1) / n ** 2] * n
    mu = [1.0] + [(n - 1) / n ** 2] * (n - 1)
    return SystemSpec(tuple(lam), tuple(mu))


@dataclass
class PolicyConfig:
    kind: str
    strategy: Optional[str] = None
    servers: Optional[list[int]] = None
    window: Union[int, str, None] = None
    eta: Optional[float] = None
    delta: float = 0.05
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    freeze: bool = True
    n_root: Optional[int] = None


@dataclass
class AuditConfig:
    windows: str = "none"
    length: Optional[int] = None
    tail: int = 20
    nash_steps: int = 0
    potential_window: Optional[int] = None


@dataclass
class ScenarioConfig:
    name: str
    model: str
    spec: SystemSpec
    policy: PolicyConfig
    horizon: int
    seed_count: int = 1
    base_seed: int = 0
    series: list[str] = field(default_factory=lambda: ["total_q", "total_age"])
    checkpoints: Union[str, list[int]] = "log"
    audit: AuditConfig = field(default_factory=AuditConfig)
    out_dir: str = "runs"
    write_traces: bool = True
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def seeds(self) -> list[int]:
        return list(range(self.base_seed, self.base_seed + self.seed_count))


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate_document(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        # the deepest error is usually the most specific one
        err = max(errors, key=lambda e: len(e.absolute_path))
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ConfigInvalid(_path(err), err.message)


def _build_spec(section: dict) -> tuple[SystemSpec, Optional[int]]:
    if "family" in section:
        if section["family"] == "impossibility":
            return impossibility_spec(section["n"], section.get("c", 0.75))
        return tightness_spec(section["n"]), None
    return SystemSpec(tuple(section["lambda"]), tuple(section["mu"])), None


def config_from_dict(doc: dict, origin: str = "<dict>") -> ScenarioConfig:
    """Validate a parsed document and resolve it into a :class:`ScenarioConfig`."""
    validate_document(doc)
    spec, n_root = _build_spec(doc["spec"])
    pol = dict(doc["policy"])
    policy = PolicyConfig(**pol)
    if policy.kind == "nash_coordinator" and policy.n_root is None:
        policy.n_root = n_root if n_root is not None else max(2, round(spec.n ** (1.0 / 3.0)))
    audit = AuditConfig(**doc.get("audit", {}))
    seeds = doc.get("seeds", {})
    out = doc.get("output", {})
    cfg = ScenarioConfig(
        name=doc.get("name", Path(origin).stem),
        model=doc["model"],
        spec=spec,
        policy=policy,
        horizon=doc["horizon"],
        seed_count=seeds.get("count", 1),
        base_seed=seeds.get("base", 0),
        series=list(doc.get("series", ["total_q", "total_age"])),
        checkpoints=doc.get("checkpoints", "log"),
        audit=audit,
        out_dir=out.get("dir", str(Path("runs") / doc.get("name", Path(origin).stem))),
        write_traces=out.get("traces", True),
        description=doc.get("description", ""),
        raw=copy.deepcopy(doc),
    )
    check_semantics(cfg)
    return cfg


def check_semantics(cfg: ScenarioConfig) -> None:
    """Cross-field rules the schema cannot express."""
    p = cfg.policy
    n, m = cfg.spec.n, cfg.spec.m
    if p.kind == "nash_coordinator" and cfg.model != "no_priority":
        raise ConfigInvalid("model", "nash_coordinator only runs under the no_priority model")
    if p.kind == "independent":
        if p.strategy is None:
            raise ConfigInvalid("policy.strategy", "independent policies need a strategy")
        if p.strategy == "fixed":
            if p.servers is None or len(p.servers) != n:
                raise ConfigInvalid("policy.servers", f"fixed strategy needs one server per queue ({n})")
            for k, j in enumerate(p.servers):
                if j >= m:
                    raise ConfigInvalid(f"policy.servers.{k}", f"server {j} out of range, only {m} servers")
        if p.strategy == "exp3p" and p.window is None:
            raise ConfigInvalid("policy.window", "exp3p needs a window (integer or \"auto\")")
    elif p.strategy is not None:
        raise ConfigInvalid("policy.strategy", f"{p.kind} policies choose for every queue; drop the strategy")
    if p.window == "auto":
        eta = p.eta if p.eta is not None else max_slack(cfg.spec).eta
        if not eta:
            raise ConfigInvalid("policy.window", "auto window needs positive slack (set policy.eta)")
    for k, name in enumerate(cfg.series):
        kind, _, idx = name.partition(":")
        if idx and int(idx) >= n:
            raise ConfigInvalid(f"series.{k}", f"queue {idx} out of range, only {n} queues")
    if isinstance(cfg.checkpoints, list) and max(cfg.checkpoints) > cfg.horizon:
        raise ConfigInvalid("checkpoints", "checkpoint beyond the horizon")
    a = cfg.audit
    if a.windows != "none" and cfg.model == "coupled":
        raise ConfigInvalid("audit.windows", "regret audit is not available for the coupled model")
    if a.windows == "fixed" and a.length is None and not isinstance(p.window, int):
        raise ConfigInvalid("audit.length", "fixed audit windows need a length")
    if a.nash_steps and cfg.model != "no_priority":
        raise ConfigInvalid("audit.nash_steps", "the equilibrium audit applies to the no_priority model")
    if a.nash_steps > cfg.horizon:
        raise ConfigInvalid("audit.nash_steps", "more audited steps than the horizon")


def load_config(path: Union[str, Path], overrides: Optional[dict[str, Any]] = None) -> ScenarioConfig:
    """Read a scenario file. ``overrides`` maps dotted keys (``seeds.count``) to values."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid("<file>", f"{path}: {exc}") from None
    for key, value in (overrides or {}).items():
        node = doc
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return config_from_dict(doc, str(path))


def scenario_dir():
    return resources.files(__package__).joinpath("scenarios")


def list_scenarios() -> dict[str, str]:
    """Canned scenario name -> one-line description."""
    out = {}
    for entry in sorted(scenario_dir().iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".toml"):
            doc = tomllib.loads(entry.read_text())
            out[entry.name[:-5]] = doc.get("description", "")
    return out


def resolve_config_path(name_or_path: str) -> Path:
    """A file path, or the name of a canned scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    entry = scenario_dir().joinpath(f"{name_or_path}.toml")
    if entry.is_file():
        return Path(str(entry))
    raise ConfigInvalid("<file>", f"no such file or canned scenario: {name_or_path}")


def window_length(cfg: ScenarioConfig) -> Optional[int]:
    """The learners' window, resolving "auto" through the window calculator."""
    from ..params import compute_window

    w = cfg.policy.window
    if w == "auto":
        return compute_window(cfg.spec, cfg.policy.eta).w
    return w
