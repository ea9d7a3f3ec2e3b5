"""Command-line entry point: ``noregret-queues run|params|list-scenarios|verify``."""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from ..errors import ConfigInvalid, NoFiniteWindow
from ..model import max_slack
from ..params import compute_window
from .config import list_scenarios, load_config, resolve_config_path
from .run import run_scenario
from .verify import run_checks


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "seeds", None) is not None:
        out["seeds.count"] = args.seeds
    if getattr(args, "horizon", None) is not None:
        out["horizon"] = args.horizon
    if getattr(args, "out", None) is not None:
        out["output.dir"] = args.out
    return out


def cmd_run(args) -> int:
    cfg = load_config(resolve_config_path(args.config), _overrides(args))
    summary = run_scenario(cfg, jobs=args.jobs)
    for series, rep in summary["stability"].items():
        line = f"{series}: {rep['classification']} (exponent {rep['exponent']:.3f}, slope {rep['slope']:.4g})"
        if "note" in rep:
            line += f" [{rep['note']}]"
        print(line)
    if summary.get("regret"):
        r = summary["regret"]
        print(f"regret: median {r['regret_q50']:g}, max {r['regret_max']:g}, "
              f"zero-regret tail fraction {r['tail_zero_regret_fraction']}")
    if "nash" in summary:
        print(f"equilibrium audit: {summary['nash']['steps_with_violations']} of "
              f"{summary['nash']['steps_audited']} steps with a violation")
    print(f"wrote {cfg.out_dir}")
    return 0


def cmd_params(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    eta = args.eta if args.eta is not None else cfg.policy.eta
    if eta is None:
        eta = max_slack(cfg.spec).eta
    if not eta:
        print("spec has no positive slack; pass --eta", file=sys.stderr)
        return 1
    params = compute_window(cfg.spec, eta)
    print(params.report())
    return 0


def cmd_list(args) -> int:
    for name, desc in list_scenarios().items():
        print(f"{name:<24} {desc}")
    return 0


def cmd_verify(args) -> int:
    return 0 if run_checks(args.seed) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noregret-queues",
        description="Simulate queues that pick servers with no-regret learners.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run a scenario file or canned scenario")
    run.add_argument("config", help="path to a scenario TOML, or a canned scenario name")
    run.add_argument("--seeds", type=int, help="number of seeds (overrides seeds.count)")
    run.add_argument("--horizon", type=int, help="steps per run (overrides horizon)")
    run.add_argument("--out", help="output directory (overrides output.dir)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    run.set_defaults(func=cmd_run)

    params = sub.add_parser("params", help="print the window-length report for a scenario")
    params.add_argument("config")
    params.add_argument("--eta", type=float, help="slack to use (default: policy.eta or the maximal slack)")
    params.set_defaults(func=cmd_params)

    lst = sub.add_parser("list-scenarios", help="list canned scenarios")
    lst.set_defaults(func=cmd_list)

    ver = sub.add_parser("verify", help="run quick self-checks on tiny instances")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"invalid config at {exc.path}: {exc}", file=sys.stderr)
        return 2
    except NoFiniteWindow as exc:
        print(f"no finite window (cap {exc.cap}): {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
