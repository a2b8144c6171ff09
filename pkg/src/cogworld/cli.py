"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

COMMANDS = {
    "generate": ex.run_generate,
    "observe": ex.run_observe,
    "fig2": ex.run_fig2,
    "hallucinate": ex.run_hallucination,
    "esn": ex.run_esn,
    "control": ex.run_control,
}


def _global_flags(episodes: bool = True) -> argparse.ArgumentParser:
    # SUPPRESS keeps a subparser from resetting flags given before the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global")
    g.add_argument("--config", type=Path, help="JSON config file")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--workers", type=int)
    g.add_argument("--out", type=Path, help="output directory (default: current)")
    if episodes:
        g.add_argument("--episodes", type=int, help="evaluation episodes per context size")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _global_flags()
    parser = argparse.ArgumentParser(prog="cogworld", description=__doc__, parents=[parent])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[parent], help="sample episodes and export them")
    p.add_argument("--episodes-out", type=Path)

    p = sub.add_parser("observe", parents=[parent], help="run observers and export beliefs and metrics")
    p.add_argument("--beliefs-out", type=Path)
    p.add_argument("--metrics-out", type=Path)

    sub.add_parser("fig2", parents=[parent], help="accuracy and regret sweep over context sizes")
    sub.add_parser("hallucinate", parents=[parent], help="hit-probability histograms")

    p = sub.add_parser("esn", parents=[parent], help="Echo State observer benchmark")
    p.add_argument("--n-hidden", type=int)
    p.add_argument("--spectral-radius", type=float)
    p.add_argument("--ridge", type=float)
    p.add_argument("--train-episodes", type=int)
    p.add_argument("--test-episodes", type=int)

    p = sub.add_parser(
        "control", parents=[_global_flags(episodes=False)],
        help="actor-critic controller on preference landscapes",
    )
    p.add_argument("--condition", choices=("online", "offline-oracle"), action="append")
    p.add_argument("--omega-seed", type=int, nargs="+")
    p.add_argument("--episodes", dest="control_episodes", type=int, help="training episodes per run")
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--beta-decay", type=float)
    return parser


def _set(d: dict, key: str, value) -> None:
    if value is not None:
        d[key] = value


def resolve_config(args: argparse.Namespace) -> ex.ExperimentConfig:
    """Merge the config file with command-line overrides and validate."""
    doc: dict = {}
    if getattr(args, "config", None) is not None:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ex.ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ex.ConfigError(f"{args.config}: top level must be an object")
    for key in ("seed", "workers", "episodes"):
        _set(doc, key, getattr(args, key, None))
    outputs = dict(doc.get("outputs", {}))
    for flag, key in (("episodes_out", "episodes"), ("beliefs_out", "beliefs"), ("metrics_out", "metrics")):
        val = getattr(args, flag, None)
        if val is not None:
            outputs[key] = str(val)
    if outputs:
        doc["outputs"] = outputs
    if args.command == "esn":
        esn = dict(doc.get("esn", {}))
        for flag in ("n_hidden", "spectral_radius", "ridge", "train_episodes", "test_episodes"):
            _set(esn, flag, getattr(args, flag))
        doc["esn"] = esn
    if args.command == "control":
        ctl = dict(doc.get("control", {}))
        _set(ctl, "conditions", args.condition)
        _set(ctl, "omega_seeds", args.omega_seed)
        _set(ctl, "episodes", args.control_episodes)
        for flag in ("batch", "lr", "beta", "beta_decay"):
            _set(ctl, flag, getattr(args, flag))
        doc["control"] = ctl
    return ex.ExperimentConfig.from_dict(doc)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        config = resolve_config(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        paths = COMMANDS[args.command](config, getattr(args, "out", Path(".")))
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
