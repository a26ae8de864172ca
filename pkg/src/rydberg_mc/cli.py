"""Command-line entry point.

    rydberg-mc simulate <config-file | preset> [--seed N] [--realizations N] [--out PATH] [--threads N]
    rydberg-mc presets list
    rydberg-mc presets show <name>

Exit codes: 0 ok, 1 config error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import yaml

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, parse_config, preset_names, preset_text
from .engine import run
from .output import format_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("rydberg_mc")


class _Parser(argparse.ArgumentParser):
    # bad command lines count as config errors, not argparse's default exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rydberg-mc", description="Monte Carlo simulation of Foerster resonance and dipole blockade among few Rydberg atoms")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a config file or a named preset")
    sim.add_argument("config", help="YAML config, a CSV written by this tool, or a preset name")
    sim.add_argument("--seed", type=int, help="master seed (overrides the config)")
    sim.add_argument("--realizations", type=int, help="realization count (overrides the config)")
    sim.add_argument("--out", help="output CSV path; '-' for stdout (default: config output or stdout)")
    sim.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads (default: all cores)")
    sim.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")

    pre = sub.add_parser("presets", help="list or show the figure presets")
    psub = pre.add_subparsers(dest="action", required=True)
    psub.add_parser("list", help="names and descriptions")
    show = psub.add_parser("show", help="print a preset with all defaults resolved")
    show.add_argument("name")
    show.add_argument("--raw", action="store_true", help="print the preset file as stored")
    return ap


def _override(config: ExperimentConfig, seed, realizations) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if realizations is not None:
        changes["realizations"] = realizations
    if not changes:
        return config
    if changes.get("seed", 0) < 0:
        raise ConfigError(f"--seed must be >= 0, got {seed}")
    try:
        plan = dataclasses.replace(config.plan, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return dataclasses.replace(config, plan=plan)


def _simulate(args) -> int:
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    config = _override(load_config(args.config), args.seed, args.realizations)
    out = args.out if args.out is not None else config.output
    p = config.plan
    log.info(
        "%s: N=%d, %s, %d realizations, seed %d, %d threads",
        p.experiment, p.geometry.atom_count, p.geometry.kind, p.realizations, p.seed, args.threads,
    )
    result = run(p, threads=args.threads)
    text = format_csv(result, config)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc.strerror}", file=sys.stderr)
            return EXIT_RUNTIME
        log.info("wrote %s (%.1fs)", out, result.metadata["wall_time_s"])
    return EXIT_OK


def _presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            cfg = parse_config(preset_text(name), f"preset {name}")
            print(f"{name:24s} {cfg.description}")
        return EXIT_OK
    text = preset_text(args.name)
    if args.raw:
        sys.stdout.write(text)
    else:
        cfg = parse_config(text, f"preset {args.name}")
        sys.stdout.write(yaml.safe_dump(cfg.resolved(), sort_keys=False, default_flow_style=None, width=100))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        code = _simulate(args) if args.command == "simulate" else _presets(args)
        sys.stdout.flush()
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except Exception as exc:  # engine failures carry the realization index
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
