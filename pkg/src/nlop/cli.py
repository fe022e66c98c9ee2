"""Command line driver: ``nlop list`` and ``nlop <scenario>... [--config F] [--out DIR] [--seed N] [--jobs K]``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, load_config, parse_config
from .experiments import SCENARIOS, default_out_root, run_scenario

USAGE = """usage: nlop list
       nlop <scenario> [<scenario> ...] [--config FILE] [--out DIR] [--seed N] [--jobs K]
       nlop all [--config FILE] [--out DIR] [--seed N] [--jobs K]"""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlop", usage=USAGE, description="Nonlocal one-phase free boundary experiments.")
    p.add_argument("scenarios", nargs="+", help="scenario names, 'all', or 'list'")
    p.add_argument("--config", type=Path, default=None, help="configuration file (INI grammar, see README)")
    p.add_argument("--out", type=Path, default=None, help="output root (default: $NLOP_OUT or ./nlop-out)")
    p.add_argument("--seed", type=int, default=0, help="seed of the Philox generator (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="run independent scenarios in K processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _run_one(args) -> tuple[str, int, str]:
    name, cfg_path, out, seed, strict = args
    cfg = load_config(cfg_path) if cfg_path is not None else parse_config("")
    code, path = run_scenario(name, cfg, out, seed, strict_keys=strict)
    return name, code, str(path)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print(USAGE, file=sys.stderr)
        return 2
    if argv[0] == "list":
        width = max(len(n) for n in SCENARIOS)
        for name, sc in SCENARIOS.items():
            print(f"{name:<{width}}  {sc.summary}")
        return 0
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    names = list(SCENARIOS) if args.scenarios == ["all"] else args.scenarios
    unknown = [n for n in names if n not in SCENARIOS]
    if unknown:
        print(f"nlop: unknown scenario {unknown[0]!r}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        print("scenarios: " + ", ".join(SCENARIOS), file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("nlop: --jobs must be positive", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else default_out_root()
    strict = len(names) == 1
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            known = {}
            for n in names:
                for sec, keys in SCENARIOS[n].schema().items():
                    known.setdefault(sec, set()).update(keys)
            cfg.check_known(known)
        jobs = [(n, args.config, out, args.seed, strict) for n in names]
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = [_run_one(j) for j in jobs]
    except ConfigError as exc:
        print(f"nlop: {exc}", file=sys.stderr)
        return 2
    status = 0
    for name, code, path in results:
        print(f"{name}: {'PASS' if code == 0 else 'FAIL'}  ({path}/summary.json)")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
