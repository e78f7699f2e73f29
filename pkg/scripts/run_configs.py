"""Run every config in configs/ (or the ones named) through the CLI.

Usage: python3 scripts/run_configs.py [--out DIR] [--threads N] [name ...]

Config ``goe`` and ``rademacher_tail`` map to the ``tail`` subcommand; every
other file name is its own subcommand. Prints one summary line per run and
exits with the worst exit code seen.
"""
import argparse
import json
from pathlib import Path

from rmtlab import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ALIASES = {"goe": "tail", "rademacher_tail": "tail"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*")
    ap.add_argument("--out", default="runs")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    paths = [CONFIGS / f"{n}.toml" for n in args.names] or sorted(CONFIGS.glob("*.toml"))
    worst = 0
    for path in paths:
        sub = ALIASES.get(path.stem, path.stem)
        argv = [sub, "--config", str(path), "--out", args.out]
        if args.threads:
            argv += ["--threads", str(args.threads)]
        code = cli.main(argv)
        worst = max(worst, code)
        print(f"{path.name:24s} -> {sub:10s} exit {code}")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
