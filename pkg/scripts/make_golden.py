"""Regenerate the golden CSV files used by the CLI schema tests.

Usage: python3 scripts/make_golden.py [subcommand ...]

Each subcommand runs on its small config in tests/golden/configs/ and the CSV
outputs are copied to tests/golden/<subcommand>/. Only rerun after an
intentional schema or numerics change.
"""
import shutil
import sys
import tempfile
from pathlib import Path

from rmtlab import cli

ROOT = Path(__file__).resolve().parents[1] / "tests" / "golden"


def main(subs):
    for sub in subs or cli.SUBCOMMANDS:
        with tempfile.TemporaryDirectory() as tmp:
            code = cli.main([sub, "--config", str(ROOT / "configs" / f"{sub}.json"),
                             "--out", tmp, "--threads", "1"])
            if code not in (0, 2):
                raise SystemExit(f"{sub}: exit {code}")
            run_dir = next(Path(tmp).iterdir())
            dest = ROOT / sub
            shutil.rmtree(dest, ignore_errors=True)
            dest.mkdir(parents=True)
            for f in sorted(run_dir.glob("*.csv")):
                shutil.copy(f, dest / f.name)
            print(f"{sub}: exit {code}, {len(list(dest.iterdir()))} file(s)")


if __name__ == "__main__":
    main(sys.argv[1:])
