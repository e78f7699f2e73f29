"""Command-line front end: ``rmtlab <subcommand> [flags]`` and ``rmtlab resume <manifest>``.

Runs land in ``<out>/<run_id>/`` holding ``manifest.json``, ``report.json``,
plot-ready CSVs (or JSON) and a ``units/`` directory with one document per
completed unit, which is what ``resume`` picks up.

Exit codes: 0 success, 1 usage or config error, 2 invariant violation,
3 run stopped early on request (``--stop-after``).
"""
import argparse
import csv
import datetime as _dt
import json
import os
import shutil
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments as ex

SUBCOMMANDS = tuple(ex.EXPERIMENTS)
EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_STOPPED = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    run_id: str
    subcommand: str
    config_hash: str
    config: dict
    schema_version: int = ex.SCHEMA_VERSION
    format: str = "csv"
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)
    units: dict = field(default_factory=dict)  # key -> pending | done | failed
    status: str = "pending"
    exit_code: int = None
    runtime_s: float = 0.0

    def save(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
            m = cls(**d)
        except (OSError, ValueError, TypeError) as e:
            raise UsageError(f"cannot read manifest {path}: {e}") from e
        if m.status not in ("pending", "done", "failed"):
            raise UsageError(f"manifest {path}: bad status {m.status!r}")
        if any(s not in ("pending", "done", "failed") for s in m.units.values()):
            raise UsageError(f"manifest {path}: bad unit status")
        return m


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# config handling


def load_config_file(path):
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror or e}") from e
    try:
        if p.suffix.lower() == ".json":
            return json.loads(raw)
        return tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise UsageError(f"cannot parse config {path}: {e}") from e


def build_config(sub, file_cfg=None, seed=None, trials=None, n=None):
    """Merge flag > file > default into an :class:`ExperimentConfig`."""
    d = dict(file_cfg or {})
    d.pop("threads", None)
    d.pop("format", None)
    named = d.pop("experiment", sub)
    if named != sub:
        raise UsageError(f"config is for {named!r}, not {sub!r}")
    if seed is not None:
        d["seed"] = seed
    if trials is not None:
        d["trials"] = trials
    if n is not None:
        d["n_list"] = n
    try:
        return ex.ExperimentConfig.from_dict({"experiment": sub, **d})
    except (ValueError, TypeError, KeyError) as e:
        raise UsageError(f"invalid config: {e}") from e


# --------------------------------------------------------------------------
# output


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    if isinstance(x, (dict, list)):
        return json.dumps(x, sort_keys=True)
    if x is None:
        return ""
    return str(x)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_plotdata(report, outdir, fmt="csv"):
    """Per-figure tables plus a JSON sidecar of fitted constants; returns written names."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    written = []
    for fig in d["figures"]:
        if fmt == "csv":
            name = f"{fig['name']}.csv"
            write_csv(outdir / name, fig["columns"], fig["rows"])
        else:
            name = f"{fig['name']}.json"
            (outdir / name).write_text(ex.dumps({"columns": fig["columns"], "rows": fig["rows"]}))
        written.append(name)
    if fmt == "csv":
        cols = []
        for r in d["rows"]:
            cols += [k for k in r if k not in cols]
        write_csv(outdir / "report.csv", cols, [[r.get(c) for c in cols] for r in d["rows"]])
        written.append("report.csv")
    sidecar = {"experiment": d["experiment"], "fitted": d["fitted"], "exclusions": d["exclusions"],
               "violations": d["violations"], "schema_version": d["schema_version"]}
    (outdir / "fitted.json").write_text(ex.dumps(sidecar))
    written.append("fitted.json")
    return written


# --------------------------------------------------------------------------
# execution


def _execute(run_dir, manifest, threads, stop_after=None):
    cfg = ex.ExperimentConfig.from_dict(manifest.config)
    mpath = run_dir / "manifest.json"
    udir = run_dir / "units"
    udir.mkdir(exist_ok=True)
    t0 = time.perf_counter()
    done_now = 0
    for key, status in manifest.units.items():
        if status == "done":
            continue
        if stop_after is not None and done_now >= stop_after:
            manifest.runtime_s += time.perf_counter() - t0
            manifest.save(mpath)
            print(f"stopped after {done_now} unit(s); resume with: rmtlab resume {mpath}",
                  file=sys.stderr)
            return EXIT_STOPPED
        try:
            doc = ex.run_units(cfg, [key], threads)[key]
        except Exception:
            manifest.units[key] = "failed"
            manifest.status = "failed"
            manifest.save(mpath)
            raise
        (udir / f"{key}.json").write_text(ex.dumps(doc))
        manifest.units[key] = "done"
        manifest.save(mpath)
        done_now += 1
    results = {k: json.loads((udir / f"{k}.json").read_text()) for k in manifest.units}
    report = ex.assemble(cfg, results)
    (run_dir / "report.json").write_text(report.to_json())
    manifest.outputs = ["report.json"] + emit_plotdata(report, run_dir, manifest.format)
    manifest.runtime_s += time.perf_counter() - t0
    manifest.finished = _now()
    manifest.status = "done"
    manifest.exit_code = EXIT_VIOLATION if report.violations else EXIT_OK
    manifest.save(mpath)
    for v in report.violations:
        print(f"violation: {v}", file=sys.stderr)
    print(run_dir)
    return manifest.exit_code


def run(sub, config_path=None, seed=None, trials=None, n=None, threads=None, out=None,
        fmt="csv", stop_after=None):
    if sub not in SUBCOMMANDS:
        raise UsageError(f"unknown subcommand {sub!r}; choose from {', '.join(SUBCOMMANDS)}")
    file_cfg = load_config_file(config_path) if config_path else {}
    threads = threads or file_cfg.get("threads") or os.cpu_count() or 1
    fmt = fmt or file_cfg.get("format", "csv")
    cfg = build_config(sub, file_cfg, seed, trials, n)
    h = cfg.hash()
    run_id = f"{sub}-{h[:12]}"
    out = Path(out or os.environ.get("RMTLAB_OUT") or "runs")
    run_dir = out / run_id
    if run_dir.exists():
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)
    (run_dir / "config.json").write_text(cfg.canonical())
    manifest = RunManifest(run_id, sub, h, cfg.to_dict(), format=fmt, started=_now(),
                           units={k: "pending" for k in ex.EXPERIMENTS[sub].units(cfg)})
    manifest.save(run_dir / "manifest.json")
    return _execute(run_dir, manifest, int(threads), stop_after)


def resume(manifest_path, threads=None):
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    m = RunManifest.load(path)
    try:
        cfg = ex.ExperimentConfig.from_dict(m.config)
    except (ValueError, TypeError) as e:
        raise UsageError(f"manifest {path}: invalid config: {e}") from e
    if cfg.hash() != m.config_hash:
        raise UsageError(f"manifest {path}: config hash mismatch")
    if m.status == "done":
        print(f"{path.parent}: already complete")
        return m.exit_code or EXIT_OK
    for key in m.units:
        if m.units[key] == "done" and not (path.parent / "units" / f"{key}.json").exists():
            m.units[key] = "pending"
    return _execute(path.parent, m, int(threads or os.cpu_count() or 1))


def _n_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integer(s), got {text!r}")


def parser():
    p = argparse.ArgumentParser(prog="rmtlab", description="Random-matrix Monte Carlo laboratory.")
    subs = p.add_subparsers(dest="sub", metavar="subcommand")
    for name in SUBCOMMANDS:
        s = subs.add_parser(name, help=(ex.EXPERIMENTS[name].run_unit.__qualname__.split(".")[0]))
        s.add_argument("--config", help="TOML or JSON config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("-n", "--n", type=_n_list, help="matrix size(s), comma separated")
        s.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        s.add_argument("--out", help="output root (default: $RMTLAB_OUT or ./runs)")
        s.add_argument("--format", choices=("csv", "json"), default=None)
        s.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    r = subs.add_parser("resume", help="finish an interrupted run")
    r.add_argument("manifest")
    r.add_argument("--threads", type=int)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["run"]:
        argv = argv[1:]
    p = parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.sub is None:
        p.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.sub == "resume":
            return resume(args.manifest, args.threads)
        return run(args.sub, args.config, args.seed, args.trials, args.n, args.threads, args.out,
                   args.format, args.stop_after)
    except UsageError as e:
        print(f"rmtlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
