"""Command-line front end: ``lpplab run|list|verify|export``.

Exit status is 0 when every verdict passes, 1 when any fails and 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Sequence

from .experiments import (CATALOG, ConfigError, ReproductionError, ResultExistsError,
                          UnknownExperimentError, build_config, load_config_file,
                          parse_override, run_experiment)
from .experiments.config import OUT_ENV, default_output_dir

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
EXPORT_COLUMNS = ("experiment", "N", "param", "statistic", "value", "lo", "hi")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 already; keep the message terse
        self.print_usage(sys.stderr)
        raise SystemExit(_usage(f"{self.prog}: {message}"))


def _usage(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _pos(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lpplab", description="Exponential last-passage percolation lab.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a catalog experiment")
    run.add_argument("name")
    run.add_argument("--config", type=Path, help="YAML file with experiment settings")
    run.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./lpplab-results)")
    run.add_argument("--seed", type=_u64, help="master seed")
    run.add_argument("--workers", type=_pos, help="worker processes")
    run.add_argument("--override", nargs="+", action="extend", default=[], metavar="K=V",
                     help="override a setting; bare names refer to experiment parameters")
    run.add_argument("--verify-existing", action="store_true",
                     help="if results exist, check the rerun reproduces them")

    sub.add_parser("list", help="print the catalog")

    ver = sub.add_parser("verify", help="run the fast invariant suite")
    ver.add_argument("--seed", type=_u64, default=7)

    exp = sub.add_parser("export", help="convert a result to long-format CSV")
    exp.add_argument("result", type=Path, help="result .json or .csv")
    exp.add_argument("--out", type=Path, help="output file (default stdout)")
    return p


def _cmd_list() -> int:
    width = max(len(n) for n in CATALOG)
    for name, entry in CATALOG.items():
        crit = ",".join(entry.criteria)
        print(f"{name:<{width}}  [{crit}]  {entry.anchor}")
    return EXIT_OK


def _cmd_run(args) -> int:
    mapping = load_config_file(args.config) if args.config else None
    overrides = [parse_override(o) for o in args.override]
    if args.seed is not None:
        overrides.append(("master_seed", args.seed))
    if args.workers is not None:
        overrides.append(("worker_count", args.workers))
    out = args.out or (Path(mapping["output"]) if mapping and mapping.get("output") else default_output_dir())
    overrides.append(("output", str(out)))
    if args.verify_existing:
        overrides.append(("on_existing", "verify"))
    cfg = build_config(args.name, mapping, overrides)
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    for v in res.verdicts:
        print(v.line())
    print(f"wrote {Path(cfg.output) / (cfg.name + '.json')} ({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK if res.passed else EXIT_FAIL


def _cmd_verify(args) -> int:
    from .invariants import SUITE

    ok = True
    t0 = time.perf_counter()
    for group, fn in SUITE.items():
        for v in fn(args.seed):
            print(v.line(), flush=True)
            ok &= v.passed
    print(f"verify finished in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK if ok else EXIT_FAIL


def _export_rows(path: Path) -> list[dict]:
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    if path.suffix != ".json":
        raise ConfigError("result", "expected a .json or .csv result file")
    data = json.loads(path.read_text())
    if data.get("schema") != 1:
        raise ConfigError("result", f"unsupported schema {data.get('schema')!r}")
    rows = []
    sibling = path.with_suffix(".csv")
    if sibling.exists():
        rows += _export_rows(sibling)
    name = data.get("experiment", "")
    for key, fit in data.get("slopes", {}).items():
        se = fit.get("slope_se")
        lo = hi = ""
        if isinstance(se, (int, float)) and isinstance(fit.get("slope"), (int, float)):
            lo, hi = fit["slope"] - 2 * se, fit["slope"] + 2 * se
        rows.append({"experiment": name, "N": "", "param": key, "statistic": "slope",
                     "value": fit.get("slope"), "lo": lo, "hi": hi})
        rows.append({"experiment": name, "N": "", "param": key, "statistic": "r2",
                     "value": fit.get("r2"), "lo": "", "hi": ""})
    for v in data.get("verdicts", []):
        rows.append({"experiment": name, "N": "", "param": f"criterion={v['criterion']}",
                     "statistic": "margin", "value": v.get("margin"), "lo": "", "hi": ""})
    return rows


def _cmd_export(args) -> int:
    try:
        rows = _export_rows(args.result)
    except OSError as exc:
        return _usage(f"cannot read {args.result}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        return _usage(f"{args.result} is not valid JSON: {exc}")
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=EXPORT_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in EXPORT_COLUMNS})
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_export(args)
    except UnknownExperimentError as exc:
        return _usage(str(exc))
    except (ConfigError, ResultExistsError) as exc:
        return _usage(str(exc))
    except ReproductionError as exc:
        print(f"reproduction check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
