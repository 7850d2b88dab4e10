"""Command-line front end.

    gggp run <experiment file>
    gggp evaluate <model> <csv> [--target COL] [--split FRAC --seed N]
    gggp summarize <results dir>
    gggp convergence <results dir>

Exit codes: 0 success, 1 usage or input error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

import numpy as np

from .data import GENDER, GENDER_CODES, DataError, SplitSpec, load_csv, nhanes_filter, split
from .engine import RunFailure, RunLog, read_result, run_batch
from .experiment import ExperimentError, load_experiment
from .expr import ExprError, evaluate, load_model, variables
from .metrics import MetricReport

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- run

def cmd_run(args) -> int:
    try:
        spec = load_experiment(args.spec)
        extra = [spec.pregnancy_column] if spec.pregnancy_column else []
        data = load_csv(spec.dataset, spec.target, spec.features, extra)
        if spec.apply_filter:
            data = nhanes_filter(data, spec.min_age, spec.pregnancy_column)
        train, test = split(data, spec.split)
    except (ExperimentError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    failures = 0

    def store(res) -> None:
        nonlocal failures
        cfg = res.config
        stem = spec.output / cfg.name / f"rep{res.replicate:02d}"
        if isinstance(res, RunFailure):
            failures += 1
            write_atomic(stem.with_suffix(".error.txt"), res.error + "\n")
            print(f"{cfg.name}  {cfg.variant} depth={cfg.max_tree_depth} seed={cfg.seed} FAILED {res.error}")
            return
        write_atomic(stem.with_suffix(".result.txt"), res.to_text())
        write_atomic(stem.with_suffix(".log.csv"), res.log.to_csv())
        if res.valid:
            tail = f"train_rmse={res.train_metrics.rmse:.4f} test_r2={res.test_metrics.r2:.4f}"
        else:
            tail = "no valid model"
        print(f"{cfg.name}  {cfg.variant} depth={cfg.max_tree_depth} seed={cfg.seed} {tail}  [{res.wall_time:.1f}s]",
              flush=True)

    try:
        run_batch(list(spec.configs), spec.replicates, spec.seed, train, test,
                  workers=spec.workers, on_result=store)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME if failures else EXIT_OK


# ---------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    try:
        model = load_model(args.model)
    except (OSError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    names = variables(model)
    try:
        extra = [args.pregnancy_column] if args.pregnancy_column else []
        if args.nhanes_filter or args.gender != "all":
            for col in ("RIDAGEYR", "RIAGENDR"):
                if col not in names and col != args.target:
                    extra.append(col)
        data = load_csv(args.csv, args.target, names, extra)
        if args.nhanes_filter:
            data = nhanes_filter(data, 18, args.pregnancy_column)
        else:
            data = nhanes_filter(data, None, None)
        if args.split is not None:
            parts = split(data, SplitSpec(args.split, args.seed, args.gender))
            sides = list(zip(("train", "test"), parts))
        else:
            if args.gender != "all":
                data = split_gender(data, args.gender)
            sides = [("all", data)]
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for side, d in sides:
        pred = evaluate(model, d.features(), list(d.feature_columns))
        rep = MetricReport.compute(pred, d.target())
        print(f"{side:<5} {rep.line()}")
    return EXIT_OK


def split_gender(d, gender):
    return d.take(np.flatnonzero(d.column(GENDER) == GENDER_CODES[gender]))


# ---------------------------------------------------------------- summarize

SUMMARY_COLUMNS = ("rmse", "r2", "avg_error", "algorithm", "max_tree_depth", "dataset", "config")


def summarize_rows(results_dir: Path) -> list[dict]:
    files = sorted(results_dir.rglob("*.result.txt"))
    if not files:
        raise UsageError(f"no result files under {results_dir}")
    best: dict[str, dict] = {}
    for f in files:
        rec = read_result(f.read_text(encoding="utf-8"))
        if rec.get("valid") != "true":
            continue
        name = rec["config.name"]
        key = (float(rec["train.rmse"]), int(rec.get("replicate", 0)), str(f))
        if name not in best or key < best[name]["_key"]:
            best[name] = {**rec, "_key": key}
    rows = []
    for name, rec in sorted(best.items(), key=lambda kv: (kv[1]["_key"][0], kv[0])):
        for side in ("train", "test"):
            rows.append({
                "rmse": float(rec[f"{side}.rmse"]),
                "r2": float(rec[f"{side}.r2"]),
                "avg_error": float(rec[f"{side}.avg_error"]),
                "algorithm": rec["config.variant"],
                "max_tree_depth": int(rec["config.max_tree_depth"]),
                "dataset": side,
                "config": name,
            })
    return rows


def format_table(rows: list[dict]) -> str:
    head = ["RMSE", "R2", "Avg. Error", "Algorithm", "Max Tree Depth", "Dataset", "Config"]
    body = [[f"{r['rmse']:.4f}", f"{r['r2']:.4f}", f"{r['avg_error']:.4f}", r["algorithm"],
             str(r["max_tree_depth"]), r["dataset"], r["config"]] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip() for b in body]
    return "\n".join(lines) + "\n"


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_summarize(args) -> int:
    root = Path(args.results)
    if not root.is_dir():
        print(f"error: not a directory: {root}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rows = summarize_rows(root)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(format_table(rows))
    out = Path(args.csv) if args.csv else root / "summary.csv"
    write_atomic(out, rows_to_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------- convergence

def convergence_rows(results_dir: Path) -> list[tuple]:
    logs = sorted(results_dir.rglob("*.log.csv"))
    if not logs:
        raise UsageError(f"no run logs under {results_dir}")
    groups: dict[str, list[RunLog]] = defaultdict(list)
    for f in logs:
        name = f.parent.relative_to(results_dir).as_posix()
        groups[name].append(RunLog.from_csv(f.read_text(encoding="utf-8")))
    rows = []
    for name in sorted(groups):
        runs = groups[name]
        schedule = [s.generation for s in runs[0].snapshots]
        for other in runs[1:]:
            if [s.generation for s in other.snapshots] != schedule:
                raise UsageError(f"runs of {name} use different snapshot schedules")
        for i, gen in enumerate(schedule):
            vals = np.array([r.snapshots[i].best_rmse for r in runs
                             if r.snapshots[i].best_rmse is not None], dtype=np.float64)
            mean = float(vals.mean()) if vals.size else math.nan
            std = float(vals.std()) if vals.size else math.nan
            rows.append((name, gen, mean, std, int(vals.size)))
    return rows


def cmd_convergence(args) -> int:
    root = Path(args.results)
    if not root.is_dir():
        print(f"error: not a directory: {root}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rows = convergence_rows(root)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    lines = ["config,generation,mean_best_rmse,std_best_rmse,n_runs"]
    lines += [f"{n},{g},{m!r},{s!r},{k}" for n, g, m, s, k in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gggp", description="Grammar-guided GP for symbolic regression.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run every config of an experiment file")
    r.add_argument("spec")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="score a stored model on a CSV file")
    e.add_argument("model")
    e.add_argument("csv")
    e.add_argument("--target", default="DXDTOPF")
    e.add_argument("--split", type=float, default=None, metavar="FRAC",
                   help="report train/test sides of a seeded split")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--gender", choices=("all", "male", "female"), default="all")
    e.add_argument("--nhanes-filter", action="store_true",
                   help="drop minors (and pregnant rows with --pregnancy-column)")
    e.add_argument("--pregnancy-column", default=None)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("summarize", help="best run per config, train and test rows")
    s.add_argument("results")
    s.add_argument("--csv", default=None, help="CSV output path (default <results>/summary.csv)")
    s.set_defaults(func=cmd_summarize)

    c = sub.add_parser("convergence", help="pooled best-RMSE trajectories per config")
    c.add_argument("results")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "evaluate" and args.split is not None and not 0 < args.split < 1:
        print("error: --split must lie in (0, 1)", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
