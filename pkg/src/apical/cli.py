"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 data-format error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import gates, gradcheck
from .config import load_config, load_datasets
from .errors import ConfigError, DivergenceError, FormatError, UsageError
from .metrics import mcnemar
from .plot import plot_metrics
from .train import alpha_grid_search, evaluate, train_trials, write_summary

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_FORMAT = 0, 1, 2, 3

log = logging.getLogger("apical")


def cmd_verify_gates(args) -> int:
    reports = [gates.verify_gate(c) for c in gates.construction_cases(alpha_override=args.corrupt_alpha)]
    print(gates.format_report_table(reports))
    failed = [r.case.name for r in reports if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_FAIL
    print(f"{len(reports)}/{len(reports)} constructions pass")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.points < 1:
        print("error: --points must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    results = gradcheck.run_all(args.seed, args.points)
    print(gradcheck.format_results(results))
    failed = [r.component for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_FAIL
    print(f"all {len(results)} components within tolerance")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir
    if args.data_dir:
        cfg.data = replace(cfg.data, dir=args.data_dir)
    train_ds, val_ds, test_ds = load_datasets(cfg)
    arch = cfg.architecture(train_ds.X.shape[1], train_ds.n_classes)
    extra = {"config": str(args.config)}
    if cfg.train.alpha_mode.mode == "grid":
        grid = alpha_grid_search(cfg.train, arch, (train_ds, val_ds), jobs=args.jobs)
        result = grid.result
        extra["grid"] = [{"alpha": a, "val_accuracy": acc, "val_loss": loss} for a, acc, loss in grid.per_alpha]
        extra["selected_alpha"] = grid.alpha
    else:
        result = train_trials(cfg.train, arch, (train_ds, val_ds), jobs=args.jobs)
    history = result.history
    ev = evaluate(result.net, test_ds, cfg.train.loss)
    history.test_accuracy = ev.accuracy
    history.add(cfg.train.epochs, "test", ev.loss, ev.accuracy)
    extra["diverged_trials"] = [e.trial for e in result.errors]

    out_dir.mkdir(parents=True, exist_ok=True)
    history.write_csv(out_dir / "metrics.csv")
    for k, h in enumerate(result.histories):
        if h is not None:
            h.write_csv(out_dir / f"metrics_trial{k}.csv")
    result.net.save(out_dir / "model.ckpt")
    np.savetxt(out_dir / "test_correct.txt", ev.correct.astype(int), fmt="%d")
    write_summary(out_dir / "summary.json", result.net, arch, cfg.train, history, extra)
    print(
        f"{arch.describe()}: selected trial {history.selected_trial}, "
        f"val accuracy {history.val_accuracy:.4f}, test accuracy {ev.accuracy:.4f}"
    )
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def _read_correctness(path) -> np.ndarray:
    values = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s:
                continue
            if s not in ("0", "1"):
                raise FormatError(f"{path}: expected 0 or 1, got {s!r}", lineno)
            values.append(s == "1")
    return np.array(values, dtype=bool)


def cmd_compare(args) -> int:
    a = _read_correctness(args.a)
    b = _read_correctness(args.b)
    res = mcnemar(a, b)
    print(f"samples      {a.size}")
    print(f"accuracy A   {a.mean():.4f}")
    print(f"accuracy B   {b.mean():.4f}")
    print(f"n01 (A wrong, B right)  {res.n01}")
    print(f"n10 (A right, B wrong)  {res.n10}")
    print(f"statistic    {res.statistic:.4f}")
    verdict = {"‡": "significant at 0.01 ‡", "†": "significant at 0.05 †", "": "not significant"}
    print(f"verdict      {verdict[res.marker]}")
    return EXIT_OK


def cmd_plot(args) -> int:
    plot_metrics(args.metrics, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apical", description="ADA / PyNADA experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify-gates", help="check the XOR/OR/AND single-neuron constructions")
    s.add_argument("--corrupt-alpha", type=float, default=None, help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_verify_gates)

    s = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--points", type=int, default=200)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("train", help="train from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", help="override [output] dir")
    s.add_argument("--data-dir", help="override [data] dir / $ADA_DATA_DIR")
    s.add_argument("--jobs", type=int, default=1, help="trials trained concurrently")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("compare", help="McNemar test on two per-sample correctness files")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("plot", help="SVG chart of a metrics CSV")
    s.add_argument("--metrics", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except DivergenceError as exc:
        print(f"error: all trials diverged; first: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
