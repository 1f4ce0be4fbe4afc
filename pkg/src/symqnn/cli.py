"""Command-line front end: generate / train / evaluate / bp-scan / report.

Exit codes: 0 success, 2 usage error (argparse), 1 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .datasets import DecayConfig, ShapeConfig, generate_decays, generate_shapes, read_csv, write_csv, write_manifest
from .experiments import (
    MODELS,
    SCAN_AXES,
    ExperimentConfig,
    ExperimentReport,
    VarianceScanResult,
    bp_variance_scan,
    derive_seeds,
    evaluate_report,
    load_dataset,
    run_classification,
)

log = logging.getLogger("symqnn")


class UsageError(ValueError):
    """Invalid flag values or config file contents (exit code 2)."""


# flag name -> ExperimentConfig field
FLAG_FIELDS = {
    "task": "task",
    "model": "model",
    "layers": "layers",
    "inits": "n_inits",
    "iterations": "iterations",
    "seed": "seed",
    "data": "data",
    "out": "output",
    "n_train": "n_train",
    "n_test": "n_test",
    "workers": "workers",
}


def _common(p: argparse.ArgumentParser, tasks: tuple[str, ...]) -> None:
    p.add_argument("--task", choices=tasks, default=tasks[0])
    p.add_argument("--model", choices=MODELS, default="fully_symmetric")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--inits", type=int, default=None, help="initializations (train) or parameter draws (bp-scan)")
    p.add_argument("--iterations", type=int, default=None, help="optimizer evaluations per initialization")
    p.add_argument("--seed", type=int, default=0, help="root seed; all randomness derives from it")
    p.add_argument("--data", default=None, help="CSV dataset (default: generate from --seed)")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--config", default=None, help="JSON file of ExperimentConfig fields; overrides flags")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symqnn", description="Permutation-equivariant quantum classifiers "
                                     "for point clouds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset as CSV (+ manifest JSON)")
    _common(p, ("shapes2d", "decay"))
    p.add_argument("--n-samples", type=int, default=None)

    p = sub.add_parser("train", help="multi-seed training; writes a JSON report")
    _common(p, ("shapes2d", "decay"))
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--workers", type=int, default=1, help="processes for independent seeds")
    p.add_argument("--roc-csv", default=None, help="also export ROC points as CSV")

    p = sub.add_parser("evaluate", help="re-score a trained report on a dataset")
    _common(p, ("shapes2d", "decay"))
    p.add_argument("--report", required=True)
    p.add_argument("--split", choices=("test", "train", "all"), default="test")

    p = sub.add_parser("bp-scan", help="gradient-variance scan; writes a variance table")
    _common(p, ("bp_scan", "shapes2d", "decay"))
    p.add_argument("--axes", nargs="+", choices=SCAN_AXES, default=list(SCAN_AXES))
    p.add_argument("--scan-inputs", type=int, default=None, help="fixed inputs per configuration")
    p.add_argument("--csv", default=None, help="also export the table as CSV")

    p = sub.add_parser("report", help="summarize (and verify) a report or variance table")
    p.add_argument("path")
    p.add_argument("--csv", default=None, help="export ROC points / variance table as CSV")
    return parser


def config_from_args(args: argparse.Namespace, **extra) -> ExperimentConfig:
    values = {}
    for flag, name in FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    values.update(extra)
    if getattr(args, "config", None):
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --config: {exc}") from None
        if not isinstance(overrides, dict):
            raise UsageError("--config must hold a JSON object")
        values.update(overrides)
    try:
        return ExperimentConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(args) -> int:
    cfg = config_from_args(args).resolved()
    if not cfg.output:
        raise ValueError("generate needs --out")
    data_seed, _ = derive_seeds(cfg.seed, 1)
    n = args.n_samples or cfg.n_train + cfg.n_test
    if cfg.task == "shapes2d":
        gen_cfg = ShapeConfig(n_samples=n, seed=data_seed)
        ds = generate_shapes(gen_cfg)
    else:
        gen_cfg = DecayConfig(n_samples=n, seed=data_seed)
        ds = generate_decays(gen_cfg)
    if args.n_samples is None:
        ds = ds.with_split(cfg.n_train, cfg.n_test)
    out = Path(cfg.output)
    write_csv(ds, out)
    write_manifest(ds, out, gen_cfg, out.with_suffix(".manifest.json"))
    print(f"wrote {len(ds)} samples to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = config_from_args(args)
    if not cfg.output:
        cfg.output = "report.json"
    report = run_classification(cfg)
    if args.roc_csv:
        report.export_roc_csv(args.roc_csv)
    s = report.structure
    line = (f"{cfg.task}/{cfg.model}: {s['n_qubits']} qubits, {s['n_params']} params, "
            f"AUC median {report.auc['median']:.4f} mean {report.auc['mean']:.4f} +- {report.auc['std']:.4f}")
    if report.reference:
        line += f" (mass cut {report.reference['auc']:.4f})"
    print(line)
    failed = [x for x in report.seeds if x["status"] != "ok"]
    if failed:
        print(f"{len(failed)} seed(s) failed", file=sys.stderr)
    return 1 if len(failed) == len(report.seeds) else 0


def cmd_evaluate(args) -> int:
    report = ExperimentReport.read(args.report)
    if args.data:
        ds = read_csv(args.data)
    else:
        cfg = ExperimentConfig.from_dict(report.config)
        ds = load_dataset(cfg, derive_seeds(cfg.seed, cfg.n_inits)[0])
    result = evaluate_report(report, ds, args.split)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def cmd_bp_scan(args) -> int:
    extra = {"task": "bp_scan", "scan_axes": tuple(args.axes)}
    if args.inits is not None:
        extra["scan_samples"] = args.inits
    if args.scan_inputs is not None:
        extra["scan_inputs"] = args.scan_inputs
    args.inits = None  # consumed as scan_samples, not n_inits
    cfg = config_from_args(args, **extra)
    if not cfg.output:
        cfg.output = "variance.json"
    result = bp_variance_scan(cfg)
    if args.csv:
        result.export_csv(args.csv)
    for e in result.entries:
        print(f"{e['axis']:>9} {e['model']:>15} n={e['n_points']} d={e['dim']} "
              f"qubits={e['n_qubits']:>2} var={e['variance']:.3e}")
    return 0


def cmd_report(args) -> int:
    d = json.loads(Path(args.path).read_text())
    if "entries" in d:
        result = VarianceScanResult.from_dict(d)
        if args.csv:
            result.export_csv(args.csv)
        for e in result.entries:
            print(f"{e['axis']} {e['model']} qubits={e['n_qubits']} var={e['variance']:.3e}")
        return 0
    report = ExperimentReport.from_dict(d)
    ok = report.checksum() == d.get("checksum")
    if args.csv:
        report.export_roc_csv(args.csv)
    print(f"schema {d['schema_version']}, checksum {'ok' if ok else 'MISMATCH'}")
    print(f"structure: {report.structure}")
    for s in report.seeds:
        a = "-" if s["auc"] is None else f"{s['auc']:.4f}"
        print(f"  seed {s['seed']}: {s['status']} auc={a}")
    print(f"AUC median {report.auc['median']}, mean {report.auc['mean']} +- {report.auc['std']}")
    if report.reference:
        print(f"reference {report.reference['name']}: {report.reference['auc']:.4f}")
    return 0 if ok else 1


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "bp-scan": cmd_bp_scan,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.exception("unexpected failure")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
