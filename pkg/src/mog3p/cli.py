"""``mog3p`` command line: run, baseline, mine, plot."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, svg
from .classifiers import DEFAULT_BANK, ClassifierError, StratificationError, cv_accuracy, stratified_folds
from .config import BUILTIN_DATASETS, ConfigError, RunConfig
from .data import DataError, Dataset, UnknownColumnError, ExperimentReport, Standardizer, load_builtin, load_csv, report_model_projection, run_nested_experiment
from .gp_core import ExpressionSyntaxError
from .mining import DEFAULT_TAU, SchemaError, load_archive, mine
from .moea import HISTORY_HEADER

log = logging.getLogger("mog3p")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
ARCHIVE_VERSION = 1


def _float(v: float) -> str:
    return repr(float(v))


def _stamp(seed: int, config_hash: str) -> dict[str, str]:
    return {"seed": str(seed), "config_hash": config_hash}


def _write_csv(path: Path, header: list[str], rows: list[list], stamp: dict[str, str]) -> None:
    buf = io.StringIO()
    buf.write(f"# seed={stamp['seed']} config_hash={stamp['config_hash']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")


def load_dataset_spec(spec: dict) -> Dataset:
    path = spec["path"]
    if path.startswith("builtin:"):
        return load_builtin(path.split(":", 1)[1])
    return load_csv(path, spec["label_column"], spec["exclude_columns"], spec["missing_policy"])


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def archive_document(dataset: Dataset, cfg: RunConfig, report: ExperimentReport) -> dict:
    return {
        "version": ARCHIVE_VERSION,
        "dataset": {
            "name": dataset.name,
            "path": cfg.raw["dataset"]["path"],
            "n_samples": dataset.n_samples,
            "feature_names": dataset.feature_names,
            "class_names": dataset.class_names,
        },
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "runs": [
            {
                "repeat": r.repeat,
                "fold": r.fold,
                "report_model": r.report_index,
                "standardizer": {"means": r.standardizer.means.tolist(), "stds": r.standardizer.stds.tolist()},
                "models": [m.to_dict() for m in r.records],
            }
            for r in report.runs
        ],
    }


def report_rows(report: ExperimentReport) -> tuple[list[str], list[list]]:
    summary = report.summary()
    methods = list(summary)
    header = ["classifier"] + [f"{m}_{stat}" for m in methods for stat in ("mean", "std")]
    rows = []
    for name in report.classifier_names + ["Avg"]:
        rows.append([name] + [v for m in methods for v in summary[m][name]])
    return header, rows


def cmd_run(args) -> int:
    if args.config:
        cfg = RunConfig.load(args.config, paper_scale=args.paper_scale)
    else:
        cfg = RunConfig.from_dict({}, paper_scale=args.paper_scale)
    if args.dataset:
        ds = BUILTIN_DATASETS.get(args.dataset, {"path": str(Path(args.dataset).resolve())})
        d = cfg.to_dict()
        d["dataset"].update(ds)
        cfg = RunConfig.from_dict(d)
    cfg = cfg.with_overrides(
        seed=args.seed, inner_folds=args.inner_folds, aggregation=args.aggregation, output_dir=args.out
    )
    out = Path(cfg.raw["output_dir"])
    dataset = load_dataset_spec(cfg.raw["dataset"])
    settings = cfg.settings()
    report = run_nested_experiment(dataset, settings, n_jobs=args.threads)

    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg.seed, cfg.config_hash())
    header, rows = report_rows(report)
    _write_csv(out / "report.csv", header, rows, stamp)
    _write_json(out / "archive.json", archive_document(dataset, cfg, report))
    hist = [[r.repeat, r.fold, *h.row()] for r in report.runs for h in r.history]
    _write_csv(out / "history.csv", ["repeat", "fold", *HISTORY_HEADER], hist, stamp)
    _write_json(out / "manifest.json", {"seed": cfg.seed, "config_hash": cfg.config_hash(), "config": cfg.to_dict()})
    summary = report.summary()
    for method, row in summary.items():
        mean, std = row["Avg"]
        print(f"{method:>6}: {100 * mean:.2f} ({100 * std:.2f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------


def baseline_coords(method: str, Z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if method == "pca":
        p = baselines.pca_fit(Z)
        return p.apply(Z), p.eigenvalues
    if method == "mds":
        e = baselines.mds_fit(Z)
        return e.coords, e.eigenvalues
    p = baselines.mda_fit(Z, y)
    return p.apply(Z), p.eigenvalues


def cmd_baseline(args) -> int:
    ds_spec = BUILTIN_DATASETS.get(
        args.dataset,
        {
            "path": str(Path(args.dataset).resolve()),
            "label_column": args.label,
            "exclude_columns": args.exclude or [],
            "missing_policy": args.missing_policy,
        },
    )
    dataset = load_dataset_spec(ds_spec)
    config = {"method": args.method, "dataset": ds_spec, "seed": args.seed, "folds": args.folds}
    cfg_hash = RunConfig({"baseline": config}).config_hash()
    stamp = _stamp(args.seed, cfg_hash)
    Z = Standardizer.fit(dataset.X).transform(dataset.X)
    coords, eig = baseline_coords(args.method, Z, dataset.y)
    fold_of = stratified_folds(dataset.y, args.folds, np.random.default_rng(args.seed))
    bank = DEFAULT_BANK
    accs = [cv_accuracy(s, coords, dataset.y, fold_of) for s in bank]

    out = Path(args.out or "mog3p-out")
    out.mkdir(parents=True, exist_ok=True)
    m = args.method
    _write_csv(
        out / f"{m}_coords.csv",
        ["dim1", "dim2", "label"],
        [[float(a), float(b), dataset.class_names[c]] for (a, b), c in zip(coords, dataset.y)],
        stamp,
    )
    rows = [[s.name, a] for s, a in zip(bank, accs)] + [["Avg", float(np.mean(accs))]]
    _write_csv(out / f"{m}_accuracy.csv", ["classifier", "cv_accuracy"], rows, stamp)
    (out / f"{m}_scatter.svg").write_text(
        svg.scatter(coords, dataset.y, dataset.class_names, f"{dataset.name}: {m.upper()} (2D)", meta=stamp)
    )
    print(f"{m.upper()} eigenvalues: {eig[0]:.4g}, {eig[1]:.4g}; mean {args.folds}-fold accuracy {100 * np.mean(accs):.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# mine / plot
# ---------------------------------------------------------------------------


def cmd_mine(args) -> int:
    dump = load_archive(args.archive)
    report = mine(dump, args.tau)
    out = Path(args.out or Path(args.archive).parent / "mining")
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(dump.seed, dump.config_hash)
    doc = {"seed": dump.seed, "config_hash": dump.config_hash, **report.to_dict()}
    _write_json(out / "mining.json", doc)
    rows = [
        [r.run[0], r.run[1], r.train_error, r.test_error, r.objectives.s_size, r.objectives.v_index, *r.expressions]
        for r in report.frontier
    ]
    n_expr = max((len(r.expressions) for r in report.frontier), default=2)
    _write_csv(
        out / "frontier.csv",
        ["repeat", "fold", "train_error", "test_error", "s_size", "v_index", *[f"expr{i + 1}" for i in range(n_expr)]],
        rows,
        stamp,
    )
    _write_csv(
        out / "feature_frequency.csv",
        ["feature", "count"],
        [[n, c] for n, c in zip(report.feature_names, report.feature_frequency)],
        stamp,
    )
    _write_csv(
        out / "classifier_summary.csv",
        ["classifier", "train_mean", "train_std", "test_mean", "test_std"],
        [[k, v["train_mean"], v["train_std"], v["test_mean"], v["test_std"]] for k, v in report.classifier_summary.items()],
        stamp,
    )
    (out / "feature_frequency.svg").write_text(
        svg.bar_chart(report.feature_frequency, report.feature_names, "Feature usage in frontier models", meta=stamp)
    )
    print(f"frontier: {len(report.frontier)} models; feature usage: {dict(zip(report.feature_names, report.feature_frequency))}")
    return EXIT_OK


def cmd_plot(args) -> int:
    with open(args.archive) as fh:
        doc = json.load(fh)
    if doc.get("version") != ARCHIVE_VERSION:
        raise SchemaError(f"archive schema version {doc.get('version')!r} is not {ARCHIVE_VERSION}")
    runs = {(r["repeat"], r["fold"]): r for r in doc["runs"]}
    key = (args.repeat, args.fold)
    if key not in runs:
        raise DataError(f"no run with repeat={args.repeat} fold={args.fold} in archive")
    run = runs[key]
    ds_path = args.dataset or doc["dataset"]["path"]
    if ds_path.startswith("builtin:"):
        dataset = load_builtin(ds_path.split(":", 1)[1])
    else:
        dataset = load_csv(ds_path, args.label, args.exclude or [], "drop")
    if dataset.feature_names != doc["dataset"]["feature_names"]:
        raise DataError("dataset features do not match the archive")
    index = run["report_model"] if args.model is None else args.model
    model_doc = run["models"][index]

    from .data import ModelRecord, RunResult

    record = ModelRecord.from_dict(model_doc, key)
    std = Standardizer(np.array(run["standardizer"]["means"]), np.array(run["standardizer"]["stds"]))
    rr = RunResult(key[0], key[1], std, [record], 0, [])
    _, coords = report_model_projection(dataset, rr)
    out = Path(args.out or Path(args.archive).parent)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(doc["seed"], doc.get("config_hash", ""))
    name = f"model_r{key[0]}_f{key[1]}_m{index}.svg"
    (out / name).write_text(
        svg.scatter(
            coords,
            dataset.y,
            dataset.class_names,
            f"{dataset.name}: MOG3P model (repeat {key[0]}, fold {key[1]})",
            axis_labels=(record.expressions[0], record.expressions[1] if len(record.expressions) > 1 else ""),
            meta=stamp,
        )
    )
    print(out / name)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mog3p", description="Multi-objective GP projection pursuit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="nested-CV MOG3P experiment")
    run.add_argument("--config", help="JSON run config")
    run.add_argument("--dataset", help="override dataset: 'wbc', 'crabs' or a CSV path")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--threads", type=int, default=1, help="worker processes for outer folds")
    run.add_argument("--inner-folds", type=int)
    run.add_argument("--aggregation", choices=["min", "max", "mean"])
    run.add_argument("--paper-scale", action="store_true", help="population 400, 100 generations, 10x10 CV")
    run.set_defaults(func=cmd_run)

    base = sub.add_parser("baseline", help="PCA / MDS / MDA projection of a dataset")
    base.add_argument("method", choices=["pca", "mds", "mda"])
    base.add_argument("dataset", help="'wbc', 'crabs' or a CSV path")
    base.add_argument("--label", default="-1", help="label column name or index (default: last)")
    base.add_argument("--exclude", action="append", help="column to drop (repeatable)")
    base.add_argument("--missing-policy", choices=["drop", "strict"], default="drop")
    base.add_argument("--folds", type=int, default=10)
    base.add_argument("--seed", type=int, default=42)
    base.add_argument("--out")
    base.set_defaults(func=cmd_baseline)

    mn = sub.add_parser("mine", help="frontier and feature usage from archive.json")
    mn.add_argument("archive")
    mn.add_argument("--tau", type=float, default=DEFAULT_TAU)
    mn.add_argument("--out")
    mn.set_defaults(func=cmd_mine)

    pl = sub.add_parser("plot", help="SVG scatter of an archived model's projection")
    pl.add_argument("archive")
    pl.add_argument("--dataset", help="CSV path (default: path recorded in the archive)")
    pl.add_argument("--label", default="-1")
    pl.add_argument("--exclude", action="append")
    pl.add_argument("--repeat", type=int, default=0)
    pl.add_argument("--fold", type=int, default=0)
    pl.add_argument("--model", type=int, help="model index in the run (default: the report model)")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaError, UnknownColumnError) as exc:
        print(f"mog3p: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, StratificationError, ClassifierError, ExpressionSyntaxError, OSError) as exc:
        print(f"mog3p: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"mog3p: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
