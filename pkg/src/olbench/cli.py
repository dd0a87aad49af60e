"""Command-line front end: experiment runs, dataset tooling, reports.

Subcommands:

* run              - execute streaming experiments from JSON config files
                     (flags override config fields; lists in the config
                     expand to a grid of runs; `--jobs N` runs them in
                     parallel processes).
* compare          - merge run reports into the three-row comparison
                     table (markdown + CSV + per-class CSV companion).
* gen-synthetic    - write a seeded Gaussian-cluster feature CSV.
* inspect-model    - print a model file's layer chain and head shape.
* export-features  - run the frozen forward pass over a raw dataset and
                     write the feature CSV.

Input paths from a config resolve against the config file's directory,
then against `OLBENCH_DATA_DIR` if set. Reports and tables are written
atomically; no command mutates its inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .datasets import (
    Dataset,
    InputKind,
    SyntheticSpec,
    as_kind,
    gen_synthetic,
    load_feature_csv,
    load_mnist_idx,
    save_feature_csv,
)
from .errors import CapacityError, FormatError, ShapeError
from .frozen import FrozenModel, HeadSeed, forward, layer_output_shape
from .head import DEFAULT_MAX_CLASSES
from .linalg import FLOAT
from .modelio import load_head_seed, load_model, save_head_seed
from .report import compare, load_report, save_report
from .runner import build_stream, run_experiment_with_head
from .strategies import StrategyConfig, StrategyKind

DATA_DIR_ENV = "OLBENCH_DATA_DIR"


def _resolve_input(path: str, base_dir: str) -> str:
    """Config-relative first, then the data-dir fallback."""
    p = Path(path)
    if p.is_absolute():
        return str(p)
    local = Path(base_dir) / p
    if local.exists():
        return str(local)
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and (Path(data_dir) / p).exists():
        return str(Path(data_dir) / p)
    return str(local)


def _parse_pseudo_test(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _as_list(value) -> list:
    return list(value) if isinstance(value, list) else [value]


def _resolve_dataset_paths(spec: dict, base_dir: str) -> dict:
    spec = dict(spec)
    kind = spec.get("kind")
    if kind == "feature_csv":
        spec["path"] = _resolve_input(spec["path"], base_dir)
    elif kind == "mnist_idx":
        spec["images"] = _resolve_input(spec["images"], base_dir)
        spec["labels"] = _resolve_input(spec["labels"], base_dir)
    elif kind != "synthetic":
        raise ValueError(f"unknown dataset kind {kind!r}")
    return spec


def _load_dataset(spec: dict) -> Dataset:
    kind = spec["kind"]
    if kind == "feature_csv":
        return load_feature_csv(spec["path"])
    if kind == "mnist_idx":
        keep = spec.get("keep")
        return load_mnist_idx(
            spec["images"], spec["labels"], None if keep is None else set(keep)
        )
    if kind == "synthetic":
        ds = gen_synthetic(
            SyntheticSpec(
                n_classes=int(spec["classes"]),
                feature_len=int(spec["feature_len"]),
                samples_per_class=int(spec["samples_per_class"]),
                spread=float(spec.get("spread", 0.25)),
                seed=int(spec.get("seed", 0)),
                class_labels=spec.get("class_labels"),
            )
        )
        if spec.get("as_flat_input"):
            ds = as_kind(ds, InputKind.FLAT_VECTOR)
        return ds
    raise ValueError(f"unknown dataset kind {kind!r}")


def _load_head(head_spec, model_head: HeadSeed | None) -> HeadSeed:
    if head_spec is None:
        if model_head is None:
            raise ValueError("config needs a head file, an inline head, or a model")
        return model_head
    if isinstance(head_spec, str):
        return load_head_seed(head_spec)
    labels = [str(lb) for lb in head_spec["labels"]]
    m = int(head_spec["feature_len"])
    return HeadSeed(
        np.zeros((len(labels), m), dtype=FLOAT),
        np.zeros(len(labels), dtype=FLOAT),
        labels,
    )


def _execute_job(job: dict) -> dict:
    """One fully-resolved experiment; runs in its own process under --jobs."""
    dataset = _load_dataset(job["dataset"])
    model = None
    model_head = None
    if job["model"] is not None:
        model, model_head = load_model(job["model"])
    head = _load_head(job["head"], model_head)
    cfg = StrategyConfig(
        kind=job["strategy"],
        learning_rate=job["learning_rate"],
        batch_size=job["batch_size"],
    )
    plan = build_stream(dataset, job["seed"], job["pseudo_test"])
    report, final_head = run_experiment_with_head(
        model,
        head,
        plan,
        cfg,
        max_classes=job["max_classes"],
        freeze_during_test=job["freeze_during_test"],
    )
    save_report(job["out"], report)
    if job["save_head"]:
        save_head_seed(job["save_head"], final_head)
    return {
        "strategy": report.strategy,
        "accuracy": report.overall_accuracy,
        "mean_step_ms": 1000.0 * report.ol_step_time.mean,
        "peak_bytes": report.peak_memory_bytes,
        "out": job["out"],
    }


def _derive_name(stem: str, strategy, lr, batch, seed) -> str:
    return f"{stem}_{strategy}_a{lr}_k{batch}_s{seed}.json"


def _jobs_from_config(config_path: str, args) -> list[dict]:
    config_path = str(Path(config_path))
    with open(config_path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    base_dir = str(Path(config_path).resolve().parent)
    stem = Path(config_path).stem

    dataset = _resolve_dataset_paths(cfg["dataset"], base_dir)
    model = cfg.get("model")
    model = _resolve_input(model, base_dir) if model else None
    head = cfg.get("head")
    if isinstance(head, str):
        head = _resolve_input(head, base_dir)

    strategies = _as_list(args.strategy or cfg.get("strategy"))
    if strategies == [None]:
        raise ValueError(f"{config_path}: no strategy given (config or --strategy)")
    alphas = _as_list(args.alpha if args.alpha is not None else cfg.get("learning_rate", 0.05))
    batches = _as_list(args.batch if args.batch is not None else cfg.get("batch_size", 16))
    seeds = _as_list(args.seed if args.seed is not None else cfg.get("seed", 0))
    pseudo = args.pseudo_test if args.pseudo_test is not None else cfg.get("pseudo_test", 0.8)
    freeze = args.freeze_during_test or bool(cfg.get("freeze_during_test", False))
    max_classes = int(cfg.get("max_classes", DEFAULT_MAX_CLASSES))

    combos = [
        (s, a, k, sd) for s in strategies for a in alphas for k in batches for sd in seeds
    ]
    single = len(combos) == 1

    out_cfg = cfg.get("out")
    if args.out:
        out_base = args.out
    elif out_cfg:
        out_base = os.path.join(base_dir, out_cfg) if not os.path.isabs(out_cfg) else out_cfg
    else:
        out_base = base_dir
    save_head_cfg = cfg.get("save_head")
    if isinstance(save_head_cfg, str) and not os.path.isabs(save_head_cfg):
        save_head_cfg = os.path.join(base_dir, save_head_cfg)

    jobs = []
    for strategy, alpha, batch, seed in combos:
        if single and str(out_base).endswith(".json"):
            out = str(out_base)
        else:
            os.makedirs(out_base, exist_ok=True)
            out = os.path.join(out_base, _derive_name(stem, strategy, alpha, batch, seed))
        if save_head_cfg is None:
            save_head = None
        elif single:
            save_head = save_head_cfg
        else:
            save_head = out[: -len(".json")] + ".head.txt"
        jobs.append(
            {
                "dataset": dataset,
                "model": model,
                "head": head,
                "strategy": str(strategy),
                "learning_rate": float(alpha),
                "batch_size": int(batch),
                "seed": int(seed),
                "pseudo_test": pseudo,
                "freeze_during_test": freeze,
                "max_classes": max_classes,
                "out": out,
                "save_head": save_head,
            }
        )
    return jobs


def cmd_run(args) -> int:
    jobs = []
    for config_path in args.config:
        jobs.extend(_jobs_from_config(config_path, args))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_execute_job, jobs))
    else:
        results = [_execute_job(job) for job in jobs]
    for r in results:
        print(
            f"{r['strategy']}: accuracy={r['accuracy']:.4f} "
            f"ol_step_mean={r['mean_step_ms']:.3f}ms "
            f"peak_ol_bytes={r['peak_bytes']} -> {r['out']}"
        )
    return 0


def cmd_compare(args) -> int:
    reports = [load_report(p) for p in args.reports]
    table = compare(reports)
    sys.stdout.write(table.to_markdown())
    if args.out:
        out = args.out
        parent = Path(out).parent
        if str(parent):
            os.makedirs(parent, exist_ok=True)
        _write_atomic(out + ".md", table.to_markdown())
        _write_atomic(out + ".csv", table.to_csv())
        _write_atomic(out + "_per_class.csv", table.per_class_csv())
        _write_atomic(
            out + ".json",
            json.dumps(table.to_json_dict(), indent=2, sort_keys=True) + "\n",
        )
    return 0


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cmd_gen_synthetic(args) -> int:
    labels = args.labels.split(",") if args.labels else None
    ds = gen_synthetic(
        SyntheticSpec(
            n_classes=args.classes,
            feature_len=args.feature_len,
            samples_per_class=args.samples_per_class,
            spread=args.spread,
            seed=args.seed,
            class_labels=labels,
        )
    )
    save_feature_csv(args.out, ds.inputs, ds.labels)
    print(f"wrote {len(ds)} samples x {ds.inputs.shape[1]} features -> {args.out}")
    return 0


def _fmt_shape(shape) -> str:
    if shape[0] == "flat":
        return f"flat({shape[1]})"
    return f"image({shape[1]}x{shape[2]}x{shape[3]})"


def _describe_layer(layer) -> str:
    name = type(layer).__name__.lower()
    if name == "dense":
        return f"dense {layer.weights.shape[1]} -> {layer.weights.shape[0]}"
    if name == "conv2d":
        kh, kw, cin, cout = layer.filters.shape
        return f"conv2d {kh}x{kw} {cin} -> {cout} channels, padding={layer.padding}"
    if name == "dropout":
        return f"dropout rate={layer.rate} (inference no-op)"
    return name


def cmd_inspect_model(args) -> int:
    model, head = load_model(args.model)
    print(f"input: {_fmt_shape(model.input_shape)}")
    shape = model.input_shape
    for i, layer in enumerate(model.layers, start=1):
        shape = layer_output_shape(layer, shape)
        print(f"  {i}. {_describe_layer(layer)} -> {_fmt_shape(shape)}")
    print(f"feature length: {model.feature_len}")
    print(f"head: {head.n} classes x {head.m} features")
    print("labels: " + " ".join(head.labels))
    return 0


def cmd_export_features(args) -> int:
    model, _ = load_model(args.model)
    if args.input_csv:
        ds = as_kind(load_feature_csv(args.input_csv), InputKind.FLAT_VECTOR)
    else:
        if not (args.images and args.labels):
            raise ValueError("export-features needs --images/--labels or --input-csv")
        keep = set(args.keep.split(",")) if args.keep else None
        ds = load_mnist_idx(args.images, args.labels, keep)
    features = np.stack([forward(model, raw) for raw in ds.inputs])
    save_feature_csv(args.out, features, ds.labels)
    print(f"wrote {features.shape[0]} samples x {features.shape[1]} features -> {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="olbench",
        description="Streaming continual-learning benchmark over a frozen feature extractor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run experiments from JSON configs")
    run.add_argument("--config", nargs="+", required=True, help="config file(s)")
    run.add_argument("--strategy", choices=[str(k) for k in StrategyKind], default=None)
    run.add_argument("--alpha", type=float, default=None, help="learning rate override")
    run.add_argument("--batch", type=int, default=None, help="batch size override")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument(
        "--pseudo-test",
        type=_parse_pseudo_test,
        default=None,
        help="fraction in (0,1) or explicit sample index",
    )
    run.add_argument("--freeze-during-test", action="store_true")
    run.add_argument("--jobs", type=int, default=1, help="parallel runs")
    run.add_argument("--out", default=None, help="report path (single run) or directory")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="tabulate reports side by side")
    cmp_.add_argument("reports", nargs="+", help="report JSON files")
    cmp_.add_argument("--out", default=None, help="output prefix for .md/.csv files")
    cmp_.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen-synthetic", help="write a Gaussian-cluster feature CSV")
    gen.add_argument("--classes", type=int, required=True)
    gen.add_argument("--feature-len", type=int, required=True)
    gen.add_argument("--samples-per-class", type=int, required=True)
    gen.add_argument("--spread", type=float, default=0.25)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--labels", default=None, help="comma-separated class names")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_synthetic)

    ins = sub.add_parser("inspect-model", help="print a model file's structure")
    ins.add_argument("model")
    ins.set_defaults(func=cmd_inspect_model)

    exp = sub.add_parser("export-features", help="frozen forward pass -> feature CSV")
    exp.add_argument("--model", required=True)
    exp.add_argument("--images", default=None, help="IDX image file")
    exp.add_argument("--labels", default=None, help="IDX label file")
    exp.add_argument("--keep", default=None, help="comma-separated labels to keep")
    exp.add_argument("--input-csv", default=None, help="flat-vector CSV input")
    exp.add_argument("--out", required=True)
    exp.set_defaults(func=cmd_export_features)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ShapeError, CapacityError, ValueError, KeyError, OSError) as exc:
        print(f"olbench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
