"""Run reports and cross-strategy comparison tables.

A report captures everything one streaming run produced: scored-region
accuracy, per-class accuracy, the confusion matrix, per-phase wall-time
stats, the analytic memory footprint, and the run's identifying metadata.
Reports serialize to JSON under a schema version string; `compare`
assembles the familiar three-row table (accuracy, step time, memory) with
one column per strategy and refuses to mix datasets or schema versions.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .strategies import TABLE_ORDER

SCHEMA_VERSION = "olbench-report-v1"

# Metric rows of the comparison table, in display order.
TABLE_ROWS = ["Accuracy (%)", "Training step time (ms)", "Max allocated OL memory (kB)"]


@dataclass
class PhaseTiming:
    """Wall-time stats for one per-sample phase, in seconds."""

    mean: float = 0.0
    min: float = 0.0
    max: float = 0.0

    @classmethod
    def from_samples(cls, samples: list[float]) -> "PhaseTiming":
        if not samples:
            return cls()
        return cls(sum(samples) / len(samples), min(samples), max(samples))

    def to_dict(self) -> dict:
        return {"mean_s": self.mean, "min_s": self.min, "max_s": self.max}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseTiming":
        return cls(float(d["mean_s"]), float(d["min_s"]), float(d["max_s"]))


@dataclass
class RunReport:
    strategy: str
    learning_rate: float
    batch_size: int
    seed: int
    dataset_id: str
    dataset_size: int
    pseudo_test_start: int
    scored: int
    freeze_during_test: bool
    class_arrival_order: list[str]
    confusion_labels: list[str]
    confusion: list[list[int]]
    overall_accuracy: float
    per_class_accuracy: dict[str, float]
    peak_memory_bytes: int
    frozen_forward_time: PhaseTiming = field(default_factory=PhaseTiming)
    ol_step_time: PhaseTiming = field(default_factory=PhaseTiming)
    schema: str = SCHEMA_VERSION

    def validate(self) -> None:
        """Check the report's internal accounting; raises ValueError."""
        n = len(self.confusion_labels)
        if len(self.confusion) != n or any(len(row) != n for row in self.confusion):
            raise ValueError("confusion matrix is not square over its labels")
        total = sum(sum(row) for row in self.confusion)
        if total != self.scored:
            raise ValueError(f"confusion total {total} != scored {self.scored}")
        if self.scored != self.dataset_size - self.pseudo_test_start:
            raise ValueError(
                f"scored {self.scored} != dataset_size {self.dataset_size} - "
                f"pseudo_test_start {self.pseudo_test_start}"
            )
        trace = sum(self.confusion[i][i] for i in range(n))
        want = trace / self.scored if self.scored else 0.0
        if self.overall_accuracy != want:
            raise ValueError(
                f"overall_accuracy {self.overall_accuracy} != trace/total {want}"
            )
        for label, acc in self.per_class_accuracy.items():
            i = self.confusion_labels.index(label)
            row_total = sum(self.confusion[i])
            if row_total == 0 or acc != self.confusion[i][i] / row_total:
                raise ValueError(f"per-class accuracy inconsistent for {label!r}")

    def to_json_dict(self) -> dict:
        return {
            "schema": self.schema,
            "strategy": self.strategy,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "dataset_id": self.dataset_id,
            "dataset_size": self.dataset_size,
            "pseudo_test_start": self.pseudo_test_start,
            "scored": self.scored,
            "freeze_during_test": self.freeze_during_test,
            "class_arrival_order": list(self.class_arrival_order),
            "confusion_labels": list(self.confusion_labels),
            "confusion": [list(row) for row in self.confusion],
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": dict(self.per_class_accuracy),
            "peak_memory_bytes": self.peak_memory_bytes,
            "timing": {
                "frozen_forward": self.frozen_forward_time.to_dict(),
                "ol_step": self.ol_step_time.to_dict(),
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunReport":
        schema = d.get("schema")
        if schema != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported report schema {schema!r} (want {SCHEMA_VERSION!r})"
            )
        timing = d.get("timing", {})
        return cls(
            strategy=str(d["strategy"]),
            learning_rate=float(d["learning_rate"]),
            batch_size=int(d["batch_size"]),
            seed=int(d["seed"]),
            dataset_id=str(d["dataset_id"]),
            dataset_size=int(d["dataset_size"]),
            pseudo_test_start=int(d["pseudo_test_start"]),
            scored=int(d["scored"]),
            freeze_during_test=bool(d["freeze_during_test"]),
            class_arrival_order=[str(x) for x in d["class_arrival_order"]],
            confusion_labels=[str(x) for x in d["confusion_labels"]],
            confusion=[[int(v) for v in row] for row in d["confusion"]],
            overall_accuracy=float(d["overall_accuracy"]),
            per_class_accuracy={str(k): float(v) for k, v in d["per_class_accuracy"].items()},
            peak_memory_bytes=int(d["peak_memory_bytes"]),
            frozen_forward_time=PhaseTiming.from_dict(timing["frozen_forward"]),
            ol_step_time=PhaseTiming.from_dict(timing["ol_step"]),
            schema=str(schema),
        )


def save_report(path, report: RunReport) -> None:
    """Validate, then write JSON atomically (tmp file + rename)."""
    report.validate()
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_report(path) -> RunReport:
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        report = RunReport.from_json_dict(json.load(fh))
    report.validate()
    return report


def _column_order(reports: list[RunReport]) -> list[int]:
    ranked = {str(kind): i for i, kind in enumerate(TABLE_ORDER)}
    return sorted(
        range(len(reports)),
        key=lambda i: (ranked.get(reports[i].strategy, len(ranked)), i),
    )


@dataclass
class ComparisonTable:
    """Three metric rows by one column per run, plus per-class companions."""

    columns: list[str]
    values: list[list[float]]  # row-major, len(TABLE_ROWS) x len(columns)
    per_class_labels: list[str]
    per_class: list[list[float | None]]  # label-major, one column per run
    dataset_id: str

    def to_markdown(self) -> str:
        head = "| Metric | " + " | ".join(self.columns) + " |"
        rule = "|---" * (len(self.columns) + 1) + "|"
        lines = [head, rule]
        for name, row in zip(TABLE_ROWS, self.values):
            cells = " | ".join(f"{v:.2f}" for v in row)
            lines.append(f"| {name} | {cells} |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["metric," + ",".join(self.columns)]
        for name, row in zip(TABLE_ROWS, self.values):
            lines.append(f'"{name}",' + ",".join(f"{v:.2f}" for v in row))
        return "\n".join(lines) + "\n"

    def per_class_csv(self) -> str:
        """Per-class accuracy (%) by strategy; plot-ready companion."""
        lines = ["class," + ",".join(self.columns)]
        for label, row in zip(self.per_class_labels, self.per_class):
            cells = ",".join("" if v is None else f"{100.0 * v:.2f}" for v in row)
            lines.append(f"{label},{cells}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "dataset_id": self.dataset_id,
            "columns": list(self.columns),
            "rows": {
                name: list(row) for name, row in zip(TABLE_ROWS, self.values)
            },
            "per_class": {
                label: list(row)
                for label, row in zip(self.per_class_labels, self.per_class)
            },
        }


def compare(reports: list[RunReport]) -> ComparisonTable:
    """Build the cross-strategy table; all reports must share a dataset."""
    if not reports:
        raise ValueError("compare needs at least one report")
    for r in reports:
        if r.schema != SCHEMA_VERSION:
            raise ValueError(
                f"report schema {r.schema!r} does not match {SCHEMA_VERSION!r}"
            )
        if r.dataset_id != reports[0].dataset_id:
            raise ValueError(
                "refusing to compare reports from different datasets: "
                f"{r.dataset_id} vs {reports[0].dataset_id}"
            )
    ordered = [reports[i] for i in _column_order(reports)]
    names = [r.strategy for r in ordered]
    columns = [
        name if names.count(name) == 1 else f"{name}(s{r.seed})"
        for name, r in zip(names, ordered)
    ]
    values = [
        [100.0 * r.overall_accuracy for r in ordered],
        [1000.0 * r.ol_step_time.mean for r in ordered],
        [r.peak_memory_bytes / 1000.0 for r in ordered],
    ]
    labels: list[str] = []
    for r in ordered:
        for lb in r.per_class_accuracy:
            if lb not in labels:
                labels.append(lb)
    labels.sort()
    per_class = [
        [r.per_class_accuracy.get(lb) for r in ordered] for lb in labels
    ]
    return ComparisonTable(columns, values, labels, per_class, ordered[0].dataset_id)
