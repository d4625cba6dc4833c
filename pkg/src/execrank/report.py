"""Run reports: per-method accuracies, oracle pass@k series, selection records.

Reports are plain data, regenerable from a warm cache without endpoint
access, and serialize deterministically (no timestamps, sorted keys) so two
runs over the same cache produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


@dataclass
class RunReport:
    metadata: dict
    method_order: list[str]
    methods: dict[str, dict] = field(default_factory=dict)
    pass_at_k: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    selections: dict = field(default_factory=dict)
    quarantined: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        methods = {}
        for name in self.method_order:
            data = self.methods[name]
            methods[name] = {
                "accuracy": data["accuracy"],
                "mean_accuracy": {
                    partition: _mean(values)
                    for partition, values in data["accuracy"].items()
                },
            }
        pass_mean = {
            partition: {k: _mean(values) for k, values in series.items()}
            for partition, series in self.pass_at_k.items()
        }
        return {
            "metadata": self.metadata,
            "method_order": self.method_order,
            "methods": methods,
            "pass_at_k": self.pass_at_k,
            "pass_at_k_mean": pass_mean,
            "selections": self.selections,
            "quarantined": self.quarantined,
        }


def _write_json(report: RunReport, path: Path) -> list[Path]:
    path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return [path]


def _write_csv(report: RunReport, path: Path) -> list[Path]:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "repetition", "accuracy_original", "accuracy_extended"])
        for name in report.method_order:
            accuracy = report.methods[name]["accuracy"]
            for rep in range(len(accuracy["original"])):
                writer.writerow(
                    [name, rep, accuracy["original"][rep], accuracy["extended"][rep]]
                )
    series_path = path.with_name(path.stem + "_pass_at_k" + path.suffix)
    with series_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["partition", "k", "repetition", "pass_at_k"])
        for partition in sorted(report.pass_at_k):
            series = report.pass_at_k[partition]
            for k in sorted(series, key=int):
                for rep, value in enumerate(series[k]):
                    writer.writerow([partition, k, rep, value])
    return [path, series_path]


def _write_table(report: RunReport, path: Path) -> list[Path]:
    lines = []
    width = max([len(name) for name in report.method_order] + [len("method")])
    lines.append(f"{'method'.ljust(width)}  original  extended")
    for name in report.method_order:
        accuracy = report.methods[name]["accuracy"]
        lines.append(
            f"{name.ljust(width)}  {_mean(accuracy['original']):.4f}    "
            f"{_mean(accuracy['extended']):.4f}"
        )
    lines.append("")
    lines.append("pass@k (mean over repetitions)")
    for partition in sorted(report.pass_at_k):
        series = report.pass_at_k[partition]
        for k in sorted(series, key=int):
            lines.append(f"  {partition} k={k}: {_mean(series[k]):.4f}")
    if report.quarantined:
        lines.append("")
        lines.append(f"quarantined tasks: {len(report.quarantined)}")
        for entry in report.quarantined:
            lines.append(f"  rep {entry['rep']} {entry['task_id']}: {entry['error']}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [path]


def emit_report(report: RunReport, fmt: str, path: str | Path) -> list[Path]:
    """Write the report as ``json``, ``csv`` (two files), or a text ``table``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        return _write_json(report, path)
    if fmt == "csv":
        return _write_csv(report, path)
    if fmt == "table":
        return _write_table(report, path)
    raise ValueError(f"unknown report format: {fmt!r}")
