"""Confusion matrices, precision/recall/F1/accuracy, and report rendering.

Aggregates are support-weighted by default, under which aggregate recall
is algebraically identical to accuracy. A macro mode exists behind a flag.
Degenerate denominators (a class never predicted, or absent from the gold
labels) yield 0 with a flag instead of a division error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, Label
from .models.training import LABEL_ORDER, ModelHandle, predict

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "EvaluationError",
    "confusion",
    "precision",
    "recall",
    "f1",
    "aggregate_metrics",
    "evaluate",
    "render_report",
]

_INDEX = {l: i for i, l in enumerate(LABEL_ORDER)}


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows are gold labels, columns predictions, order NAG/OAG/CAG."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.shape != (3, 3) or (cells < 0).any():
            raise EvaluationError("confusion matrix must be 3x3 non-negative")
        object.__setattr__(self, "cells", cells)

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    def support(self, label: Label) -> int:
        return int(self.cells[_INDEX[label]].sum())

    def tp(self, label: Label) -> int:
        i = _INDEX[label]
        return int(self.cells[i, i])

    def fp(self, label: Label) -> int:
        i = _INDEX[label]
        return int(self.cells[:, i].sum() - self.cells[i, i])

    def fn(self, label: Label) -> int:
        i = _INDEX[label]
        return int(self.cells[i].sum() - self.cells[i, i])

    def tn(self, label: Label) -> int:
        return self.total - self.tp(label) - self.fp(label) - self.fn(label)


def confusion(golds: list[Label], preds: list[Label]) -> ConfusionMatrix:
    if len(golds) != len(preds):
        raise EvaluationError(
            f"gold/prediction length mismatch: {len(golds)} vs {len(preds)}"
        )
    if not golds:
        raise EvaluationError("cannot build a confusion matrix from zero samples")
    cells = np.zeros((3, 3), dtype=np.int64)
    for g, p in zip(golds, preds):
        cells[_INDEX[g], _INDEX[p]] += 1
    return ConfusionMatrix(cells)


def _ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def precision(cm: ConfusionMatrix, label: Label) -> float:
    return _ratio(cm.tp(label), cm.tp(label) + cm.fp(label))[0]


def recall(cm: ConfusionMatrix, label: Label) -> float:
    return _ratio(cm.tp(label), cm.tp(label) + cm.fn(label))[0]


def f1(cm: ConfusionMatrix, label: Label) -> float:
    p = precision(cm, label)
    r = recall(cm, label)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass
class MetricReport:
    per_class: dict[str, dict[str, float]]  # label -> {precision, recall, f1, support}
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str = "weighted"
    degenerate: list[str] = field(default_factory=list)
    model_kind: str | None = None
    variant: str | None = None
    language: str | None = None

    def to_manifest(self) -> dict:
        return {
            "per_class": self.per_class,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "averaging": self.averaging,
            "degenerate": self.degenerate,
            "model_kind": self.model_kind,
            "variant": self.variant,
            "language": self.language,
        }


def aggregate_metrics(cm: ConfusionMatrix, averaging: str = "weighted") -> MetricReport:
    """Per-class metrics plus aggregates; weighted recall equals accuracy."""
    if cm.total == 0:
        raise EvaluationError("empty confusion matrix")
    if averaging not in ("weighted", "macro"):
        raise EvaluationError(f"unknown averaging {averaging!r}")
    per_class = {}
    degenerate = []
    values = {"precision": [], "recall": [], "f1": []}
    supports = []
    for label in LABEL_ORDER:
        p, p_flag = _ratio(cm.tp(label), cm.tp(label) + cm.fp(label))
        r, r_flag = _ratio(cm.tp(label), cm.tp(label) + cm.fn(label))
        f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        if p_flag:
            degenerate.append(f"{label.value}:precision")
        if r_flag:
            degenerate.append(f"{label.value}:recall")
        per_class[label.value] = {
            "precision": p,
            "recall": r,
            "f1": f,
            "support": cm.support(label),
        }
        values["precision"].append(p)
        values["recall"].append(r)
        values["f1"].append(f)
        supports.append(cm.support(label))
    supports_arr = np.array(supports, dtype=float)
    if averaging == "weighted":
        weights = supports_arr / supports_arr.sum()
    else:
        present = supports_arr > 0
        weights = present / present.sum()
    agg = {k: float(np.dot(weights, v)) for k, v in values.items()}
    accuracy = float(np.trace(cm.cells)) / cm.total
    if averaging == "weighted":
        # sum_i (s_i/N)(tp_i/s_i) = sum_i tp_i / N: support-weighted recall
        # is accuracy by algebra; computing it that way keeps them exactly
        # equal in floating point too.
        agg["recall"] = accuracy
    return MetricReport(
        per_class=per_class,
        accuracy=accuracy,
        precision=agg["precision"],
        recall=agg["recall"],
        f1=agg["f1"],
        averaging=averaging,
        degenerate=degenerate,
    )


def evaluate(
    handle: ModelHandle,
    test_corpus: Corpus,
    train_ids: set[str] | None = None,
    batch_size: int = 64,
    variant: str | None = None,
) -> tuple[MetricReport, ConfusionMatrix]:
    """Predict batch-wise over the test corpus and score the predictions.

    When the training id set is supplied, any overlap with the test corpus
    is an error (the paper's protocol evaluates on unseen data only).
    """
    if train_ids is not None:
        overlap = sorted(train_ids & test_corpus.ids())
        if overlap:
            raise EvaluationError(
                f"train/test overlap for {len(overlap)} ids: {overlap[:10]}"
            )
    if len(test_corpus) == 0:
        raise EvaluationError("empty test corpus")
    texts = [c.text for c in test_corpus]
    golds = [c.label for c in test_corpus]
    preds: list[Label] = []
    for start in range(0, len(texts), batch_size):
        batch = handle.encode(texts[start : start + batch_size])
        _, labels = predict(handle, batch)
        preds.extend(labels)
    cm = confusion(golds, preds)
    report = aggregate_metrics(cm)
    report.model_kind = handle.spec.kind.value
    report.language = (
        handle.spec.language.value if handle.spec.language is not None else None
    )
    report.variant = variant
    return report, cm


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_report(
    runs: list[tuple],
    out_dir: str | Path,
    plots: bool = False,
) -> list[Path]:
    """Emit the metrics table, per-run accuracy curves, and confusion matrices.

    ``runs`` is a list of (TrainingRun, MetricReport, ConfusionMatrix)
    triples. Table cells are rendered to 2 decimals; a JSON file keeps
    full precision. Returns the written paths.
    """
    if not runs:
        raise EvaluationError("render_report needs at least one run")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    table_path = out_dir / "metrics_table.tsv"
    lines = ["model\tlanguage\tvariant\taccuracy\tprecision\trecall\tf1"]
    ordered = sorted(
        runs,
        key=lambda r: (r[1].variant or "", r[1].model_kind or "", r[1].language or ""),
    )
    for _, report, _ in ordered:
        lines.append(
            "\t".join(
                [
                    report.model_kind or "?",
                    report.language or "?",
                    report.variant or "?",
                    _fmt(report.accuracy),
                    _fmt(report.precision),
                    _fmt(report.recall),
                    _fmt(report.f1),
                ]
            )
        )
    table_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(table_path)

    json_path = out_dir / "metrics_full.json"
    json_path.write_text(
        json.dumps(
            [report.to_manifest() for _, report, _ in ordered],
            indent=2,
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    written.append(json_path)

    for run, report, cm in ordered:
        stem = f"{report.model_kind}_{report.language}_{report.variant}"
        curve_path = out_dir / f"curve_{stem}.tsv"
        rows = ["epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy"]
        for e in range(run.epochs_trained):
            rows.append(
                f"{e}\t{run.train_loss[e]:.6f}\t{run.train_accuracy[e]:.6f}"
                f"\t{run.val_loss[e]:.6f}\t{run.val_accuracy[e]:.6f}"
            )
        curve_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(curve_path)

        cm_path = out_dir / f"confusion_{stem}.tsv"
        header = "gold\\pred\t" + "\t".join(l.value for l in LABEL_ORDER)
        cm_rows = [header]
        for i, label in enumerate(LABEL_ORDER):
            cm_rows.append(
                label.value + "\t" + "\t".join(str(int(v)) for v in cm.cells[i])
            )
        cm_path.write_text("\n".join(cm_rows) + "\n", encoding="utf-8")
        written.append(cm_path)

        if plots:
            written.extend(_render_plots(run, cm, out_dir, stem))
    return written


def _render_plots(run, cm: ConfusionMatrix, out_dir: Path, stem: str) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    fig, ax = plt.subplots()
    epochs = range(run.epochs_trained)
    ax.plot(epochs, run.train_accuracy, label="train")
    ax.plot(epochs, run.val_accuracy, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.legend()
    curve_png = out_dir / f"curve_{stem}.png"
    fig.savefig(curve_png)
    plt.close(fig)
    paths.append(curve_png)

    fig, ax = plt.subplots()
    ax.imshow(cm.cells, cmap="Blues")
    ticks = [l.value for l in LABEL_ORDER]
    ax.set_xticks(range(3), ticks)
    ax.set_yticks(range(3), ticks)
    for i in range(3):
        for j in range(3):
            ax.text(j, i, str(int(cm.cells[i, j])), ha="center", va="center")
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    cm_png = out_dir / f"confusion_{stem}.png"
    fig.savefig(cm_png)
    plt.close(fig)
    paths.append(cm_png)
    return paths
