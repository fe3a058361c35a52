"""Certainty/accuracy metrics and controller latency statistics."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import LabeledDataset, build_tensors
from .errors import DimensionMismatch, EmptyDataset, InsufficientSamples


@dataclass
class ClassMetrics:
    name: str
    images_tested: int
    certainty_sum: float
    correct: int

    @property
    def certainty_pct(self) -> float:
        return 100.0 * self.certainty_sum / self.images_tested

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * self.correct / self.images_tested


@dataclass
class MetricsReport:
    per_class: list   # ClassMetrics in model label order, classes with no records omitted
    total: ClassMetrics

    def row(self, name: str) -> ClassMetrics:
        if name == "total":
            return self.total
        return next(c for c in self.per_class if c.name == name)

    def rows(self):
        return [*self.per_class, self.total]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "images_tested", "certainty_pct", "accuracy_pct"])
        for c in self.rows():
            w.writerow([c.name, c.images_tested, f"{c.certainty_pct:.2f}", f"{c.accuracy_pct:.2f}"])
        return buf.getvalue()

    def to_table(self) -> str:
        lines = [f"{'class':<12}{'images':>8}{'certainty':>12}{'accuracy':>11}"]
        for c in self.rows():
            lines.append(f"{c.name:<12}{c.images_tested:>8}{c.certainty_pct:>11.2f}%"
                         f"{c.accuracy_pct:>10.2f}%")
        return "\n".join(lines) + "\n"


def metrics_from_probs(probs: np.ndarray, labels: Sequence[int],
                       class_labels: Sequence[str]) -> MetricsReport:
    """Per-class and pooled certainty/accuracy from a probability matrix.

    Certainty is the probability given to the true class; a prediction is
    correct when the true class is the argmax (ties go to the lower index).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if len(labels) == 0:
        raise EmptyDataset("nothing to evaluate")
    true_p = probs[np.arange(len(labels)), labels]
    hit = probs.argmax(axis=1) == labels
    per_class = []
    for k, name in enumerate(class_labels):
        sel = labels == k
        if sel.any():
            per_class.append(ClassMetrics(name, int(sel.sum()), math.fsum(true_p[sel]),
                                          int(hit[sel].sum())))
    # fsum is correctly rounded, so the result does not depend on record order
    total = ClassMetrics("total", len(labels), math.fsum(true_p), int(hit.sum()))
    return MetricsReport(per_class, total)


def evaluate(model, val: LabeledDataset, representation: str,
             grid_size: int | None = None) -> MetricsReport:
    if len(val) == 0:
        raise EmptyDataset("validation set is empty")
    kwargs = {"grid_size": grid_size or getattr(model, "grid_size", 350)}
    x, y = build_tensors(val, representation, class_labels=model.class_labels, **kwargs)
    expected = model.input_dim if representation != "raster" else None
    if expected is not None and x.shape[1] != expected:
        raise DimensionMismatch(
            f"{representation} features have {x.shape[1]} values, model expects {expected}")
    return metrics_from_probs(model.forward(x), y, model.class_labels)


@dataclass
class LatencyStats:
    count: int
    mean: float     # ms
    stddev: float   # ms, sample (n-1) estimator


def bench_latency(samples_ms: Iterable[float]) -> LatencyStats:
    xs = [float(v) for v in samples_ms]
    if len(xs) < 2:
        raise InsufficientSamples(f"need at least 2 latency samples, got {len(xs)}")
    return LatencyStats(len(xs), statistics.fmean(xs), statistics.stdev(xs))


def trace_latencies_ms(trace) -> list:
    """Per-frame controller latency from ``(frame_id, ingress_ns, egress_ns)`` rows."""
    return [(egress - ingress) / 1e6 for _, ingress, egress in trace]
