"""Dataset ingestion, filtering, stratified splitting and synthetic faces.

File formats (UTF-8, comma separated, header row required):

* legend CSV: ``submitter,image_id,label``
* landmark CSV: ``image_id,label,x0,y0,...,x67,y67`` (138 fields)
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import features as F
from .errors import DuplicateImageId, InsufficientClassCount, ParseError

EMOTIONS = ("anger", "contempt", "disgust", "fear", "happiness", "sadness",
            "surprise", "neutral")
DEFAULT_KEPT = frozenset({"happiness", "neutral"})
DEFAULT_EXCLUDED = frozenset({"jhamski", "628"})
LANDMARK_FIELDS = 2 + 2 * F.N_POINTS

# synthetic faces
MOUTH_CORNERS = (48, 54)
MID_LIP = (51, 57, 62, 66)
CORNER_RAISE = 12.0
MID_LIP_DROP = 6.0
SYNTH_SUBMITTER = "synth"


def canonical_label(label: str) -> str:
    return label.strip().lower()


@dataclass
class DatasetRecord:
    image_id: str
    label: str
    landmarks: np.ndarray
    submitter: str = ""


@dataclass
class DropCounts:
    submitter: int = 0
    label: int = 0
    missing: int = 0

    def as_tuple(self):
        return (self.submitter, self.label, self.missing)


@dataclass
class LabeledDataset:
    records: list
    class_labels: list
    dropped: DropCounts = field(default_factory=DropCounts)

    def __len__(self):
        return len(self.records)

    def labels(self) -> list:
        return [r.label for r in self.records]

    def class_counts(self) -> dict:
        c = Counter(self.labels())
        return {label: c.get(label, 0) for label in self.class_labels}

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        return LabeledDataset([self.records[i] for i in indices], list(self.class_labels))


def from_records(records: Sequence[DatasetRecord], class_labels=None) -> LabeledDataset:
    labels = sorted(class_labels if class_labels is not None else {r.label for r in records})
    return LabeledDataset(list(records), labels)


def _open_csv(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(fh)
    if next(reader, None) is None:
        fh.close()
        raise ParseError(f"{path}: missing header row")
    return fh, reader


def read_landmarks_csv(path) -> list:
    """Rows of ``(image_id, label, points)``; ids must be unique."""
    rows, seen = [], set()
    fh, reader = _open_csv(path)
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != LANDMARK_FIELDS:
                raise ParseError(
                    f"{path}:{lineno}: expected {LANDMARK_FIELDS} fields, got {len(row)}")
            image_id = row[0].strip()
            if image_id in seen:
                raise DuplicateImageId(f"{path}:{lineno}: duplicate image id {image_id!r}")
            seen.add(image_id)
            try:
                pts = np.array([float(v) for v in row[2:]]).reshape(F.N_POINTS, 2)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not np.all(np.isfinite(pts)):
                raise ParseError(f"{path}:{lineno}: non-finite coordinate")
            rows.append((image_id, canonical_label(row[1]), pts))
    return rows


def read_legend_csv(path) -> list:
    """Rows of ``(submitter, image_id, label)`` with the label canonicalized."""
    rows, seen = [], set()
    fh, reader = _open_csv(path)
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            submitter, image_id, label = (v.strip() for v in row)
            if image_id in seen:
                raise DuplicateImageId(f"{path}:{lineno}: duplicate image id {image_id!r}")
            seen.add(image_id)
            rows.append((submitter, image_id, canonical_label(label)))
    return rows


def load_legend(legend_csv, landmarks_csv,
                excluded_submitters: Iterable[str] = DEFAULT_EXCLUDED,
                kept_labels: Iterable[str] = DEFAULT_KEPT) -> LabeledDataset:
    """Join legend and landmark tables and apply the filtering rules.

    Records are dropped, in this order of precedence, for an excluded
    submitter, a label outside ``kept_labels`` or a missing landmark row; the
    drop counts are kept on the returned dataset.
    """
    excluded = {s.strip() for s in excluded_submitters}
    kept = {canonical_label(l) for l in kept_labels}
    landmarks = {image_id: pts for image_id, _, pts in read_landmarks_csv(landmarks_csv)}
    legend = read_legend_csv(legend_csv)
    unknown = set(landmarks) - {image_id for _, image_id, _ in legend}
    if unknown:
        raise ParseError(f"landmark rows reference unknown image ids: {sorted(unknown)[:5]}")

    drops = DropCounts()
    records = []
    for submitter, image_id, label in legend:
        if submitter in excluded:
            drops.submitter += 1
        elif label not in kept:
            drops.label += 1
        elif image_id not in landmarks:
            drops.missing += 1
        else:
            records.append(DatasetRecord(image_id, label, landmarks[image_id], submitter))
    ds = from_records(records)
    ds.dropped = drops
    return ds


def stratified_split(ds: LabeledDataset, val_per_class: int, seed: int = 0):
    """Move ``val_per_class`` uniformly chosen records of every class to validation.

    Both halves keep the input's record order.
    """
    rng = np.random.default_rng(seed)
    by_class = {label: [] for label in ds.class_labels}
    for i, r in enumerate(ds.records):
        by_class[r.label].append(i)
    val_idx = set()
    for label in ds.class_labels:
        idx = by_class[label]
        if len(idx) <= val_per_class:
            raise InsufficientClassCount(
                f"class {label!r} has {len(idx)} records, need more than {val_per_class}")
        chosen = rng.choice(len(idx), size=val_per_class, replace=False)
        val_idx.update(idx[j] for j in chosen)
    train = [i for i in range(len(ds)) if i not in val_idx]
    val = sorted(val_idx)
    return ds.subset(train), ds.subset(val)


def _ellipse(cx, cy, rx, ry, angles):
    return np.stack([cx + rx * np.cos(angles), cy - ry * np.sin(angles)], axis=1)


def prototype_face(label: str = "neutral") -> np.ndarray:
    """A frontal 68-point face in the 350x350 frame.

    The happy variant raises both mouth corners and lowers the lip midpoints;
    every other point is shared with the neutral face.
    """
    pts = np.zeros((F.N_POINTS, 2))
    theta = np.pi - np.arange(17) * np.pi / 16
    pts[0:17] = np.stack([175 + 90 * np.cos(theta), 150 + 150 * np.sin(theta)], axis=1)
    bx = np.linspace(0, 1, 5)
    arch = 8 * np.sin(np.pi * bx)
    pts[17:22] = np.stack([105 + 55 * bx, 118 - arch], axis=1)
    pts[22:27] = np.stack([190 + 55 * bx, 118 - arch], axis=1)
    pts[27:31] = np.stack([np.full(4, 175.0), np.linspace(135, 185, 4)], axis=1)
    pts[31:36] = np.stack([np.linspace(155, 195, 5), [195, 198, 200, 198, 195]], axis=1)
    eye = np.array([np.pi, 2 * np.pi / 3, np.pi / 3, 0, -np.pi / 3, -2 * np.pi / 3])
    pts[36:42] = _ellipse(132, 140, 15, 5, eye)
    pts[42:48] = _ellipse(218, 140, 15, 5, eye)
    pts[48:60] = _ellipse(175, 245, 35, 12, np.pi - np.arange(12) * np.pi / 6)
    pts[60:68] = _ellipse(175, 245, 22, 4, np.pi - np.arange(8) * np.pi / 4)
    if label == "happiness":
        pts[list(MOUTH_CORNERS), 1] -= CORNER_RAISE
        pts[list(MID_LIP), 1] += MID_LIP_DROP
    elif label != "neutral":
        raise ValueError(f"no prototype for {label!r}")
    return pts


def synth_generate(n_per_class: int, seed: int = 0, jitter_sigma: float = 2.0) -> LabeledDataset:
    """Jittered copies of the happy and neutral prototypes (happiness first)."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    rng = np.random.default_rng(seed)
    records = []
    for label in ("happiness", "neutral"):
        proto = prototype_face(label)
        for i in range(n_per_class):
            noise = rng.normal(0.0, jitter_sigma, size=proto.shape) if jitter_sigma > 0 else 0.0
            pts = np.clip(proto + noise, 0.0, F.FRAME_SIZE)
            records.append(DatasetRecord(f"synth_{label}_{i:05d}", label, pts, SYNTH_SUBMITTER))
    return from_records(records)


def build_tensors(ds: LabeledDataset, representation: str, augment_flip: bool = False,
                  grid_size: int = F.GRID_SIZE, class_labels: Optional[Sequence[str]] = None):
    """Feature matrix (or grid stack) and class indices for every record.

    With ``augment_flip`` (raster only) the mirrored grids are appended after
    the originals, labels repeated in the same order.
    """
    labels = list(class_labels) if class_labels is not None else ds.class_labels
    index = {label: i for i, label in enumerate(labels)}
    try:
        y = np.array([index[r.label] for r in ds.records], dtype=np.intp)
    except KeyError as exc:
        raise ValueError(f"record label {exc.args[0]!r} not among {labels}") from None
    x = np.stack([F.featurize(r.landmarks, representation, grid_size) for r in ds.records]) \
        if ds.records else np.empty((0,))
    if augment_flip:
        if representation != "raster":
            raise ValueError("flip augmentation applies to the raster representation only")
        x = np.concatenate([x, np.stack([F.hflip(g) for g in x])])
        y = np.concatenate([y, y])
    return x, y


def write_landmarks_csv(path, records: Iterable[DatasetRecord]) -> None:
    header = ["image_id", "label"] + [f"{a}{i}" for i in range(F.N_POINTS) for a in "xy"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            w.writerow([r.image_id, r.label] + [repr(float(v)) for v in np.ravel(r.landmarks)])


def write_legend_csv(path, records: Iterable[DatasetRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["submitter", "image_id", "label"])
        for r in records:
            w.writerow([r.submitter, r.image_id, r.label])
