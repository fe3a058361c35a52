"""Frame sources for the input worker and the landmark-extractor interface."""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional, Protocol

import numpy as np

from .. import data
from ..errors import EmopipeError, SourceReadError
from ..wire import Image, Landmarks, Payload


class FrameSource(Protocol):
    def frames(self) -> Iterator[Payload]:
        """Validate the source and return an iterator of payloads (frame ids from 0)."""


@dataclass
class SyntheticStream:
    """Alternating happy/neutral synthetic faces."""

    seed: int = 0
    count: int = 100
    jitter_sigma: float = 2.0

    def landmark_sets(self) -> list:
        per_class = max(1, math.ceil(self.count / 2))
        ds = data.synth_generate(per_class, self.seed, self.jitter_sigma)
        happy, neutral = ds.records[:per_class], ds.records[per_class:]
        interleaved = [r for pair in zip(happy, neutral) for r in pair]
        return [r.landmarks for r in interleaved[:self.count]]

    def frames(self):
        sets = self.landmark_sets()
        return (Landmarks(i, pts) for i, pts in enumerate(sets))


@dataclass
class LandmarkReplay:
    """Replays rows of a landmark CSV; ``rate`` in frames/s, None for unthrottled."""

    path: str
    rate: Optional[float] = None

    def frames(self):
        try:
            rows = data.read_landmarks_csv(self.path)
        except (EmopipeError, OSError) as exc:
            raise SourceReadError(f"cannot replay {self.path}: {exc}") from exc
        return self._iter(rows)

    def _iter(self, rows):
        for i, (_, _, pts) in enumerate(rows):
            if self.rate and i:
                time.sleep(1.0 / self.rate)
            yield Landmarks(i, pts)


@dataclass
class ImageDirectory:
    """Every file in ``path`` (sorted by name) as an opaque image payload."""

    path: str
    pattern: str = "*"

    def frames(self):
        root = Path(self.path)
        if not root.is_dir():
            raise SourceReadError(f"{self.path} is not a directory")
        files = sorted(p for p in root.glob(self.pattern) if p.is_file())
        return (Image(i, p.read_bytes()) for i, p in enumerate(files))


@dataclass
class CaptureSource:
    """Plugin hook for live capture: ``grab()`` returns encoded image bytes or None to stop."""

    grab: Callable[[], Optional[bytes]]
    count: Optional[int] = None

    def frames(self):
        def _iter():
            i = 0
            while self.count is None or i < self.count:
                img = self.grab()
                if img is None:
                    return
                yield Image(i, img)
                i += 1
        return _iter()


class LandmarkExtractor(Protocol):
    def extract(self, image: bytes) -> Optional[np.ndarray]:
        """68x2 landmarks for the face in ``image``, or None when no face is found."""


@dataclass
class LookupExtractor:
    """Extractor backed by precomputed landmarks keyed by the image's SHA-256."""

    table: dict = field(default_factory=dict)

    @staticmethod
    def key(image: bytes) -> str:
        return hashlib.sha256(image).hexdigest()

    def add(self, image: bytes, points) -> None:
        self.table[self.key(image)] = np.asarray(points, dtype=np.float64)

    def extract(self, image: bytes):
        return self.table.get(self.key(image))
