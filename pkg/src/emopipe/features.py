"""Landmark feature representations: absolute, modified (part-relative), raster.

Landmark indices follow the usual 68-point layout: jaw 0-16, right brow
17-21, left brow 22-26, nose 27-35, right eye 36-41, left eye 42-47 and
mouth 48-67.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyPart

N_POINTS = 68
FRAME_SIZE = 350.0
GRID_SIZE = 350

JAW = np.arange(0, 17)
RIGHT_BROW = np.arange(17, 22)
LEFT_BROW = np.arange(22, 27)
NOSE = np.arange(27, 36)
RIGHT_EYE = np.arange(36, 42)
LEFT_EYE = np.arange(42, 48)
MOUTH = np.arange(48, 68)

ABSOLUTE_DIM = 2 * N_POINTS
MODIFIED_DIM = 4 + (2 + 2 * len(MOUTH)) + (2 + 2 * len(NOSE)) \
    + 2 * (2 + 2 * len(RIGHT_EYE) + 2 * len(RIGHT_BROW))

REPRESENTATIONS = ("absolute", "modified", "raster")


def as_landmarks(points) -> np.ndarray:
    """Validate and return a (68, 2) float64 array."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape != (N_POINTS, 2):
        pts = pts.reshape(-1, 2) if pts.size == 2 * N_POINTS else pts
    if pts.shape != (N_POINTS, 2):
        raise ValueError(f"a landmark set has {N_POINTS} (x, y) points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("landmark coordinates must be finite")
    return pts


def absolute_features(points) -> np.ndarray:
    """Interleaved x0, y0, x1, y1, ... scaled by the 350 px frame size."""
    return as_landmarks(points).reshape(-1) / FRAME_SIZE


def part_center(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyPart("cannot take the center of an empty part")
    return pts.mean(axis=0)


def modified_features(points) -> np.ndarray:
    """Face-outline box plus per-part centers and center-relative offsets.

    Layout (114 values, all divided by 350)::

        face_cx, face_cy, face_w, face_h,
        mouth center, mouth 48-67 relative,
        nose center, nose 27-35 relative,
        right-eye center, right eye 36-41 relative, right brow 17-21 rel. to right eye,
        left-eye center, left eye 42-47 relative, left brow 22-26 rel. to left eye
    """
    pts = as_landmarks(points)
    jaw = pts[JAW]
    lo, hi = jaw.min(axis=0), jaw.max(axis=0)
    chunks = [(lo + hi) / 2.0, hi - lo]

    for part in (MOUTH, NOSE):
        c = part_center(pts[part])
        chunks += [c, (pts[part] - c).reshape(-1)]
    for eye, brow in ((RIGHT_EYE, RIGHT_BROW), (LEFT_EYE, LEFT_BROW)):
        c = part_center(pts[eye])
        chunks += [c, (pts[eye] - c).reshape(-1), (pts[brow] - c).reshape(-1)]

    out = np.concatenate(chunks) / FRAME_SIZE
    assert out.shape == (MODIFIED_DIM,)
    return out


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def rasterize(points, grid_size: int = GRID_SIZE) -> np.ndarray:
    """Binary occupancy grid, ``grid[row=y, col=x] = 1`` per landmark.

    Coordinates are scaled from the 350 px frame to ``grid_size`` (a no-op at
    the default size), rounded half away from zero and clamped to the grid.
    """
    pts = as_landmarks(points)
    if grid_size != FRAME_SIZE:
        pts = pts * (grid_size / FRAME_SIZE)
    idx = np.clip(_round_half_away(pts), 0, grid_size - 1).astype(np.intp)
    grid = np.zeros((grid_size, grid_size), dtype=np.uint8)
    grid[idx[:, 1], idx[:, 0]] = 1
    return grid


def hflip(grid: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(grid)[:, ::-1])


def featurize(points, representation: str, grid_size: int = GRID_SIZE) -> np.ndarray:
    if representation == "absolute":
        return absolute_features(points)
    if representation == "modified":
        return modified_features(points)
    if representation == "raster":
        return rasterize(points, grid_size)
    raise ValueError(f"unknown representation {representation!r}")


def feature_dim(representation: str) -> int:
    return {"absolute": ABSOLUTE_DIM, "modified": MODIFIED_DIM}[representation]
