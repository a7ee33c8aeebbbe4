"""Reference paths: piecewise constant-curvature polylines with tangents.

Paths are built from (curvature, length) segments integrated in closed form,
then sampled on a 0.1 m arc-length grid (plus the exact endpoint). Three
shapes cover the tracking tasks: a straight line, a quarter turn with a
configurable peak curvature, and a lane change of two opposing arcs reaching
a 3.5 m lateral offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLE_SPACING = 0.1
LANE_OFFSET = 3.5
LEAD_IN = 10.0

PATH_KINDS = ("straight", "ninety_degree_turn", "lane_change")


class PathError(ValueError):
    """Raised for unbuildable paths, including curvature beyond the vehicle."""


@dataclass(frozen=True)
class PathSpec:
    kind: str
    peak_curvature: float
    points: np.ndarray      # (N, 2) positions
    headings: np.ndarray    # (N,) tangent headings, continuous
    arclengths: np.ndarray  # (N,) strictly increasing, starts at 0

    def __post_init__(self):
        if len(self.points) < 2:
            raise PathError("a path needs at least two samples")
        if np.any(np.diff(self.arclengths) <= 0):
            raise PathError("arc lengths must increase strictly")
        if np.any(np.abs(np.diff(self.headings)) > math.pi):
            raise PathError("heading jump between consecutive samples")
        self.points.setflags(write=False)
        self.headings.setflags(write=False)
        self.arclengths.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        return float(self.arclengths[-1])

    def nearest_index(self, x: float, y: float) -> int:
        d = self.points - (x, y)
        return int(np.argmin(d[:, 0] ** 2 + d[:, 1] ** 2))

    def tangent(self, i: int) -> tuple[float, float]:
        h = float(self.headings[i])
        return math.cos(h), math.sin(h)

    def window(self, i: int, ahead: float) -> "PathSpec":
        """Sub-path from sample i covering at least ``ahead`` meters of arc
        (clipped at the path end, always at least two samples)."""
        i = min(i, len(self.points) - 2)
        s_end = self.arclengths[i] + ahead
        j = int(np.searchsorted(self.arclengths, s_end)) + 1
        j = max(j, i + 2)
        return PathSpec(kind=self.kind, peak_curvature=self.peak_curvature,
                        points=self.points[i:j].copy(),
                        headings=self.headings[i:j].copy(),
                        arclengths=self.arclengths[i:j].copy())

    def to_rows(self):
        for p, h, s in zip(self.points, self.headings, self.arclengths):
            yield float(s), float(p[0]), float(p[1]), float(h)


def _advance(pose, kappa, ds):
    """Pose after ds meters along constant curvature; arc center sits 1/kappa
    to the left of the tangent."""
    x, y, h = pose
    if abs(kappa) < 1e-12:
        return (x + ds * math.cos(h), y + ds * math.sin(h), h)
    cx = x - math.sin(h) / kappa
    cy = y + math.cos(h) / kappa
    h1 = h + kappa * ds
    return (cx + math.sin(h1) / kappa, cy - math.cos(h1) / kappa, h1)


def _sample_segments(segments, spacing: float):
    """Closed-form sampling of (curvature, length) segments from the origin."""
    total = sum(L for _, L in segments)
    grid = np.arange(0.0, total, spacing)
    if total - grid[-1] > 1e-12:
        grid = np.append(grid, total)
    starts = []
    s0 = 0.0
    pose = (0.0, 0.0, 0.0)
    for kappa, L in segments:
        starts.append((s0, pose, kappa))
        pose = _advance(pose, kappa, L)
        s0 += L
    xs, ys, hs = [], [], []
    seg_idx = 0
    for s in grid:
        while seg_idx + 1 < len(starts) and s >= starts[seg_idx + 1][0] - 1e-12:
            seg_idx += 1
        s_seg, seg_pose, kappa = starts[seg_idx]
        x, y, h = _advance(seg_pose, kappa, s - s_seg)
        xs.append(x)
        ys.append(y)
        hs.append(h)
    return (np.column_stack([xs, ys]), np.asarray(hs), grid)


def make_path(kind: str, curvature: float, length: float,
              wheelbase: float = 2.7, max_steering: float = 0.6) -> PathSpec:
    """Build a reference path of the given kind and total length.

    ``curvature`` is the numeric peak curvature in 1/m (task configs map the
    low/high severity labels to numbers). Curvatures that would demand more
    steering than the vehicle has, atan(l * kappa) > delta_max, are rejected.
    """
    if length <= 0:
        raise PathError("length must be positive")
    if kind not in PATH_KINDS:
        raise PathError(f"unknown path kind {kind!r}")
    if kind != "straight":
        if curvature <= 0:
            raise PathError("turning paths need a positive peak curvature")
        if math.atan(wheelbase * curvature) > max_steering:
            raise PathError(
                f"peak curvature {curvature} needs more steering than "
                f"{max_steering} rad allows at wheelbase {wheelbase}")

    if kind == "straight":
        segments = [(0.0, length)]
        curvature = 0.0
    elif kind == "ninety_degree_turn":
        arc = (math.pi / 2) / curvature
        tail = length - LEAD_IN - arc
        if tail <= 0:
            raise PathError("length too short for the quarter turn")
        segments = [(0.0, LEAD_IN), (curvature, arc), (0.0, tail)]
    else:  # lane_change
        phi = math.acos(1.0 - LANE_OFFSET * curvature / 2.0)
        arc = phi / curvature
        tail = length - LEAD_IN - 2 * arc
        if tail <= 0:
            raise PathError("length too short for the lane change")
        segments = [(0.0, LEAD_IN), (curvature, arc), (-curvature, arc),
                    (0.0, tail)]

    points, headings, arclens = _sample_segments(segments, SAMPLE_SPACING)
    return PathSpec(kind=kind, peak_curvature=curvature, points=points,
                    headings=headings, arclengths=arclens)
