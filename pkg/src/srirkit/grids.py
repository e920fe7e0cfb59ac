"""Virtual loudspeaker grids: construction, triangulation, direction queries."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def _check_unit(directions: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    dirs = np.asarray(directions, dtype=np.float64)
    if dirs.ndim != 2 or dirs.shape[1] != 3:
        raise ValueError(f"directions must be (n, 3), got {dirs.shape}")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("all grid directions must be unit vectors")
    return dirs


@dataclass(frozen=True)
class LoudspeakerGrid:
    """Unit directions plus a convex-hull triangulation covering the sphere."""

    directions: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        dirs = _check_unit(self.directions)
        if dirs.shape[0] < 4:
            raise ValueError("a grid needs at least 4 directions")
        tris = np.asarray(self.triangles, dtype=np.intp)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError(f"triangles must be (m, 3), got {tris.shape}")
        if tris.min() < 0 or tris.max() >= dirs.shape[0]:
            raise ValueError("triangle indices out of range")
        # Origin strictly inside the hull <=> every ray hits a facet, i.e.
        # the triangulation covers the whole sphere. Facet winding is
        # arbitrary, so orient normals outward via the vertex centroid
        # (inside the hull by convexity) before testing the origin.
        corners = dirs[tris]
        normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        offsets = np.einsum("ij,ij->i", normals, corners[:, 0])
        centroid_side = normals @ dirs.mean(axis=0)
        flip = centroid_side > offsets
        offsets = np.where(flip, -offsets, offsets)
        if np.any(offsets <= 1e-12):
            raise ValueError("triangulation does not enclose the origin")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "triangles", tris)

    def __len__(self) -> int:
        return int(self.directions.shape[0])

    @cached_property
    def triangle_basis_inverses(self) -> np.ndarray:
        """Per-triangle inverse of the loudspeaker basis, shape (m, 3, 3).

        ``inv[t] @ direction`` yields the raw VBAP gains for triangle t.
        """
        bases = self.directions[self.triangles].transpose(0, 2, 1)  # columns = speakers
        return np.linalg.inv(bases)

    @cached_property
    def triangle_determinants(self) -> np.ndarray:
        bases = self.directions[self.triangles].transpose(0, 2, 1)
        return np.linalg.det(bases)


def grid_from_directions(directions: np.ndarray) -> LoudspeakerGrid:
    """Triangulate arbitrary unit directions by their convex hull."""
    dirs = _check_unit(np.asarray(directions, dtype=np.float64), tol=1e-6)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    hull = ConvexHull(dirs)
    return LoudspeakerGrid(dirs, hull.simplices)


def fibonacci_grid(n: int) -> LoudspeakerGrid:
    """Near-uniform grid of n directions on the golden-angle spiral."""
    if n < 4:
        raise ValueError(f"need at least 4 directions, got {n}")
    i = np.arange(n)
    z = (2.0 * i + 1.0) / n - 1.0
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = i * _GOLDEN_ANGLE
    dirs = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
    return grid_from_directions(dirs)


def nearest_direction(direction, grid: LoudspeakerGrid, k: int = 1) -> list[int]:
    """Indices of the k grid directions closest in angle, nearest first.

    Ties break deterministically toward the lower index.
    """
    if not 1 <= k <= len(grid):
        raise ValueError(f"k must be in [1, {len(grid)}], got {k}")
    u = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(u)
    if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    u = u / norm
    angles = np.arccos(np.clip(grid.directions @ u, -1.0, 1.0))
    order = np.argsort(angles, kind="stable")
    return [int(j) for j in order[:k]]


def angular_distance(a, b) -> float:
    """Angle in radians between two unit vectors."""
    return float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))


def load_grid_csv(path) -> LoudspeakerGrid:
    """Grid from a CSV of unit vectors (x,y,z) or (azimuth_deg, elevation_deg).

    Lines starting with ``#`` are comments. Row format is detected from the
    column count and must be consistent across the file.
    """
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        rows.append([float(p) for p in parts])
    if not rows:
        raise ValueError(f"{path}: no grid rows found")
    widths = {len(r) for r in rows}
    if widths == {3}:
        dirs = np.asarray(rows)
    elif widths == {2}:
        az = np.radians([r[0] for r in rows])
        el = np.radians([r[1] for r in rows])
        dirs = np.stack(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1
        )
    else:
        raise ValueError(f"{path}: rows must have 2 or 3 columns, got widths {sorted(widths)}")
    return grid_from_directions(dirs)


def save_grid_csv(grid: LoudspeakerGrid, path) -> None:
    lines = ["# x,y,z"]
    for d in grid.directions:
        lines.append(f"{d[0]:.12f},{d[1]:.12f},{d[2]:.12f}")
    Path(path).write_text("\n".join(lines) + "\n")


def direction_from_azel(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Unit vector for azimuth (counterclockwise from +X toward +Y) and elevation."""
    az, el = np.radians(azimuth_deg), np.radians(elevation_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
