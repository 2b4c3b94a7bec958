"""2-D occupancy grid, cell traversal along segments, and edge generation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

FREE, OCCUPIED, UNKNOWN = 0, 1, -1
_CHARS = {FREE: ".", OCCUPIED: "#", UNKNOWN: "?"}
_CODES = {v: k for k, v in _CHARS.items()}


@dataclass
class OccupancyGrid:
    resolution: float
    origin: tuple[float, float]  # world (x, y) of the corner of cell (0, 0)
    cells: np.ndarray  # (rows=y, cols=x) int8

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("grid resolution must be positive")
        self.cells = np.asarray(self.cells, dtype=np.int8)

    @classmethod
    def empty(cls, width: int, height: int, resolution: float = 0.1,
              origin=(0.0, 0.0), fill: int = FREE) -> "OccupancyGrid":
        return cls(resolution, tuple(origin), np.full((height, width), fill, dtype=np.int8))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((x - self.origin[0]) / self.resolution)),
                int(math.floor((y - self.origin[1]) / self.resolution)))

    def inside(self, cx: int, cy: int) -> bool:
        return 0 <= cy < self.cells.shape[0] and 0 <= cx < self.cells.shape[1]

    def is_occupied(self, cx: int, cy: int) -> bool:
        return self.inside(cx, cy) and self.cells[cy, cx] == OCCUPIED

    def mark_segment(self, p0, p1, value: int = OCCUPIED) -> None:
        for cx, cy in traverse(self, p0, p1):
            if self.inside(cx, cy):
                self.cells[cy, cx] = value

    def to_text(self) -> str:
        header = (f"resolution {self.resolution!r}\norigin {self.origin[0]!r} {self.origin[1]!r}\n"
                  f"size {self.cells.shape[1]} {self.cells.shape[0]}\n")
        rows = ("".join(_CHARS[int(v)] for v in row) for row in self.cells)
        return header + "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "OccupancyGrid":
        lines = text.splitlines()
        res = float(lines[0].split()[1])
        ox, oy = (float(v) for v in lines[1].split()[1:3])
        w, h = (int(v) for v in lines[2].split()[1:3])
        rows = lines[3 : 3 + h]
        if len(rows) != h or any(len(r) != w for r in rows):
            raise ValueError("grid raster does not match its declared size")
        cells = np.array([[_CODES[c] for c in r] for r in rows], dtype=np.int8)
        return cls(res, (ox, oy), cells)


def traverse(grid: OccupancyGrid, p0, p1) -> list[tuple[int, int]]:
    """Every cell the segment p0 -> p1 passes through (incremental
    Amanatides-Woo walk), in order, including both end cells."""
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    cx, cy = grid.cell_of(x0, y0)
    ex, ey = grid.cell_of(x1, y1)
    cells = [(cx, cy)]
    dx, dy = x1 - x0, y1 - y0
    res = grid.resolution
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    if dx != 0:
        bx = grid.origin[0] + (cx + (step_x > 0)) * res
        t_max_x, t_dx = (bx - x0) / dx, res / abs(dx)
    else:
        t_max_x, t_dx = math.inf, math.inf
    if dy != 0:
        by = grid.origin[1] + (cy + (step_y > 0)) * res
        t_max_y, t_dy = (by - y0) / dy, res / abs(dy)
    else:
        t_max_y, t_dy = math.inf, math.inf
    n = abs(ex - cx) + abs(ey - cy)
    for _ in range(n):
        if cy == ey or (cx != ex and t_max_x < t_max_y):
            cx += step_x
            t_max_x += t_dx
        else:
            cy += step_y
            t_max_y += t_dy
        cells.append((cx, cy))
    return cells


def line_of_sight(grid: OccupancyGrid, p0, p1) -> bool:
    return not any(grid.is_occupied(cx, cy) for cx, cy in traverse(grid, p0, p1))


def generate_edges(nodes, grid: OccupancyGrid | None, max_distance: float = 2.0):
    """Pairs (a, b), a < b, within ``max_distance`` and with no occupied cell between.

    ``nodes`` is an iterable of objects with ``id`` and ``pos``.
    """
    nodes = sorted(nodes, key=lambda n: n.id)
    out = []
    for na, nb in combinations(nodes, 2):
        if np.linalg.norm(np.asarray(na.pos) - np.asarray(nb.pos)) > max_distance:
            continue
        if grid is not None and not line_of_sight(grid, na.pos[:2], nb.pos[:2]):
            continue
        out.append((na.id, nb.id))
    return out
