"""Raster memory of ground already seen by the camera.

Backs the footprint-overlap penalty used by the planner's reward and the
coverage statistics used by the mission harness. Cells are binary
seen-flags; once set they never clear within a run. Tree search works on
throwaway copies of the cell array (`snapshot`), never on the live map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Footprint


@dataclass
class Rect:
    """Axis-aligned rectangle, min/max corners."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("rectangle has negative extent")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def manhattan_diagonal(self) -> float:
        """Manhattan distance between the min and max corners."""
        return self.width + self.height


@dataclass
class CoverageMap:
    """Seen-flag raster covering the survey area plus a margin.

    ``cells[iy, ix]`` is 1 when the cell centre has been inside some stamped
    footprint. The margin should be at least one footprint so that stamps
    near the survey edge are not clipped.
    """

    survey: Rect
    cell_size: float = 0.5
    margin: float = 10.0
    origin_x: float = field(init=False)
    origin_y: float = field(init=False)
    nx: int = field(init=False)
    ny: int = field(init=False)
    cells: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.origin_x = self.survey.x_min - self.margin
        self.origin_y = self.survey.y_min - self.margin
        self.nx = int(math.ceil((self.survey.width + 2 * self.margin) / self.cell_size))
        self.ny = int(math.ceil((self.survey.height + 2 * self.margin) / self.cell_size))
        self.cells = np.zeros((self.ny, self.nx), dtype=np.uint8)

    # -- index helpers -------------------------------------------------

    def _col_range(self, x_min: float, x_max: float) -> tuple[int, int]:
        """Columns whose centres fall in [x_min, x_max], clipped to the map."""
        lo = int(math.ceil((x_min - self.origin_x) / self.cell_size - 0.5))
        hi = int(math.floor((x_max - self.origin_x) / self.cell_size - 0.5))
        return max(lo, 0), min(hi, self.nx - 1)

    def _row_range(self, y_min: float, y_max: float) -> tuple[int, int]:
        lo = int(math.ceil((y_min - self.origin_y) / self.cell_size - 0.5))
        hi = int(math.floor((y_max - self.origin_y) / self.cell_size - 0.5))
        return max(lo, 0), min(hi, self.ny - 1)

    def snapshot(self) -> np.ndarray:
        """Copy of the cell array for use as a search-time scratch view."""
        return self.cells.copy()

    # -- stamping ------------------------------------------------------

    def stamp_footprint(self, fp: Footprint, cells: np.ndarray | None = None) -> None:
        """Set every cell whose centre lies inside the footprint.

        Out-of-map portions are clipped silently. ``cells`` lets the planner
        stamp a private snapshot instead of the live map.
        """
        target = self.cells if cells is None else cells
        x0, y0, x1, y1 = fp.bbox()
        c0, c1 = self._col_range(x0, x1)
        r0, r1 = self._row_range(y0, y1)
        if c0 > c1 or r0 > r1:
            return
        if self._axis_aligned(fp):
            target[r0:r1 + 1, c0:c1 + 1] = 1
            return
        # general convex quad: vectorized half-plane test on cell centres
        cx = self.origin_x + (np.arange(c0, c1 + 1) + 0.5) * self.cell_size
        cy = self.origin_y + (np.arange(r0, r1 + 1) + 0.5) * self.cell_size
        gx, gy = np.meshgrid(cx, cy)
        inside = np.ones(gx.shape, dtype=bool)
        cs = fp.corners
        for i in range(len(cs)):
            ax, ay = cs[i]
            bx, by = cs[(i + 1) % len(cs)]
            inside &= (bx - ax) * (gy - ay) - (by - ay) * (gx - ax) >= -1e-12
        target[r0:r1 + 1, c0:c1 + 1][inside] = 1

    def stamp_rect(self, x0: float, y0: float, x1: float, y1: float,
                   cells: np.ndarray | None = None) -> None:
        """Fast path for axis-aligned footprints (the yaw = 0 flight case)."""
        target = self.cells if cells is None else cells
        c0, c1 = self._col_range(x0, x1)
        r0, r1 = self._row_range(y0, y1)
        if c0 <= c1 and r0 <= r1:
            target[r0:r1 + 1, c0:c1 + 1] = 1

    # -- queries -------------------------------------------------------

    def overlap_fraction(self, fp: Footprint, cells: np.ndarray | None = None) -> float:
        """Fraction of the footprint's cells already seen (0 virgin, 1 fully
        revisited). A footprint covering zero cells counts as fully seen so
        degenerate views are never rewarded."""
        source = self.cells if cells is None else cells
        x0, y0, x1, y1 = fp.bbox()
        c0, c1 = self._col_range(x0, x1)
        r0, r1 = self._row_range(y0, y1)
        if c0 > c1 or r0 > r1:
            return 1.0
        if self._axis_aligned(fp):
            block = source[r0:r1 + 1, c0:c1 + 1]
            return float(np.count_nonzero(block)) / block.size
        cx = self.origin_x + (np.arange(c0, c1 + 1) + 0.5) * self.cell_size
        cy = self.origin_y + (np.arange(r0, r1 + 1) + 0.5) * self.cell_size
        gx, gy = np.meshgrid(cx, cy)
        inside = np.ones(gx.shape, dtype=bool)
        cs = fp.corners
        for i in range(len(cs)):
            ax, ay = cs[i]
            bx, by = cs[(i + 1) % len(cs)]
            inside &= (bx - ax) * (gy - ay) - (by - ay) * (gx - ax) >= -1e-12
        n = int(np.count_nonzero(inside))
        if n == 0:
            return 1.0
        return float(np.count_nonzero(source[r0:r1 + 1, c0:c1 + 1][inside])) / n

    def rect_overlap(self, x0: float, y0: float, x1: float, y1: float,
                     cells: np.ndarray | None = None) -> float:
        """`overlap_fraction` fast path for axis-aligned rectangles."""
        source = self.cells if cells is None else cells
        c0, c1 = self._col_range(x0, x1)
        r0, r1 = self._row_range(y0, y1)
        if c0 > c1 or r0 > r1:
            return 1.0
        block = source[r0:r1 + 1, c0:c1 + 1]
        return float(np.count_nonzero(block)) / block.size

    def coverage_ratio(self, survey: Rect | None = None) -> float:
        """Fraction of survey-area cells seen so far."""
        rect = self.survey if survey is None else survey
        c0, c1 = self._col_range(rect.x_min, rect.x_max)
        r0, r1 = self._row_range(rect.y_min, rect.y_max)
        if c0 > c1 or r0 > r1:
            return 0.0
        block = self.cells[r0:r1 + 1, c0:c1 + 1]
        return float(np.count_nonzero(block)) / block.size

    # -- export --------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# x,y,seen\n")
            for iy in range(self.ny):
                y = self.origin_y + (iy + 0.5) * self.cell_size
                for ix in range(self.nx):
                    x = self.origin_x + (ix + 0.5) * self.cell_size
                    fh.write(f"{x:.3f},{y:.3f},{int(self.cells[iy, ix])}\n")

    def to_pgm(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"P2\n{self.nx} {self.ny}\n255\n")
            for iy in range(self.ny - 1, -1, -1):  # north-up image
                fh.write(" ".join("255" if v else "0" for v in self.cells[iy]) + "\n")

    # -- internals -----------------------------------------------------

    @staticmethod
    def _axis_aligned(fp: Footprint) -> bool:
        xs = {round(c[0], 9) for c in fp.corners}
        ys = {round(c[1], 9) for c in fp.corners}
        return len(xs) == 2 and len(ys) == 2
