"""Uniform Cartesian partitions of a rectangle.

Cells are labelled lexicographically with the x-index running fastest, so the
cell at grid position ``(ix, iy)`` has label ``ix + nx * iy``.  With this
ordering every interior edge normal (taken from the lower-labelled cell) is
either ``(1, 0)`` or ``(0, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Direction = Literal["+x", "-x", "+y", "-y"]

# Boundary sides of the rectangle, with their outward normals.
SIDES = ("west", "east", "south", "north")
SIDE_NORMALS = {
    "west": (-1.0, 0.0),
    "east": (1.0, 0.0),
    "south": (0.0, -1.0),
    "north": (0.0, 1.0),
}


@dataclass(frozen=True)
class RectDomain:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)


@dataclass(frozen=True)
class BoundaryMarker:
    """Returned by :meth:`CartesianMesh.neighbor` when a step leaves the domain."""

    side: str
    cell: int


@dataclass(frozen=True)
class Edge:
    axis: int  # 0: normal along x (vertical edge), 1: normal along y
    cell_minus: int
    cell_plus: int | None
    normal: tuple[float, float]
    midpoint: tuple[float, float]
    length: float

    @property
    def is_boundary(self) -> bool:
        return self.cell_plus is None


@dataclass(frozen=True)
class CartesianMesh:
    domain: RectDomain
    nx: int
    ny: int
    hx: float = field(init=False)
    hy: float = field(init=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be positive, got {self.nx}x{self.ny}")
        d = self.domain
        object.__setattr__(self, "hx", (d.x_hi - d.x_lo) / self.nx)
        object.__setattr__(self, "hy", (d.y_hi - d.y_lo) / self.ny)

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def h(self) -> float:
        """Cell diameter."""
        return math.hypot(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def label(self, ix: int, iy: int) -> int:
        return ix + self.nx * iy

    def index(self, cell: int) -> tuple[int, int]:
        return cell % self.nx, cell // self.nx

    @property
    def cells(self) -> np.ndarray:
        return np.arange(self.ncells)

    def cell_origins(self) -> np.ndarray:
        """Lower-left corners of all cells, shape ``(ncells, 2)``."""
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="xy")
        x0 = self.domain.x_lo + ix.ravel() * self.hx
        y0 = self.domain.y_lo + iy.ravel() * self.hy
        return np.column_stack([x0, y0])

    def cell_centers(self) -> np.ndarray:
        return self.cell_origins() + 0.5 * np.array([self.hx, self.hy])

    def neighbor(self, cell: int, direction: Direction) -> int | BoundaryMarker:
        if not 0 <= cell < self.ncells:
            raise IndexError(f"cell {cell} out of range")
        ix, iy = self.index(cell)
        if direction == "+x":
            return self.label(ix + 1, iy) if ix + 1 < self.nx else BoundaryMarker("east", cell)
        if direction == "-x":
            return self.label(ix - 1, iy) if ix > 0 else BoundaryMarker("west", cell)
        if direction == "+y":
            return self.label(ix, iy + 1) if iy + 1 < self.ny else BoundaryMarker("north", cell)
        if direction == "-y":
            return self.label(ix, iy - 1) if iy > 0 else BoundaryMarker("south", cell)
        raise ValueError(f"unknown direction {direction!r}")

    def boundary_cells(self, side: str) -> np.ndarray:
        """Labels of the cells adjacent to one side of the rectangle, in edge order."""
        nx, ny = self.nx, self.ny
        if side == "west":
            return np.arange(ny) * nx
        if side == "east":
            return np.arange(ny) * nx + nx - 1
        if side == "south":
            return np.arange(nx)
        if side == "north":
            return (ny - 1) * nx + np.arange(nx)
        raise ValueError(f"unknown side {side!r}")

    def interior_pairs(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) cell labels across interior edges normal to ``axis``."""
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="xy")
        ix, iy = ix.ravel(), iy.ravel()
        if axis == 0:
            keep = ix < self.nx - 1
            lo = ix[keep] + self.nx * iy[keep]
            return lo, lo + 1
        keep = iy < self.ny - 1
        lo = ix[keep] + self.nx * iy[keep]
        return lo, lo + self.nx

    @property
    def interior_edges(self) -> list[Edge]:
        edges = []
        for axis in (0, 1):
            lo, hi = self.interior_pairs(axis)
            for a, b in zip(lo.tolist(), hi.tolist()):
                edges.append(self._edge(axis, a, b))
        return edges

    @property
    def boundary_edges(self) -> list[Edge]:
        edges = []
        for side in SIDES:
            axis = 0 if side in ("west", "east") else 1
            for c in self.boundary_cells(side).tolist():
                edges.append(self._edge(axis, c, None, side))
        return edges

    def _edge(self, axis: int, a: int, b: int | None, side: str | None = None) -> Edge:
        ix, iy = self.index(a)
        x0 = self.domain.x_lo + ix * self.hx
        y0 = self.domain.y_lo + iy * self.hy
        if axis == 0:
            right = side != "west"
            xm = x0 + (self.hx if right else 0.0)
            mid = (xm, y0 + 0.5 * self.hy)
            length = self.hy
        else:
            top = side != "south"
            ym = y0 + (self.hy if top else 0.0)
            mid = (x0 + 0.5 * self.hx, ym)
            length = self.hx
        normal = SIDE_NORMALS[side] if side else ((1.0, 0.0) if axis == 0 else (0.0, 1.0))
        return Edge(axis, a, b, normal, mid, length)

    def locate(self, x: float, y: float) -> int:
        """Label of the cell containing ``(x, y)`` (right/top closed at the domain edge)."""
        d = self.domain
        ix = min(int((x - d.x_lo) / self.hx), self.nx - 1)
        iy = min(int((y - d.y_lo) / self.hy), self.ny - 1)
        if ix < 0 or iy < 0:
            raise ValueError(f"point ({x}, {y}) outside the domain")
        return self.label(ix, iy)


def build_mesh(domain: RectDomain, nx: int, ny: int) -> CartesianMesh:
    return CartesianMesh(domain, int(nx), int(ny))
