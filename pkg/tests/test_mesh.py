import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsldg.mesh import SIDES, BoundaryMarker, RectDomain, build_mesh

UNIT = RectDomain(0.0, 1.0, 0.0, 1.0)


def test_degenerate_domain_rejected():
    with pytest.raises(ValueError):
        RectDomain(1.0, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("nx, ny", [(0, 3), (3, 0), (-1, 2)])
def test_nonpositive_counts_rejected(nx, ny):
    with pytest.raises(ValueError):
        build_mesh(UNIT, nx, ny)


def test_spacing_and_diameter():
    mesh = build_mesh(RectDomain(-1.0, 1.0, -1.0, 1.0), 20, 4)
    assert mesh.hx == pytest.approx(0.1)
    assert mesh.hy == pytest.approx(0.5)
    assert mesh.h == pytest.approx(math.hypot(0.1, 0.5))
    # 10 x 10 on the unit square has the tabulated diameter 1.41e-1
    assert build_mesh(UNIT, 10, 10).h == pytest.approx(0.1414, abs=1e-4)


def test_lexicographic_labels():
    mesh = build_mesh(UNIT, 4, 3)
    assert mesh.label(0, 0) == 0
    assert mesh.label(3, 0) == 3
    assert mesh.label(0, 1) == 4
    for c in mesh.cells:
        assert mesh.label(*mesh.index(int(c))) == c


def test_neighbors_and_boundary_markers():
    mesh = build_mesh(UNIT, 3, 2)
    assert mesh.neighbor(0, "+x") == 1
    assert mesh.neighbor(0, "+y") == 3
    assert mesh.neighbor(0, "-x") == BoundaryMarker("west", 0)
    assert mesh.neighbor(5, "+y") == BoundaryMarker("north", 5)
    with pytest.raises(IndexError):
        mesh.neighbor(6, "+x")
    with pytest.raises(ValueError):
        mesh.neighbor(0, "up")


def test_boundary_cells():
    mesh = build_mesh(UNIT, 3, 2)
    assert mesh.boundary_cells("west").tolist() == [0, 3]
    assert mesh.boundary_cells("east").tolist() == [2, 5]
    assert mesh.boundary_cells("south").tolist() == [0, 1, 2]
    assert mesh.boundary_cells("north").tolist() == [3, 4, 5]


@given(st.integers(1, 12), st.integers(1, 12))
def test_edge_counts(nx, ny):
    mesh = build_mesh(UNIT, nx, ny)
    assert len(mesh.interior_edges) == (nx - 1) * ny + nx * (ny - 1)
    assert len(mesh.boundary_edges) == 2 * (nx + ny)
    total = sum(e.length for e in mesh.boundary_edges)
    assert total == pytest.approx(4.0)


@given(st.integers(1, 9), st.integers(1, 9))
def test_interior_edges_point_from_lower_to_higher_label(nx, ny):
    mesh = build_mesh(UNIT, nx, ny)
    for e in mesh.interior_edges:
        assert e.cell_plus > e.cell_minus
        assert sum(e.normal) == 1.0


def test_boundary_normals_are_outward():
    mesh = build_mesh(UNIT, 2, 2)
    for e in mesh.boundary_edges:
        cx, cy = mesh.cell_centers()[e.cell_minus]
        mx, my = e.midpoint
        assert (mx - cx) * e.normal[0] + (my - cy) * e.normal[1] > 0


@settings(max_examples=50)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_locate_contains_point(x, y):
    mesh = build_mesh(UNIT, 5, 7)
    c = mesh.locate(x, y)
    x0, y0 = mesh.cell_origins()[c]
    assert x0 - 1e-12 <= x <= x0 + mesh.hx + 1e-12
    assert y0 - 1e-12 <= y <= y0 + mesh.hy + 1e-12


def test_locate_outside_rejected():
    with pytest.raises(ValueError):
        build_mesh(UNIT, 2, 2).locate(-0.5, 0.5)


def test_sides_cover_all_boundary_cells_once_per_side():
    mesh = build_mesh(UNIT, 4, 4)
    counts = np.zeros(mesh.ncells, dtype=int)
    for side in SIDES:
        counts[mesh.boundary_cells(side)] += 1
    assert counts.sum() == 16
    assert counts[mesh.label(0, 0)] == 2
    assert counts[mesh.label(1, 1)] == 0
