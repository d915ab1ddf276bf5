"""Discontinuous piecewise-polynomial spaces on Cartesian meshes.

The local basis on each cell is the L2-orthonormal family of products of
normalised Legendre polynomials ``p_a(xi) p_b(eta)`` with ``a + b <= r``.  With
this choice the global mass matrix is the identity, so the L2 projection of a
field is just its vector of moments against the basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from .mesh import SIDES, CartesianMesh

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _normalized_legendre(n: int, x: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Values of sqrt((2n+1)/2) P_n (or its derivative) at ``x``."""
    c = np.zeros(n + 1)
    c[n] = np.sqrt((2 * n + 1) / 2.0)
    if deriv:
        c = npleg.legder(c, deriv)
    return npleg.legval(x, c)


def total_degree_modes(r: int) -> list[tuple[int, int]]:
    return [(a, deg - a) for deg in range(r + 1) for a in range(deg, -1, -1)]


class DgSpace:
    """Degree-``r`` total-degree DG space on a uniform Cartesian mesh.

    Coefficients are stored cell-major, mode-minor: entry ``K * nloc + k`` is
    the coefficient of local mode ``k`` on cell ``K``.
    """

    def __init__(self, mesh: CartesianMesh, degree: int):
        if degree < 0:
            raise ValueError("polynomial degree must be nonnegative")
        self.mesh = mesh
        self.degree = degree
        self.modes = total_degree_modes(degree)
        self.nloc = len(self.modes)
        self.ndofs = self.nloc * mesh.ncells
        self.nq1 = degree + 2
        self.gauss_x, self.gauss_w = npleg.leggauss(self.nq1)
        # 2/sqrt(hx*hy) turns reference orthonormality into physical orthonormality.
        self._scale = 2.0 / np.sqrt(mesh.hx * mesh.hy)

    def __repr__(self):
        m = self.mesh
        return f"DgSpace(r={self.degree}, {m.nx}x{m.ny} cells, ndofs={self.ndofs})"

    # -- reference-cell evaluation -------------------------------------------------

    def ref_basis(self, xi: np.ndarray, eta: np.ndarray, dxi: int = 0, deta: int = 0) -> np.ndarray:
        """Basis (or derivative in reference coordinates) at reference points.

        Returns an array of shape ``(npts, nloc)``; physical scaling included
        for values, reference derivatives not converted to physical ones.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        cols = [
            _normalized_legendre(a, xi, dxi) * _normalized_legendre(b, eta, deta)
            for a, b in self.modes
        ]
        return self._scale * np.column_stack(cols)

    @cached_property
    def quad_ref(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tensor Gauss rule on [-1, 1]^2: (xi, eta, weights)."""
        xi, eta = np.meshgrid(self.gauss_x, self.gauss_x, indexing="xy")
        w = np.outer(self.gauss_w, self.gauss_w).ravel()
        return xi.ravel(), eta.ravel(), w

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Physical cell quadrature weights (identical on every cell)."""
        m = self.mesh
        return self.quad_ref[2] * (m.hx * m.hy / 4.0)

    @cached_property
    def B(self) -> np.ndarray:
        """Basis values at cell quadrature points, ``(nq, nloc)``."""
        xi, eta, _ = self.quad_ref
        return self.ref_basis(xi, eta)

    @cached_property
    def B_grad(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical x- and y-derivatives of the basis at cell quadrature points."""
        xi, eta, _ = self.quad_ref
        m = self.mesh
        return (
            self.ref_basis(xi, eta, dxi=1) * (2.0 / m.hx),
            self.ref_basis(xi, eta, deta=1) * (2.0 / m.hy),
        )

    @cached_property
    def quad_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical quadrature points, each of shape ``(ncells, nq)``."""
        xi, eta, _ = self.quad_ref
        m = self.mesh
        o = m.cell_origins()
        x = o[:, :1] + (xi[None, :] + 1.0) * (m.hx / 2.0)
        y = o[:, 1:] + (eta[None, :] + 1.0) * (m.hy / 2.0)
        return x, y

    # -- faces ---------------------------------------------------------------------

    def face_ref_points(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        s = self.gauss_x
        if side == "west":
            return -np.ones_like(s), s
        if side == "east":
            return np.ones_like(s), s
        if side == "south":
            return s, -np.ones_like(s)
        if side == "north":
            return s, np.ones_like(s)
        raise ValueError(side)

    @cached_property
    def face_basis(self) -> dict[str, np.ndarray]:
        """Basis traces on each face of the reference cell, ``(nq1, nloc)``."""
        return {side: self.ref_basis(*self.face_ref_points(side)) for side in SIDES}

    def face_weights(self, side: str) -> np.ndarray:
        m = self.mesh
        length = m.hy if side in ("west", "east") else m.hx
        return self.gauss_w * (length / 2.0)

    def boundary_face_points(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        """Physical quadrature points on the domain boundary ``side``.

        Shape ``(ncells_on_side, nq1)`` each, ordered as
        :meth:`CartesianMesh.boundary_cells`.
        """
        m = self.mesh
        cells = m.boundary_cells(side)
        o = m.cell_origins()[cells]
        xi, eta = self.face_ref_points(side)
        x = o[:, :1] + (xi[None, :] + 1.0) * (m.hx / 2.0)
        y = o[:, 1:] + (eta[None, :] + 1.0) * (m.hy / 2.0)
        return x, y

    # -- functions -----------------------------------------------------------------

    def zeros(self) -> "DgFunction":
        return DgFunction(self, np.zeros(self.ndofs))

    def l2_project(self, f: ScalarField | float) -> "DgFunction":
        if np.isscalar(f):
            value = float(f)
            f = lambda x, y: np.full_like(x, value)  # noqa: E731
        x, y = self.quad_points
        vals = np.asarray(f(x, y), dtype=float) * self.quad_weights[None, :]
        return DgFunction(self, (vals @ self.B).ravel())

    def values_at_quad(self, coeffs: np.ndarray) -> np.ndarray:
        """Cell quadrature values of a coefficient vector, ``(ncells, nq)``."""
        return coeffs.reshape(self.mesh.ncells, self.nloc) @ self.B.T

    def test_against(self, vals: np.ndarray) -> np.ndarray:
        """Moments ``(v, phi_k)`` of quadrature values ``vals`` of shape ``(ncells, nq)``."""
        return ((vals * self.quad_weights[None, :]) @ self.B).ravel()

    def to_reference(self, cell: int, x: float, y: float) -> tuple[float, float]:
        m = self.mesh
        ix, iy = m.index(cell)
        x0 = m.domain.x_lo + ix * m.hx
        y0 = m.domain.y_lo + iy * m.hy
        return 2.0 * (x - x0) / m.hx - 1.0, 2.0 * (y - y0) / m.hy - 1.0

    def evaluate(self, u: "DgFunction", cell: int, point: tuple[float, float]) -> float:
        """Value of the cell-local polynomial of ``u`` on ``cell`` at a physical point."""
        xi, eta = self.to_reference(cell, *point)
        tol = 1e-12
        if abs(xi) > 1 + tol or abs(eta) > 1 + tol:
            raise ValueError(f"point {point} is not in the closure of cell {cell}")
        local = u.coeffs[cell * self.nloc:(cell + 1) * self.nloc]
        return float(self.ref_basis(xi, eta)[0] @ local)

    def sample_lattice(self, n: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closed equispaced ``n x n`` lattice per cell (default ``r + 3``).

        Returns reference basis values ``(n*n, nloc)`` and physical points of
        shape ``(ncells, n*n)``.
        """
        n = self.degree + 3 if n is None else n
        s = np.linspace(-1.0, 1.0, n)
        xi, eta = np.meshgrid(s, s, indexing="xy")
        xi, eta = xi.ravel(), eta.ravel()
        m = self.mesh
        o = m.cell_origins()
        x = o[:, :1] + (xi[None, :] + 1.0) * (m.hx / 2.0)
        y = o[:, 1:] + (eta[None, :] + 1.0) * (m.hy / 2.0)
        return self.ref_basis(xi, eta), x, y

    def error_norms(self, u: "DgFunction", exact: ScalarField) -> tuple[float, float]:
        """(L-infinity, L2) norms of ``u - exact``.

        L2 uses the cell quadrature; L-infinity is the maximum over the
        per-cell sampling lattice of :meth:`sample_lattice`.
        """
        xq, yq = self.quad_points
        diff = self.values_at_quad(u.coeffs) - exact(xq, yq)
        l2 = float(np.sqrt(np.sum(diff**2 * self.quad_weights[None, :])))
        Bs, xs, ys = self.sample_lattice()
        vals = u.coeffs.reshape(self.mesh.ncells, self.nloc) @ Bs.T
        linf = float(np.max(np.abs(vals - exact(xs, ys))))
        return linf, l2

    def l2_norm(self, u: "DgFunction") -> float:
        return float(np.linalg.norm(u.coeffs))


@dataclass
class DgFunction:
    space: DgSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndofs,):
            raise ValueError(
                f"expected {self.space.ndofs} coefficients, got {self.coeffs.shape}"
            )

    def copy(self) -> "DgFunction":
        return DgFunction(self.space, self.coeffs.copy())

    def __add__(self, other: "DgFunction") -> "DgFunction":
        return DgFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "DgFunction") -> "DgFunction":
        return DgFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "DgFunction":
        return DgFunction(self.space, a * self.coeffs)

    __rmul__ = __mul__

    def at(self, cell: int, point: tuple[float, float]) -> float:
        return self.space.evaluate(self, cell, point)

    def quad_values(self) -> np.ndarray:
        return self.space.values_at_quad(self.coeffs)
