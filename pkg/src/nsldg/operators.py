"""Affine LDG derivative operators on Cartesian meshes.

For a DG function ``u`` the two gradient approximations ``q^+``, ``q^-`` and the
four Hessian approximations ``P^{mu nu}`` are affine functions of the
coefficients of ``u``:  ``q_i^mu = G u + g`` with the boundary data entering
only through the offset.  This module assembles those maps.

Trace conventions
-----------------
On an interior edge the ``-`` trace along axis ``i`` takes the value from the
cell on the negative side of the edge (left or below) and the ``+`` trace the
value from the positive side, whenever the edge normal has a nonzero ``i``
component.  Edges whose normal is orthogonal to axis ``i`` carry zero weight
in the ``i``-derivative and are never touched.

Boundary closures depend on the degree:

* ``r >= 1``: the Dirichlet value ``g`` replaces the trace of ``u`` on every
  boundary edge, and gradient traces are taken from the interior.
* ``r = 0``: only the exterior side of a boundary edge is replaced.  For ``u``
  the exterior value is ``g`` (its edge average, which is all a constant test
  function sees).  For the gradients the exterior values are the ghost
  reflections listed in :data:`GHOST_RULES`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .space import DgSpace

SIGNS = ("+", "-")
AXES = (0, 1)

# Sides perpendicular to each axis, as (negative side, positive side).
_SIDES_FOR_AXIS = {0: ("west", "east"), 1: ("south", "north")}

# Exterior ghost values of the r = 0 gradients on each boundary side, written
# as linear combinations of the interior values of the boundary cell.  Keys
# and terms are (component, sign) pairs; component 0 is x, 1 is y.
GHOST_RULES: dict[str, dict[tuple[int, str], list[tuple[float, tuple[int, str]]]]] = {
    # n1 >= 0, n2 >= 0
    "east": {
        (0, "-"): [(1.0, (0, "+"))],
        (1, "-"): [(1.0, (1, "+"))],
        (0, "+"): [(1.0, (0, "+"))],
        (1, "+"): [(1.0, (1, "+"))],
    },
    # n1 < 0, n2 >= 0
    "west": {
        (0, "+"): [(1.0, (0, "-"))],
        (1, "-"): [(1.0, (1, "+"))],
        (1, "+"): [(1.0, (1, "+")), (1.0, (0, "+")), (-1.0, (0, "-"))],
        (0, "-"): [(1.0, (0, "-")), (1.0, (1, "-")), (-1.0, (1, "+"))],
    },
    # n1 >= 0, n2 < 0
    "south": {
        (0, "-"): [(1.0, (0, "+"))],
        (1, "+"): [(1.0, (1, "-"))],
        (1, "-"): [(1.0, (1, "-")), (1.0, (0, "-")), (-1.0, (0, "+"))],
        (0, "+"): [(1.0, (0, "+")), (1.0, (1, "+")), (-1.0, (1, "-"))],
    },
}
GHOST_RULES["north"] = GHOST_RULES["east"]


@dataclass
class AffineOperator:
    """``u -> matrix @ u + offset`` on DG coefficient vectors."""

    matrix: sp.csr_matrix
    offset: np.ndarray

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u + self.offset

    apply = __call__

    def __add__(self, other: "AffineOperator") -> "AffineOperator":
        return AffineOperator((self.matrix + other.matrix).tocsr(), self.offset + other.offset)

    def __sub__(self, other: "AffineOperator") -> "AffineOperator":
        return AffineOperator((self.matrix - other.matrix).tocsr(), self.offset - other.offset)

    def __mul__(self, a: float) -> "AffineOperator":
        return AffineOperator((a * self.matrix).tocsr(), a * self.offset)

    __rmul__ = __mul__

    def compose(self, inner: "AffineOperator") -> "AffineOperator":
        """``self o inner``."""
        return AffineOperator(
            (self.matrix @ inner.matrix).tocsr(), self.matrix @ inner.offset + self.offset
        )

    @property
    def linear(self) -> "AffineOperator":
        return AffineOperator(self.matrix, np.zeros_like(self.offset))


def _block_diag(space: DgSpace, cells: np.ndarray, block: np.ndarray) -> sp.csr_matrix:
    """Matrix with ``block`` on the diagonal positions of ``cells``."""
    return _block_pairs(space, cells, cells, block)


def _block_pairs(space: DgSpace, rows: np.ndarray, cols: np.ndarray, block: np.ndarray) -> sp.csr_matrix:
    n = space.nloc
    if len(rows) == 0:
        return sp.csr_matrix((space.ndofs, space.ndofs))
    kk, ll = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = (rows[:, None, None] * n + kk[None]).ravel()
    c = (cols[:, None, None] * n + ll[None]).ravel()
    v = np.broadcast_to(block, (len(rows), n, n)).ravel()
    return sp.csr_matrix((v, (r, c)), shape=(space.ndofs, space.ndofs))


_OPPOSITE = {"west": "east", "east": "west", "south": "north", "north": "south"}


class LocalMatrices:
    """Reference-cell volume and face matrices, identical on every cell."""

    def __init__(self, space: DgSpace):
        self.space = space
        w = space.quad_weights
        Bx, By = space.B_grad
        # volume[j][k, l] = int phi_l d_j phi_k
        self.volume = [Bd.T @ (w[:, None] * space.B) for Bd in (Bx, By)]
        fb = space.face_basis
        self.face = {}
        for s in fb:
            fw = space.face_weights(s)
            for t in fb:
                # face[(s, t)][k, l] = int_e phi_k|_s phi_l|_t
                self.face[(s, t)] = fb[s].T @ (fw[:, None] * fb[t])


def derivative_matrix(
    space: DgSpace,
    axis: int,
    sign: str,
    interior_boundary_sides: tuple[str, ...] = (),
    local: LocalMatrices | None = None,
) -> sp.csr_matrix:
    """Linear part of the ``sign`` derivative along ``axis`` of a generic field.

    Boundary edges contribute only on the sides listed in
    ``interior_boundary_sides``, where the trace is the interior value.  Other
    boundary contributions are supplied separately by the caller.
    """
    mesh = space.mesh
    loc = local or LocalMatrices(space)
    neg, pos = _SIDES_FOR_AXIS[axis]
    all_cells = mesh.cells
    mat = _block_diag(space, all_cells, -loc.volume[axis])

    lo, hi = mesh.interior_pairs(axis)
    if sign == "+":
        # value from the positive-side cell on every interior edge
        mat = mat + _block_pairs(space, lo, hi, loc.face[(pos, neg)])
        mat = mat - _block_diag(space, hi, loc.face[(neg, neg)])
    else:
        mat = mat + _block_diag(space, lo, loc.face[(pos, pos)])
        mat = mat - _block_pairs(space, hi, lo, loc.face[(neg, pos)])

    for side in interior_boundary_sides:
        normal = -1.0 if side == neg else 1.0
        cells = mesh.boundary_cells(side)
        mat = mat + normal * _block_diag(space, cells, loc.face[(side, side)])
    return mat.tocsr()


def exterior_side(axis: int, sign: str) -> str:
    """The boundary side on which the ``sign`` trace along ``axis`` is exterior."""
    neg, pos = _SIDES_FOR_AXIS[axis]
    return pos if sign == "+" else neg


def interior_side(axis: int, sign: str) -> str:
    neg, pos = _SIDES_FOR_AXIS[axis]
    return neg if sign == "+" else pos


def dirichlet_offset(space: DgSpace, axis: int, sides: tuple[str, ...], g: Callable) -> np.ndarray:
    """Boundary moments ``n_axis * int_e g phi_k ds`` over the listed sides."""
    mesh = space.mesh
    neg, _ = _SIDES_FOR_AXIS[axis]
    off = np.zeros((mesh.ncells, space.nloc))
    for side in sides:
        normal = -1.0 if side == neg else 1.0
        cells = mesh.boundary_cells(side)
        x, y = space.boundary_face_points(side)
        gv = np.asarray(g(x, y), dtype=float) * space.face_weights(side)[None, :]
        off[cells] += normal * (gv @ space.face_basis[side])
    return off.ravel()


@dataclass
class DerivativeSet:
    """All derivative operators of one space bound to one set of boundary data."""

    space: DgSpace
    grad: dict[tuple[int, str], AffineOperator]
    hess: dict[tuple[str, str, int, int], AffineOperator]
    _reduced: dict = field(default_factory=dict, repr=False)

    def q(self, sign: str, i: int) -> AffineOperator:
        return self.grad[(i, sign)]

    def P(self, mu: str, nu: str, i: int, j: int) -> AffineOperator:
        return self.hess[(mu, nu, i, j)]

    def dbar(self, i: int, j: int) -> AffineOperator:
        """``(D^{--} + D^{++}) / 2``."""
        key = ("bar", i, j)
        if key not in self._reduced:
            self._reduced[key] = 0.5 * (self.P("-", "-", i, j) + self.P("+", "+", i, j))
        return self._reduced[key]

    def dtilde(self, i: int, j: int) -> AffineOperator:
        """``(D^{-+} + D^{+-}) / 2``."""
        key = ("tilde", i, j)
        if key not in self._reduced:
            self._reduced[key] = 0.5 * (self.P("-", "+", i, j) + self.P("+", "-", i, j))
        return self._reduced[key]

    def grad_avg(self, i: int) -> AffineOperator:
        key = ("avg", i)
        if key not in self._reduced:
            self._reduced[key] = 0.5 * (self.q("+", i) + self.q("-", i))
        return self._reduced[key]

    def laplacian(self) -> AffineOperator:
        """Trace of the averaged mixed Hessian ``D~^2``."""
        return self.dtilde(0, 0) + self.dtilde(1, 1)

    def moment(self, alpha: np.ndarray) -> AffineOperator:
        """``alpha : (P++ - P+- - P-+ + P--)`` as an affine map of ``u``."""
        out = None
        for i in AXES:
            for j in AXES:
                a = float(alpha[i, j])
                if a == 0.0:
                    continue
                term = a * (
                    self.P("+", "+", i, j) - self.P("+", "-", i, j)
                    - self.P("-", "+", i, j) + self.P("-", "-", i, j)
                )
                out = term if out is None else out + term
        return out if out is not None else _zero(self.space)

    def viscosity(self, beta: np.ndarray) -> AffineOperator:
        """``beta . (q^- - q^+)`` as an affine map of ``u``."""
        out = _zero(self.space)
        for i in AXES:
            b = float(beta[i])
            if b != 0.0:
                out = out + b * (self.q("-", i) - self.q("+", i))
        return out


def _zero(space: DgSpace) -> AffineOperator:
    return AffineOperator(sp.csr_matrix((space.ndofs, space.ndofs)), np.zeros(space.ndofs))


class LdgOperators:
    """Assembles the gradient and Hessian maps of a space once.

    The matrices do not depend on the boundary data; :meth:`bind` attaches a
    Dirichlet function and returns a :class:`DerivativeSet` whose offsets
    carry it.  Rebinding (for time-dependent data) only recomputes offsets.
    """

    def __init__(self, space: DgSpace):
        self.space = space
        self.local = LocalMatrices(space)
        r0 = space.degree == 0
        self._grad_mat = {}
        for i in AXES:
            for mu in SIGNS:
                sides = (interior_side(i, mu),) if r0 else ()
                self._grad_mat[(i, mu)] = derivative_matrix(space, i, mu, sides, self.local)

        # Each Hessian is a sum of (linear map) @ (gradient operator) terms.
        self._hess_terms: dict[tuple[str, str, int, int], list[tuple[sp.csr_matrix, tuple[int, str]]]] = {}
        for j in AXES:
            for nu in SIGNS:
                if r0:
                    inner = derivative_matrix(space, j, nu, (interior_side(j, nu),), self.local)
                else:
                    inner = derivative_matrix(space, j, nu, _SIDES_FOR_AXIS[j], self.local)
                for i in AXES:
                    for mu in SIGNS:
                        terms = [(inner, (i, mu))]
                        if r0:
                            terms += self._ghost_terms(i, mu, j, nu)
                        self._hess_terms[(mu, nu, i, j)] = terms
        self._hess_mat = {}
        for key, terms in self._hess_terms.items():
            mat = terms[0][0] @ self._grad_mat[terms[0][1]]
            for A, src in terms[1:]:
                mat = mat + A @ self._grad_mat[src]
            self._hess_mat[key] = mat.tocsr()

    def _ghost_terms(self, i: int, mu: str, j: int, nu: str):
        side = exterior_side(j, nu)
        neg, _ = _SIDES_FOR_AXIS[j]
        normal = -1.0 if side == neg else 1.0
        cells = self.space.mesh.boundary_cells(side)
        lift = normal * _block_diag(self.space, cells, self.local.face[(side, side)])
        return [(c * lift, src) for c, src in GHOST_RULES[side][(i, mu)]]

    def bind(self, g: Callable | None = None) -> DerivativeSet:
        space = self.space
        r0 = space.degree == 0
        if g is None and r0:
            raise ValueError("piecewise constant spaces need Dirichlet data for the ghost values")
        grad = {}
        for (i, mu), mat in self._grad_mat.items():
            if g is None:
                off = np.zeros(space.ndofs)
            else:
                sides = (exterior_side(i, mu),) if r0 else _SIDES_FOR_AXIS[i]
                off = dirichlet_offset(space, i, sides, g)
            grad[(i, mu)] = AffineOperator(mat, off)
        hess = {}
        for key, terms in self._hess_terms.items():
            off = np.zeros(space.ndofs)
            for A, src in terms:
                off = off + A @ grad[src].offset
            hess[key] = AffineOperator(self._hess_mat[key], off)
        return DerivativeSet(space, grad, hess)


def assemble_gradient(space: DgSpace, side: str, axis: int, dirichlet: Callable | None = None) -> AffineOperator:
    return LdgOperators(space).bind(dirichlet).q(side, axis)


def assemble_hessian(
    space: DgSpace, mu: str, nu: str, row: int, col: int, dirichlet: Callable | None = None
) -> AffineOperator:
    return LdgOperators(space).bind(dirichlet).P(mu, nu, row, col)


def reduced_ops(ops: DerivativeSet):
    """``(Dbar2, Dtilde2, grad_avg)`` as nested lists of affine operators."""
    dbar = [[ops.dbar(i, j) for j in AXES] for i in AXES]
    dtil = [[ops.dtilde(i, j) for j in AXES] for i in AXES]
    gavg = [ops.grad_avg(i) for i in AXES]
    return dbar, dtil, gavg


def interior_jump_matrix(space: DgSpace, axis: int, local: LocalMatrices | None = None) -> sp.csr_matrix:
    """``M[k, l] = <[phi_l], [phi_k] |n^(axis)|>`` over interior edges.

    The product of two jumps does not depend on the edge orientation, so
    ``M @ u`` gives the moments of ``<[u], [phi] |n_axis|>``.
    """
    loc = local or LocalMatrices(space)
    neg, pos = _SIDES_FOR_AXIS[axis]
    lo, hi = space.mesh.interior_pairs(axis)
    mat = _block_diag(space, lo, loc.face[(pos, pos)]) + _block_diag(space, hi, loc.face[(neg, neg)])
    mat = mat - _block_pairs(space, lo, hi, loc.face[(pos, neg)]) - _block_pairs(space, hi, lo, loc.face[(neg, pos)])
    return mat.tocsr()
