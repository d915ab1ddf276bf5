"""Structural identities of the discretisation, usable as runtime self-checks.

Each function returns plain numbers (maximum deviations) so that both the
test-suite and the ``check`` command of the CLI can use them.

Sign convention.  With ``[v] = v_lo - v_hi`` on an interior edge the products
``[u][phi]`` do not depend on orientation, and for the traces used here

    (q_i^+ - q_i^-, phi) = -<[u], [phi] |n_i|>,

i.e. ``q^+ - q^-`` is a *negative* semi-definite jump form (for piecewise
constants it is ``h`` times the central second difference).  The functions
take a ``sign`` argument so that the opposite convention can be evaluated too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import build_mesh, RectDomain
from .numop import NumOpConfig
from .operators import AXES, DerivativeSet, LdgOperators, interior_jump_matrix
from .space import DgFunction, DgSpace
from .system import DiscreteSystem

# Ranges of the exact Hessian, gradient and value of the smooth Monge-Ampere
# solution exp((x^2 + y^2)/2) on the unit square.
EXACT_HESSIAN_BOX_EX1 = {
    "P": (1.0, 2.0 * np.e),
    "P_off": (0.0, np.e),
    "q": (0.0, np.e),
    "v": (1.0, np.e),
}

# The sign relating the q^+ - q^- moments to the jump form, see module docstring.
JUMP_SIGN = -1.0


@dataclass
class JumpResiduals:
    viscosity: dict[int, float]
    moment: dict[tuple[int, int], float]

    @property
    def worst(self) -> float:
        return max([*self.viscosity.values(), *self.moment.values()])


def jump_identity_check(space: DgSpace, u: DgFunction | np.ndarray, sign: float = JUMP_SIGN,
                        ops: LdgOperators | None = None) -> JumpResiduals:
    """Residuals of the first- and second-order jump identities.

    ``viscosity[i] = max_phi |(q_i^+ - q_i^-, phi) - sign <[u], [phi] |n_i|>|`` and
    ``moment[i, j]`` is the analogous residual of
    ``(P++ - P+- - P-+ + P--)_ij = sign <[q_i^+ - q_i^-], [phi] |n_j|>``.
    """
    if space.degree == 0:
        raise ValueError("the jump identities assume the r >= 1 boundary closure")
    coeffs = u.coeffs if isinstance(u, DgFunction) else np.asarray(u, dtype=float)
    ops = ops or LdgOperators(space)
    d = ops.bind(None)
    jumps = {i: interior_jump_matrix(space, i, ops.local) for i in AXES}
    visc = {}
    for i in AXES:
        lhs = d.q("+", i)(coeffs) - d.q("-", i)(coeffs)
        visc[i] = float(np.max(np.abs(lhs - sign * (jumps[i] @ coeffs))))
    mom = {}
    for i in AXES:
        dq = d.q("+", i)(coeffs) - d.q("-", i)(coeffs)
        for j in AXES:
            lhs = (d.P("+", "+", i, j)(coeffs) - d.P("+", "-", i, j)(coeffs)
                   - d.P("-", "+", i, j)(coeffs) + d.P("-", "-", i, j)(coeffs))
            mom[(i, j)] = float(np.max(np.abs(lhs - sign * (jumps[j] @ dq))))
    return JumpResiduals(visc, mom)


def rewritten_residual(system: DiscreteSystem, u: np.ndarray, moment_sign: float = JUMP_SIGN) -> float:
    """Distance between the assembled ``(F_hat[u], phi)`` and its jump-form rewrite.

    The rewrite is ``(F(D~^2 u, grad u, u), phi) + sum_i beta_i <[u], [phi] |n_i|>
    + moment_sign * sum_ij alpha_ij <[q_i^+ - q_i^-], [phi] |n_j|>``.
    Only meaningful for ``r >= 1`` with data that makes boundary terms cancel.
    Returned relative to ``max(1, max |F_hat moments|)`` since nonlinear ``F``
    can produce large values on random states.
    """
    space = system.space
    d = system.derivs
    alpha, beta = system.cfg.alpha, system.cfg.beta
    jumps = {i: interior_jump_matrix(space, i, system.ops.local) for i in AXES}
    vals = system.fields(u)
    P, q, v, x, y = system._pointwise(vals)
    rhs = space.test_against(system.problem.F(P, q, v, x, y, system.t).reshape(vals.shape[1:]))
    for i in AXES:
        rhs = rhs + beta[i] * (jumps[i] @ u)
        dq = d.q("+", i)(u) - d.q("-", i)(u)
        for j in AXES:
            rhs = rhs + moment_sign * alpha[i, j] * (jumps[j] @ dq)
    lhs = system.residual_full(u)
    return float(np.max(np.abs(lhs - rhs)) / max(1.0, float(np.max(np.abs(lhs)))))


@dataclass
class FdReport:
    gradient: float  # q^+/q^- against forward/backward differences
    laplacian: float  # tr D~^2 against the 5-point Laplacian
    moment: float  # moment against sum alpha_ij h_i h_j d2_i d2_j u
    mixed_diag: float  # (P^{+-})_ii and (P^{-+})_ii against (q^+ - q^-)_i / h_i
    mixed_diag_reversed: float  # the same with (q^- - q^+)_i / h_i

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def _shift(U: np.ndarray, axis: int, k: int) -> np.ndarray:
    """``U`` moved by ``k`` cells along the mesh ``axis`` (grid indexed ``[iy, ix]``)."""
    return np.roll(U, -k, axis=1 - axis)


def fd_equivalence_check(nx: int = 9, ny: int = 7, seed: int = 0, alpha: np.ndarray | None = None,
                         domain: RectDomain | None = None) -> FdReport:
    """Compare ``r = 0`` operators with finite differences on random grid data.

    Gradients and the mixed diagonal identity are checked on every cell that
    has the needed neighbours; second-difference quantities on cells at least
    two cells away from the boundary.  The Dirichlet data are zero.
    """
    rng = np.random.default_rng(seed)
    domain = domain or RectDomain(0.0, 1.3, -0.4, 0.5)
    mesh = build_mesh(domain, nx, ny)
    space = DgSpace(mesh, 0)
    d: DerivativeSet = LdgOperators(space).bind(lambda x, y: 0.0 * x)
    alpha = np.array([[1.3, -0.7], [0.4, 2.1]]) if alpha is None else np.asarray(alpha, dtype=float)
    scale = np.sqrt(mesh.hx * mesh.hy)  # coefficient of a constant on one cell
    U = rng.standard_normal((ny, nx))
    c = U.ravel() * scale
    h = (mesh.hx, mesh.hy)

    def grid(vec):
        return (vec / scale).reshape(ny, nx)

    inner1 = np.zeros((ny, nx), dtype=bool)
    inner1[1:-1, 1:-1] = True
    inner2 = np.zeros((ny, nx), dtype=bool)
    inner2[2:-2, 2:-2] = True

    err_grad = 0.0
    for i in AXES:
        fwd = (_shift(U, i, 1) - U) / h[i]
        bwd = (U - _shift(U, i, -1)) / h[i]
        err_grad = max(err_grad, np.max(np.abs(grid(d.q("+", i)(c)) - fwd)[inner1]),
                       np.max(np.abs(grid(d.q("-", i)(c)) - bwd)[inner1]))

    d2 = {i: (_shift(U, i, 1) - 2 * U + _shift(U, i, -1)) / h[i] ** 2 for i in AXES}
    lap5 = d2[0] + d2[1]
    err_lap = np.max(np.abs(grid(d.laplacian()(c)) - lap5)[inner1])

    def d2_of(V, i):
        return (_shift(V, i, 1) - 2 * V + _shift(V, i, -1)) / h[i] ** 2

    fd_mom = sum(alpha[i, j] * h[i] * h[j] * d2_of(d2[i], j) for i in AXES for j in AXES)
    err_mom = np.max(np.abs(grid(d.moment(alpha)(c)) - fd_mom)[inner2])

    err_mix = err_rev = 0.0
    for i in AXES:
        diff = (d.q("+", i)(c) - d.q("-", i)(c)) / h[i]
        for key in (("+", "-"), ("-", "+")):
            Pii = d.P(*key, i, i)(c)
            err_mix = max(err_mix, float(np.max(np.abs(Pii - diff))))
            err_rev = max(err_rev, float(np.max(np.abs(Pii + diff))))
    return FdReport(float(err_grad), float(err_lap), float(err_mom), err_mix, err_rev)


def hessian_sign_census(system: DiscreteSystem, u: np.ndarray) -> tuple[float, float]:
    """Fractions of negative and positive diagonal coefficients of ``D~^2 u``.

    For ``r = 0`` these are the cell values; for ``r >= 1`` the quadrature values.
    """
    vals = np.concatenate([system.space.values_at_quad(system.derivs.dtilde(i, i)(u)).ravel() for i in AXES])
    return float(np.mean(vals < 0)), float(np.mean(vals > 0))


def shipped_configs() -> list[tuple[str, NumOpConfig]]:
    """Numerical-operator settings used with each example in the benchmark tables."""
    return [
        ("example-1", NumOpConfig.scaled_identity(24.0)),
        ("example-2", NumOpConfig.scaled_identity(1.0)),
        ("example-3", NumOpConfig.scaled_identity(2.0)),
        ("example-4", NumOpConfig.scaled_identity(60.0)),
        ("example-5", NumOpConfig.scaled_identity(2.0)),
    ]
