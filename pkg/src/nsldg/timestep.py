"""Method-of-lines time stepping for ``u_t + F(D^2 u, grad u, u, x, t) = 0``.

The semi-discrete equation is ``u_t = -P_h F_hat^k[u]``.  Because the basis is
orthonormal, ``P_h F_hat^k[u]`` has the coefficients returned by
:meth:`DiscreteSystem.residual` with the boundary data bound at ``t_k``.
Explicit schemes impose the Dirichlet data through a Nitsche-penalised
projection; implicit schemes solve one elliptic problem per step with Newton.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import SIDES
from .numop import NumOpConfig
from .problems import PdeProblem
from .solvers import NewtonConfig, SolveReport, SolverError, newton, solve_linear
from .space import DgFunction, DgSpace
from .system import DiscreteSystem

log = logging.getLogger(__name__)

SCHEMES = ("forward-euler", "backward-euler", "trapezoidal", "rk")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("need at least one time step")
        if not self.T > 0:
            raise ValueError("final time must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.M

    def t(self, k: float) -> float:
        """``t_k = k dt``; ``t_M`` is exactly ``T``."""
        return self.T if k == self.M else k * self.dt

    @property
    def times(self) -> np.ndarray:
        ts = np.arange(self.M + 1) * self.dt
        ts[-1] = self.T
        return ts


@dataclass(frozen=True)
class RkTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        s = b.size
        if A.shape != (s, s) or c.size != s:
            raise ValueError(f"inconsistent tableau shapes A{A.shape}, b({b.size}), c({c.size})")
        if not np.allclose(A.sum(axis=1), c, atol=1e-14):
            raise ValueError("row sums of A must equal c")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def explicit(self) -> bool:
        return bool(np.all(np.triu(self.A) == 0.0))

    @classmethod
    def forward_euler(cls) -> "RkTableau":
        return cls([[0.0]], [1.0], [0.0])

    @classmethod
    def heun(cls) -> "RkTableau":
        return cls([[0, 0], [1, 0]], [0.5, 0.5], [0, 1])

    @classmethod
    def classical(cls) -> "RkTableau":
        A = [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]]
        return cls(A, [1 / 6, 1 / 3, 1 / 3, 1 / 6], [0, 0.5, 0.5, 1])


@dataclass(frozen=True)
class NitscheConfig:
    delta: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("penalty must be nonnegative")


@dataclass
class ParabolicRun:
    u: DgFunction
    grid: TimeGrid
    reports: list[SolveReport] = field(default_factory=list)

    @property
    def newton_iterations(self) -> int:
        return sum(r.iterations for r in self.reports)


class SemiDiscrete:
    """``u -> P_h F_hat^k[u]`` for any time level, with the Nitsche projection."""

    def __init__(self, problem: PdeProblem, space: DgSpace, cfg: NumOpConfig):
        self.problem = problem
        self.space = space
        self.system = DiscreteSystem(problem, space, cfg, t=0.0)
        self._boundary_mass = None

    def rhs(self, u: np.ndarray, t: float) -> np.ndarray:
        """Coefficients of ``P_h F_hat`` with boundary data at time ``t``."""
        self._at(t)
        return self.system.residual(u)

    def jacobian(self, u: np.ndarray, t: float) -> sp.csr_matrix:
        self._at(t)
        return self.system.jacobian(u)

    def _at(self, t: float) -> None:
        if self.system.t != t:
            self.system.set_time(t)

    @property
    def boundary_mass(self) -> sp.csr_matrix:
        """``sum_i <w, phi |n_i|>`` over boundary edges, as a block-diagonal matrix."""
        if self._boundary_mass is None:
            space = self.space
            blocks = np.zeros((space.mesh.ncells, space.nloc, space.nloc))
            for side in SIDES:
                fb = space.face_basis[side]
                fw = space.face_weights(side)
                blocks[space.mesh.boundary_cells(side)] += fb.T @ (fw[:, None] * fb)
            self._boundary_mass = _block_diag(blocks)
        return self._boundary_mass

    def boundary_load(self, t: float) -> np.ndarray:
        space = self.space
        g = self.problem.g(t)
        out = np.zeros((space.mesh.ncells, space.nloc))
        for side in SIDES:
            x, y = space.boundary_face_points(side)
            gv = np.asarray(g(x, y), dtype=float) * space.face_weights(side)[None, :]
            out[space.mesh.boundary_cells(side)] += gv @ space.face_basis[side]
        return out.ravel()


def _block_diag(blocks: np.ndarray) -> sp.csr_matrix:
    n, k, _ = blocks.shape
    return sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(n * k, n * k)).tocsr()


def nitsche_project(semi: SemiDiscrete, v: np.ndarray, t: float, cfg: NitscheConfig = NitscheConfig()) -> np.ndarray:
    """Penalised projection of the DG field ``v`` toward ``g(., t)`` on the boundary.

    Solves ``(w, phi) + delta <w, phi> = (v, phi) + delta <g, phi>`` over the
    boundary edges, each edge weighted by ``sum_i |n_i|``.  ``delta = 0`` is the
    plain L2 projection, which leaves DG fields unchanged.
    """
    v = np.asarray(v, dtype=float)
    if cfg.delta == 0.0:
        return v.copy()
    Mb = semi.boundary_mass
    A = sp.identity(v.size, format="csr") + cfg.delta * Mb
    return solve_linear(A, v + cfg.delta * semi.boundary_load(t), tol=1e-12)


def step_forward_euler(semi: SemiDiscrete, u: np.ndarray, k: int, grid: TimeGrid,
                       nitsche: NitscheConfig = NitscheConfig()) -> np.ndarray:
    """``u^{k+1} = P_{h,k+1}(u^k - dt F_hat^k[u^k])``."""
    dt = grid.dt
    return nitsche_project(semi, u - dt * semi.rhs(u, grid.t(k)), grid.t(k + 1), nitsche)


def step_rk(semi: SemiDiscrete, u: np.ndarray, k: int, grid: TimeGrid, tableau: RkTableau,
            nitsche: NitscheConfig = NitscheConfig()) -> np.ndarray:
    """One explicit Runge-Kutta step; every stage passes through ``P_{h, k + c_l}``."""
    if not tableau.explicit:
        raise NotImplementedError("implicit Runge-Kutta tableaux are not supported")
    dt = grid.dt
    t0 = grid.t(k)
    stage_rhs = []
    for ell in range(tableau.stages):
        incr = sum((tableau.A[ell, m] * stage_rhs[m] for m in range(ell) if tableau.A[ell, m] != 0.0),
                   np.zeros_like(u))
        t_stage = t0 + tableau.c[ell] * dt
        xi = nitsche_project(semi, u - dt * incr, t_stage, nitsche) if ell > 0 else u
        stage_rhs.append(semi.rhs(xi, t_stage))
    incr = sum(b * f for b, f in zip(tableau.b, stage_rhs))
    return nitsche_project(semi, u - dt * incr, grid.t(k + 1), nitsche)


def _implicit_step(semi: SemiDiscrete, u: np.ndarray, k: int, grid: TimeGrid, theta: float,
                   ncfg: NewtonConfig) -> tuple[np.ndarray, SolveReport]:
    dt = grid.dt
    t_new = grid.t(k + 1)
    rhs = u.copy()
    if theta < 1.0:
        rhs -= (1.0 - theta) * dt * semi.rhs(u, grid.t(k))
    eye = sp.identity(u.size, format="csr")

    def residual(w):
        return w - rhs + theta * dt * semi.rhs(w, t_new)

    def jacobian(w):
        return eye + theta * dt * semi.jacobian(w, t_new)

    try:
        u_new, report = newton(residual, jacobian, u, ncfg)
    except SolverError as exc:
        raise SolverError(f"time level {k + 1}: {exc}") from None
    if not report.converged:
        raise SolverError(f"time level {k + 1}: {report.message}")
    return u_new, report


def step_backward_euler(semi: SemiDiscrete, u: np.ndarray, k: int, grid: TimeGrid,
                        ncfg: NewtonConfig = NewtonConfig()) -> tuple[np.ndarray, SolveReport]:
    """Solve ``u + dt P_h F_hat^{k+1}[u] = u^k`` starting from ``u^k``."""
    return _implicit_step(semi, u, k, grid, 1.0, ncfg)


def step_trapezoidal(semi: SemiDiscrete, u: np.ndarray, k: int, grid: TimeGrid,
                     ncfg: NewtonConfig = NewtonConfig()) -> tuple[np.ndarray, SolveReport]:
    """Solve ``u + dt/2 P_h F_hat^{k+1}[u] = u^k - dt/2 P_h F_hat^k[u^k]``."""
    return _implicit_step(semi, u, k, grid, 0.5, ncfg)


def explicit_dt_limit(space: DgSpace, cfg: NumOpConfig) -> float:
    """Heuristic stability bound ``h^2 / (4 max(1, max |alpha|))`` for explicit steps.

    Not a proven CFL condition; only used to warn.
    """
    h = min(space.mesh.hx, space.mesh.hy)
    return h**2 / (4.0 * max(1.0, float(np.max(np.abs(cfg.alpha)))))


def solve_parabolic(
    problem: PdeProblem,
    space: DgSpace,
    cfg: NumOpConfig,
    grid: TimeGrid,
    scheme: str = "backward-euler",
    ncfg: NewtonConfig = NewtonConfig(),
    tableau: RkTableau | None = None,
    nitsche: NitscheConfig = NitscheConfig(),
) -> ParabolicRun:
    """March from ``u^0 = P_h u_0`` to ``t = T``."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme in ("forward-euler", "rk"):
        limit = explicit_dt_limit(space, cfg)
        if grid.dt > limit:
            log.warning("explicit %s with dt %.3g above the heuristic limit %.3g", scheme, grid.dt, limit)
    semi = SemiDiscrete(problem, space, cfg)
    u = space.l2_project(problem.u0()).coeffs
    run = ParabolicRun(DgFunction(space, u), grid)
    for k in range(grid.M):
        if scheme == "backward-euler":
            u, rep = step_backward_euler(semi, u, k, grid, ncfg)
            run.reports.append(rep)
        elif scheme == "trapezoidal":
            u, rep = step_trapezoidal(semi, u, k, grid, ncfg)
            run.reports.append(rep)
        elif scheme == "forward-euler":
            u = step_forward_euler(semi, u, k, grid, nitsche)
        else:
            u = step_rk(semi, u, k, grid, tableau or RkTableau.classical(), nitsche)
        log.debug("level %d of %d done", k + 1, grid.M)
    run.u = DgFunction(space, u)
    return run
