"""Nonlinear solvers for the discrete system.

``newton_reduced`` applies damped Newton to the reduced system.  ``fixed_point_solve``
is the inverse-Poisson splitting: a cell-local nonlinear solve for the diagonal
of the averaged mixed Hessian, followed by a discrete Poisson solve for ``u_h``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .numop import NumOpConfig
from .operators import AXES, LdgOperators
from .problems import PdeProblem
from .space import DgFunction, DgSpace
from .system import DiscreteSystem, _block_diagonal

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class NewtonConfig:
    max_iters: int = 50
    abs_tol: float = 1e-10
    rel_tol: float = 1e-12
    jacobian_mode: str = "analytic"  # or "finite-difference"
    damping: float | None = 0.5  # backtracking factor; None disables the line search
    max_halvings: int = 20
    # Replace the Newton step by a Levenberg-Marquardt step when the Jacobian
    # is singular, instead of failing.
    regularize_singular: bool = False
    # "linesearch" is plain Newton with backtracking; "ptc" is pseudo-transient
    # continuation, Newton on (u - u_old)/dt + R(u) = 0 with dt grown as |R| falls.
    globalization: str = "linesearch"
    ptc_dt0: float = 1e-3
    ptc_dt_max: float = 1e12

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.globalization not in ("linesearch", "ptc"):
            raise ValueError(f"unknown globalization {self.globalization!r}")
        if self.ptc_dt0 <= 0:
            raise ValueError("ptc_dt0 must be positive")
        if self.jacobian_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown jacobian mode {self.jacobian_mode!r}")


@dataclass(frozen=True)
class FixedPointConfig:
    gamma: float = 1.0
    outer_tol: float = 1e-8
    max_outer: int = 5000
    inner: NewtonConfig = field(default_factory=lambda: NewtonConfig(max_iters=30, abs_tol=1e-13))
    anderson: int = 0  # history depth for Anderson mixing of the outer map; 0 disables

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    initial_residual: float
    converged: bool
    seconds: float
    history: list[float] = field(default_factory=list)
    message: str = ""


def solve_linear(matrix, rhs: np.ndarray, tol: float = 1e-10, refine: int = 2) -> np.ndarray:
    """Sparse LU solve with iterative refinement and a residual certificate."""
    A = sp.csc_matrix(matrix)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    b = np.asarray(rhs, dtype=float)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from None
    diag = np.abs(lu.U.diagonal())
    if diag.size and (diag.min() <= 1e-14 * max(diag.max(), 1e-300)):
        raise SingularSystemError(
            f"numerically singular matrix: smallest pivot {diag.min():.3e}, largest {diag.max():.3e}"
        )
    x = lu.solve(b)
    bnorm = max(np.linalg.norm(b), 1e-300)
    for _ in range(refine):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * bnorm:
            break
        x = x + lu.solve(r)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("linear solve produced non-finite values")
    res = np.linalg.norm(b - A @ x)
    if res > tol * bnorm and np.linalg.norm(b) > 0:
        raise SingularSystemError(f"linear solve residual {res / bnorm:.2e} exceeds {tol:.0e} (ill-conditioned)")
    return x


def newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], sp.spmatrix | np.ndarray],
    u0: np.ndarray,
    cfg: NewtonConfig,
) -> tuple[np.ndarray, SolveReport]:
    """Damped Newton with step halving until the residual norm decreases.

    With ``cfg.globalization == "ptc"`` the pseudo-transient variant is used
    instead; ``max_iters`` then counts accepted and rejected steps together.
    """
    if cfg.globalization == "ptc":
        return _ptc(residual, jacobian, u0, cfg)
    start = time.perf_counter()
    u = np.array(u0, dtype=float)
    r = residual(u)
    rnorm = r0 = float(np.linalg.norm(r))
    target = max(cfg.abs_tol, cfg.rel_tol * r0)
    history = [rnorm]
    message = ""
    it = 0
    while rnorm > target and it < cfg.max_iters:
        it += 1
        J = jacobian(u)
        try:
            du = solve_linear(J, -r, tol=1e-6)
        except SingularSystemError as exc:
            if not cfg.regularize_singular:
                raise SingularSystemError(f"singular Jacobian ({exc})", iteration=it) from None
            du = _regularized_step(J, r, residual, u, rnorm)
        lam = 1.0
        trial = u + du
        r_trial = residual(trial)
        n_trial = float(np.linalg.norm(r_trial))
        if cfg.damping is not None:
            halvings = 0
            while not (n_trial < rnorm) and halvings < cfg.max_halvings:
                lam *= cfg.damping
                trial = u + lam * du
                r_trial = residual(trial)
                n_trial = float(np.linalg.norm(r_trial))
                halvings += 1
            if not (n_trial < rnorm):
                message = f"line search stalled at iteration {it}"
                log.info(message)
                break
        u, r, rnorm = trial, r_trial, n_trial
        history.append(rnorm)
        log.debug("newton %d: |R| = %.3e (step %.3g)", it, rnorm, lam)
    converged = rnorm <= target
    if not converged and not message:
        message = f"no convergence in {cfg.max_iters} iterations"
    return u, SolveReport(it, rnorm, r0, converged, time.perf_counter() - start, history, message)


def _ptc(residual, jacobian, u0, cfg: NewtonConfig) -> tuple[np.ndarray, SolveReport]:
    """Pseudo-transient continuation with strict residual decrease.

    A step solves ``(I/dt + J) du = -R``; it is accepted only if ``|R|`` does
    not grow, after which ``dt`` is multiplied by ``min(2, |R_old|/|R_new|)``.
    Rejected steps shrink ``dt`` by four.
    """
    start = time.perf_counter()
    u = np.array(u0, dtype=float)
    r = residual(u)
    rnorm = r0 = float(np.linalg.norm(r))
    target = max(cfg.abs_tol, cfg.rel_tol * r0)
    eye = sp.identity(u.size, format="csr")
    history = [rnorm]
    dt = cfg.ptc_dt0
    it = 0
    message = ""
    J = None
    while rnorm > target and it < cfg.max_iters:
        it += 1
        if J is None:
            J = sp.csr_matrix(jacobian(u))
        try:
            du = solve_linear(eye / dt + J, -r, tol=1e-6)
        except SingularSystemError:
            du = None
        if du is not None:
            r_trial = residual(u + du)
            n_trial = float(np.linalg.norm(r_trial))
        if du is None or not np.isfinite(n_trial) or n_trial > rnorm:
            dt *= 0.25
            if dt < 1e-14 * cfg.ptc_dt0:
                message = f"pseudo-time step collapsed at iteration {it}"
                break
            continue
        u, r = u + du, r_trial
        dt = min(dt * min(2.0, rnorm / max(n_trial, 1e-300)), cfg.ptc_dt_max)
        rnorm = n_trial
        history.append(rnorm)
        J = None
        log.debug("ptc %d: |R| = %.3e dt = %.3g", it, rnorm, dt)
    converged = rnorm <= target
    if not converged and not message:
        message = f"no convergence in {cfg.max_iters} iterations"
    return u, SolveReport(it, rnorm, r0, converged, time.perf_counter() - start, history, message)


def _regularized_step(J, r, residual, u, rnorm) -> np.ndarray:
    """Levenberg-Marquardt step ``(J^T J + mu I) du = -J^T r`` with ``mu`` raised until ``|R|`` drops."""
    J = sp.csr_matrix(J)
    JtJ = (J.T @ J).tocsc()
    g = J.T @ r
    eye = sp.identity(J.shape[0], format="csc")
    mu = 1e-10 * max(JtJ.diagonal().max(), 1e-300)
    for _ in range(40):
        du = spla.splu(JtJ + mu * eye).solve(-g)
        if np.linalg.norm(residual(u + du)) < rnorm:
            break
        mu *= 10.0
    return du


def _as_coeffs(space: DgSpace, u0) -> np.ndarray:
    if u0 is None:
        return np.zeros(space.ndofs)
    if isinstance(u0, DgFunction):
        return u0.coeffs.copy()
    return np.asarray(u0, dtype=float).copy()


def poisson_warm_start(system: DiscreteSystem) -> DgFunction:
    """Solve ``tr(D~^2) u = s`` with the problem's Dirichlet data.

    ``s`` is ``problem.laplacian_guess`` when given and zero otherwise, so the
    default is the discrete harmonic extension of the boundary data.
    """
    space, prob = system.space, system.problem
    lap = system.derivs.laplacian()
    rhs = np.zeros(space.ndofs)
    if prob.laplacian_guess is not None:
        t = system.t
        rhs = space.l2_project(lambda x, y: prob.laplacian_guess(x, y, t)).coeffs
    return DgFunction(space, solve_linear(lap.matrix, rhs - lap.offset))


def newton_reduced(
    problem: PdeProblem,
    space: DgSpace,
    cfg: NumOpConfig,
    ncfg: NewtonConfig = NewtonConfig(),
    u0: DgFunction | np.ndarray | None = None,
    system: DiscreteSystem | None = None,
) -> tuple[DgFunction, SolveReport]:
    """Solve the reduced system with Newton from ``u0`` (zero by default)."""
    system = system or DiscreteSystem(problem, space, cfg)
    if ncfg.jacobian_mode == "analytic":
        jac = system.jacobian
    else:
        jac = system.jacobian_fd
    u, report = newton(system.residual, jac, _as_coeffs(space, u0), ncfg)
    return DgFunction(space, u), report


class _LocalHessianStep:
    """Cell-local solve for the diagonal of the averaged mixed Hessian.

    For fixed ``u`` the unknowns are ``d_i``, the diagonal entries of the
    averaged mixed Hessian, and the equations are

        F(P*, q_avg, u, x) + alpha : (S - 2 P*) + gamma ((S - 2 P*)_ii - M_ii) = 0,

    tested against every basis function.  ``P*`` is ``D~^2 u`` with its diagonal
    replaced by ``d``, ``S = P++ + P--`` and ``M`` is the numerical moment of
    ``u``.  The gamma term vanishes when ``d`` equals the diagonal of ``D~^2 u``,
    so a fixed point of the splitting solves the reduced system.
    """

    def __init__(self, system: DiscreteSystem, gamma: float):
        self.system = system
        self.gamma = gamma

    def prepare(self, u: np.ndarray):
        sys = self.system
        d = sys.derivs
        space = sys.space
        self.fields = sys.fields(u)  # D~^2 entries, q_avg, v at quadrature points
        S = {(i, j): (d.P("+", "+", i, j)(u) + d.P("-", "-", i, j)(u)) for i in AXES for j in AXES}
        self.S = S
        self.M = {i: S[(i, i)] - 2.0 * d.dtilde(i, i)(u) for i in AXES}
        self.offdiag = {(0, 1): d.dtilde(0, 1)(u), (1, 0): d.dtilde(1, 0)(u)}
        alpha = sys.cfg.alpha
        lin = sum(alpha[i, j] * S[(i, j)] for i in AXES for j in AXES)
        lin = lin - 2.0 * (alpha[0, 1] * self.offdiag[(0, 1)] + alpha[1, 0] * self.offdiag[(1, 0)])
        self.lin_const = lin + d.viscosity(sys.cfg.beta)(u)
        self.start = np.concatenate([d.dtilde(i, i)(u) for i in AXES])
        self.n = space.ndofs

    def _split(self, dvec):
        return dvec[: self.n], dvec[self.n:]

    def _pointwise(self, dvec):
        sys = self.system
        vals = self.fields.copy()
        d0, d1 = self._split(dvec)
        vals[0] = sys.space.values_at_quad(d0)
        vals[3] = sys.space.values_at_quad(d1)
        return vals, sys._pointwise(vals)

    def residual(self, dvec):
        sys = self.system
        alpha, g = sys.cfg.alpha, self.gamma
        vals, (P, q, v, x, y) = self._pointwise(dvec)
        Fm = sys.space.test_against(sys.problem.F(P, q, v, x, y, sys.t).reshape(vals.shape[1:]))
        d0, d1 = self._split(dvec)
        common = Fm + self.lin_const - 2.0 * (alpha[0, 0] * d0 + alpha[1, 1] * d1)
        r0 = common + g * (self.S[(0, 0)] - 2.0 * d0 - self.M[0])
        r1 = common + g * (self.S[(1, 1)] - 2.0 * d1 - self.M[1])
        return np.concatenate([r0, r1])

    def jacobian(self, dvec):
        sys = self.system
        alpha, g = sys.cfg.alpha, self.gamma
        vals, (P, q, v, x, y) = self._pointwise(dvec)
        dP, _, _ = sys.problem.partials(P, q, v, x, y, sys.t)
        nc, nq = vals.shape[1:]
        B, w = sys.space.B, sys.space.quad_weights
        n = self.n
        blocks = []
        for k in AXES:
            dk = dP[:, k, k].reshape(nc, nq) * w[None, :]
            blocks.append(_block_diagonal(np.einsum("qa,nq,qb->nab", B, dk, B)))
        I = sp.identity(n, format="csr")
        c = [blocks[k] - 2.0 * alpha[k, k] * I for k in AXES]
        J = sp.bmat([[c[0] - 2 * g * I, c[1]], [c[0], c[1] - 2 * g * I]], format="csr")
        return J


def fixed_point_solve(
    problem: PdeProblem,
    space: DgSpace,
    cfg: NumOpConfig,
    fcfg: FixedPointConfig = FixedPointConfig(),
    u0: DgFunction | np.ndarray | None = None,
    system: DiscreteSystem | None = None,
) -> tuple[DgFunction, SolveReport]:
    """Inverse-Poisson splitting iteration.

    Each sweep solves the local Hessian equations for the diagonal of the
    averaged mixed Hessian, then the discrete Poisson problem
    ``tr(D~^2) u = tr(diag)`` with Dirichlet offsets.  Stops when the relative
    change of the diagonal falls below ``outer_tol``.
    """
    start = time.perf_counter()
    system = system or DiscreteSystem(problem, space, cfg)
    step = _LocalHessianStep(system, fcfg.gamma)
    lap = system.derivs.laplacian()
    lu = spla.splu(sp.csc_matrix(lap.matrix))
    n = space.ndofs

    def sweep(u):
        step.prepare(u)
        d, rep = newton(step.residual, step.jacobian, step.start, fcfg.inner)
        if not rep.converged:
            raise SolverError(f"local Hessian solve failed: {rep.message}")
        u_new = lu.solve(d[:n] + d[n:] - lap.offset)
        return u_new, d

    u = _as_coeffs(space, u0)
    r0 = float(np.linalg.norm(system.residual(u)))
    history = []
    d_old = None
    converged = False
    it = 0
    # Anderson mixing on the u-map (optional).
    U_hist: list[np.ndarray] = []
    G_hist: list[np.ndarray] = []
    while it < fcfg.max_outer:
        it += 1
        u_map, d = sweep(u)
        if d_old is not None:
            change = np.linalg.norm(d - d_old) / max(np.linalg.norm(d), 1e-300)
            history.append(change)
            if change <= fcfg.outer_tol:
                u = u_map
                converged = True
                break
        d_old = d
        if fcfg.anderson > 0:
            U_hist.append(u.copy())
            G_hist.append(u_map - u)
            U_hist, G_hist = U_hist[-(fcfg.anderson + 1):], G_hist[-(fcfg.anderson + 1):]
            if len(G_hist) > 1:
                dG = np.column_stack([G_hist[k + 1] - G_hist[k] for k in range(len(G_hist) - 1)])
                dU = np.column_stack([U_hist[k + 1] - U_hist[k] for k in range(len(U_hist) - 1)])
                coef, *_ = np.linalg.lstsq(dG, G_hist[-1], rcond=None)
                u = u_map - (dU + dG) @ coef
            else:
                u = u_map
        else:
            u = u_map
    res = float(np.linalg.norm(system.residual(u)))
    msg = "" if converged else f"no convergence in {fcfg.max_outer} outer iterations"
    report = SolveReport(it, res, r0, converged, time.perf_counter() - start, history, msg)
    return DgFunction(space, u), report
