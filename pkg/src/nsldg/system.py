"""The discrete nonlinear system ``(F_hat[u_h], phi) = 0`` for all basis ``phi``.

With the reduced operators the numerical operator splits into a nonlinear part
``F(D~^2 u, grad_h u, u, x)`` and a linear stabiliser

    2 alpha : (Dbar^2 - D~^2) u + beta . (grad^- - grad^+) u,

which lies in the DG space, so its moments are just its coefficients (the mass
matrix is the identity).  The nonlinear part is tested with cell quadrature.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .numop import NumOpConfig, eval_fhat
from .operators import AXES, SIGNS, AffineOperator, DerivativeSet, LdgOperators
from .problems import PdeProblem
from .space import DgSpace

# Order of the pointwise fields passed to F: P11, P12, P21, P22, q1, q2, v.
FIELD_NAMES = ("P11", "P12", "P21", "P22", "q1", "q2", "v")


def _block_diagonal(blocks: np.ndarray) -> sp.csr_matrix:
    n, k, _ = blocks.shape
    return sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(n * k, n * k)).tocsr()


class DiscreteSystem:
    """Residual and Jacobian of the reduced scheme for one problem and space."""

    def __init__(
        self,
        problem: PdeProblem,
        space: DgSpace,
        cfg: NumOpConfig,
        t: float = 0.0,
        ops: LdgOperators | None = None,
    ):
        if ops is not None and ops.space is not space:
            raise ValueError("operators were assembled for a different space")
        self.problem = problem
        self.space = space
        self.cfg = cfg
        self.ops = ops or LdgOperators(space)
        self.set_time(t)

    def set_time(self, t: float) -> None:
        """Rebind the Dirichlet data at time ``t``; matrices are reused."""
        self.t = float(t)
        self.derivs: DerivativeSet = self.ops.bind(self.problem.g(self.t))
        d = self.derivs
        ident = AffineOperator(sp.identity(self.space.ndofs, format="csr"), np.zeros(self.space.ndofs))
        self.field_ops = [d.dtilde(0, 0), d.dtilde(0, 1), d.dtilde(1, 0), d.dtilde(1, 1), d.grad_avg(0), d.grad_avg(1), ident]
        alpha, beta = self.cfg.alpha, self.cfg.beta
        stab = None
        for i in AXES:
            for j in AXES:
                if alpha[i, j] != 0.0:
                    term = (2.0 * alpha[i, j]) * (d.dbar(i, j) - d.dtilde(i, j))
                    stab = term if stab is None else stab + term
        visc = d.viscosity(beta)
        self.stabilizer = visc if stab is None else stab + visc

    # -- pointwise fields ------------------------------------------------------------

    def fields(self, u: np.ndarray) -> np.ndarray:
        """Quadrature values of all F arguments, shape ``(7, ncells, nq)``."""
        return np.stack([self.space.values_at_quad(op(u)) for op in self.field_ops])

    def _pointwise(self, vals: np.ndarray):
        nc, nq = vals.shape[1:]
        P = np.moveaxis(vals[:4], 0, -1).reshape(nc * nq, 2, 2)
        q = np.moveaxis(vals[4:6], 0, -1).reshape(nc * nq, 2)
        v = vals[6].reshape(-1)
        x, y = self.space.quad_points
        return P, q, v, x.reshape(-1), y.reshape(-1)

    # -- residual and Jacobian -------------------------------------------------------

    def residual(self, u: np.ndarray) -> np.ndarray:
        vals = self.fields(u)
        P, q, v, x, y = self._pointwise(vals)
        Fq = self.problem.F(P, q, v, x, y, self.t).reshape(vals.shape[1:])
        return self.space.test_against(Fq) + self.stabilizer(u)

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        vals = self.fields(u)
        P, q, v, x, y = self._pointwise(vals)
        dP, dq, dv = self.problem.partials(P, q, v, x, y, self.t)
        nc, nq = vals.shape[1:]
        partial = [dP[:, 0, 0], dP[:, 0, 1], dP[:, 1, 0], dP[:, 1, 1], dq[:, 0], dq[:, 1], dv]
        B = self.space.B
        w = self.space.quad_weights
        J = self.stabilizer.matrix.copy()
        for d, op in zip(partial, self.field_ops):
            d = np.broadcast_to(d, (nc * nq,)).reshape(nc, nq)
            if not np.any(d):
                continue
            blocks = np.einsum("qk,nq,ql->nkl", B, d * w[None, :], B)
            J = J + _block_diagonal(blocks) @ op.matrix
        return J.tocsr()

    def jacobian_fd(self, u: np.ndarray, eps: float = 1e-7) -> np.ndarray:
        """Dense columnwise central-difference Jacobian (small systems only)."""
        n = u.size
        J = np.empty((n, n))
        for k in range(n):
            h = eps * max(1.0, abs(u[k]))
            e = np.zeros(n)
            e[k] = h
            J[:, k] = (self.residual(u + e) - self.residual(u - e)) / (2 * h)
        return J

    # -- an independent evaluation path ----------------------------------------------

    def residual_full(self, u: np.ndarray) -> np.ndarray:
        """Moments of the pointwise ``F_hat`` built from all six derivative fields.

        Uses every ``P^{mu nu}`` and both ``q^{+-}`` at quadrature points rather
        than the reduced split, so it cross-checks :meth:`residual`.
        """
        sp_ = self.space
        d = self.derivs
        nc, nq = sp_.mesh.ncells, sp_.B.shape[0]

        def mat(mu, nu):
            comps = [sp_.values_at_quad(d.P(mu, nu, i, j)(u)) for i in AXES for j in AXES]
            return np.stack(comps, axis=-1).reshape(nc * nq, 2, 2)

        def vec(mu):
            return np.stack([sp_.values_at_quad(d.q(mu, i)(u)) for i in AXES], axis=-1).reshape(nc * nq, 2)

        Pm = {mu + nu: mat(mu, nu) for mu in SIGNS for nu in SIGNS}
        x, y = sp_.quad_points
        vals = eval_fhat(
            self.cfg, self.problem, Pm["++"], Pm["+-"], Pm["-+"], Pm["--"], vec("+"), vec("-"),
            sp_.values_at_quad(u).reshape(-1), (x.reshape(-1), y.reshape(-1)), self.t,
        )
        return sp_.test_against(vals.reshape(nc, nq))
