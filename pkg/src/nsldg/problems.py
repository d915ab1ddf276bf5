"""Fully nonlinear model problems ``F(D^2 u, grad u, u, x, t) = 0``.

Every operator is vectorised over points: ``P`` has shape ``(n, 2, 2)``,
``q`` shape ``(n, 2)``, and ``v``, ``x``, ``y`` shape ``(n,)``.  Source terms
are folded into ``F`` so the discrete equation is always ``F_hat = 0``.
Parabolic problems read ``u_t + F = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import RectDomain

Operator = Callable[..., np.ndarray]
Partials = Callable[..., tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class PdeProblem:
    name: str
    domain: RectDomain
    F: Operator  # F(P, q, v, x, y, t) -> (n,)
    partials: Partials  # -> (dF/dP (n,2,2), dF/dq (n,2), dF/dv (n,))
    exact: Callable | None = None  # exact(x, y, t)
    exact_grad: Callable | None = None  # -> (ux, uy)
    exact_hess: Callable | None = None  # -> (uxx, uxy, uyy)
    boundary: Callable | None = None  # g(x, y, t); defaults to the exact solution
    initial: Callable | None = None  # u0(x, y)
    parabolic: bool = False
    # Points where the exact solution is not twice differentiable.
    singular: Callable | None = None  # (x, y) -> bool mask
    # Rough guess for the Laplacian of the solution, used by the Poisson warm start.
    laplacian_guess: Callable | None = None  # (x, y, t) -> values

    def g(self, t: float = 0.0) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """Dirichlet data frozen at time ``t`` as a function of ``(x, y)``."""
        src = self.boundary or self.exact
        if src is None:
            raise ValueError(f"{self.name} has no boundary data")
        return lambda x, y: src(x, y, t)

    def u0(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        if self.initial is not None:
            return self.initial
        if self.exact is None:
            raise ValueError(f"{self.name} has no initial data")
        return lambda x, y: self.exact(x, y, 0.0)

    def exact_at(self, t: float = 0.0) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        if self.exact is None:
            raise ValueError(f"{self.name} has no exact solution")
        return lambda x, y: self.exact(x, y, t)


def _broadcast(P, q, v, x, y):
    P = np.asarray(P, dtype=float)
    n = P.shape[0] if P.ndim == 3 else 1
    P = P.reshape(n, 2, 2)
    q = np.asarray(q, dtype=float).reshape(n, 2)
    v = np.broadcast_to(np.asarray(v, dtype=float), (n,))
    x = np.broadcast_to(np.asarray(x, dtype=float), (n,))
    y = np.broadcast_to(np.asarray(y, dtype=float), (n,))
    return P, q, v, x, y


def eval_F(problem: PdeProblem, P, q, v, x, t: float = 0.0) -> np.ndarray:
    """``F`` at one or many states; ``x`` is a point ``(x, y)`` or a pair of arrays."""
    P, q, v, xs, ys = _broadcast(P, q, v, x[0], x[1])
    return problem.F(P, q, v, xs, ys, t)


def eval_F_partials(problem: PdeProblem, P, q, v, x, t: float = 0.0):
    P, q, v, xs, ys = _broadcast(P, q, v, x[0], x[1])
    return problem.partials(P, q, v, xs, ys, t)


# -- building blocks ---------------------------------------------------------------


def _neg_det(P):
    return -(P[:, 0, 0] * P[:, 1, 1] - P[:, 0, 1] * P[:, 1, 0])


def _neg_det_partials(P, q):
    n = P.shape[0]
    dP = np.empty((n, 2, 2))
    dP[:, 0, 0] = -P[:, 1, 1]
    dP[:, 1, 1] = -P[:, 0, 0]
    dP[:, 0, 1] = P[:, 1, 0]
    dP[:, 1, 0] = P[:, 0, 1]
    return dP, np.zeros((n, 2)), np.zeros(n)


def _hjb_min(P):
    """``min(-tr P, -tr P / 2)`` and the active coefficient (ties go to ``-tr P``)."""
    lap = P[:, 0, 0] + P[:, 1, 1]
    first = -lap <= -0.5 * lap
    coef = np.where(first, 1.0, 0.5)
    return -coef * lap, coef


def _hjb_partials(P):
    n = P.shape[0]
    _, coef = _hjb_min(P)
    dP = np.zeros((n, 2, 2))
    dP[:, 0, 0] = -coef
    dP[:, 1, 1] = -coef
    return dP, np.zeros((n, 2)), np.zeros(n)


# -- benchmark instances -----------------------------------------------------------


def _monge_ampere_smooth() -> PdeProblem:
    def f(x, y):
        r2 = x**2 + y**2
        return -(1.0 + r2) * np.exp(r2)

    def exact(x, y, t=0.0):
        return np.exp(0.5 * (x**2 + y**2))

    def grad(x, y, t=0.0):
        e = exact(x, y)
        return x * e, y * e

    def hess(x, y, t=0.0):
        e = exact(x, y)
        return (1 + x**2) * e, x * y * e, (1 + y**2) * e

    return PdeProblem(
        name="monge-ampere-smooth",
        domain=RectDomain(0.0, 1.0, 0.0, 1.0),
        F=lambda P, q, v, x, y, t: _neg_det(P) - f(x, y),
        partials=lambda P, q, v, x, y, t: _neg_det_partials(P, q),
        exact=exact,
        exact_grad=grad,
        exact_hess=hess,
        # Laplacian of a convex solution with det = -f when both eigenvalues agree
        laplacian_guess=lambda x, y, t: 2.0 * np.sqrt(-f(x, y)),
    )


def _monge_ampere_kink() -> PdeProblem:
    def exact(x, y, t=0.0):
        return np.abs(x) + 0.0 * y

    return PdeProblem(
        name="monge-ampere-kink",
        domain=RectDomain(-1.0, 1.0, -1.0, 1.0),
        F=lambda P, q, v, x, y, t: _neg_det(P),
        partials=lambda P, q, v, x, y, t: _neg_det_partials(P, q),
        exact=exact,
        exact_grad=lambda x, y, t=0.0: (np.sign(x), 0.0 * y),
        exact_hess=lambda x, y, t=0.0: (0.0 * x, 0.0 * x, 0.0 * x),
        singular=lambda x, y: x == 0.0,
    )


def _hjb_patch_source(x, y):
    in_s = ((x > 0) & (x <= np.pi / 2) & (y > -np.pi / 2) & (y <= 0)) | (
        (x > np.pi / 2) & (x <= np.pi) & (y > 0) & (y < np.pi / 2)
    )
    base = np.cos(x) * np.sin(y)
    return np.where(in_s, 2.0 * base, base)


def _hjb_static() -> PdeProblem:
    def exact(x, y, t=0.0):
        return np.cos(x) * np.sin(y)

    return PdeProblem(
        name="hjb-static",
        domain=RectDomain(0.0, np.pi, -np.pi / 2, np.pi / 2),
        F=lambda P, q, v, x, y, t: _hjb_min(P)[0] - _hjb_patch_source(x, y),
        partials=lambda P, q, v, x, y, t: _hjb_partials(P),
        exact=exact,
        exact_grad=lambda x, y, t=0.0: (-np.sin(x) * np.sin(y), np.cos(x) * np.cos(y)),
        exact_hess=lambda x, y, t=0.0: (
            -np.cos(x) * np.sin(y), -np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)
        ),
        singular=lambda x, y: (np.isclose(x, np.pi / 2) | np.isclose(y, 0.0)),
    )


def _infinity_laplacian() -> PdeProblem:
    def F(P, q, v, x, y, t):
        q1, q2 = q[:, 0], q[:, 1]
        return -(q1**2 * P[:, 0, 0] + q1 * q2 * (P[:, 0, 1] + P[:, 1, 0]) + q2**2 * P[:, 1, 1])

    def partials(P, q, v, x, y, t):
        q1, q2 = q[:, 0], q[:, 1]
        n = P.shape[0]
        dP = np.empty((n, 2, 2))
        dP[:, 0, 0] = -(q1**2)
        dP[:, 0, 1] = -q1 * q2
        dP[:, 1, 0] = -q1 * q2
        dP[:, 1, 1] = -(q2**2)
        mixed = P[:, 0, 1] + P[:, 1, 0]
        dq = -np.column_stack([2 * q1 * P[:, 0, 0] + q2 * mixed, q1 * mixed + 2 * q2 * P[:, 1, 1]])
        return dP, dq, np.zeros(n)

    def exact(x, y, t=0.0):
        return np.abs(x) ** (4 / 3) - np.abs(y) ** (4 / 3)

    def grad(x, y, t=0.0):
        return (4 / 3) * np.sign(x) * np.abs(x) ** (1 / 3), -(4 / 3) * np.sign(y) * np.abs(y) ** (1 / 3)

    def hess(x, y, t=0.0):
        return (4 / 9) * np.abs(x) ** (-2 / 3), 0.0 * x, -(4 / 9) * np.abs(y) ** (-2 / 3)

    return PdeProblem(
        name="infinity-laplacian",
        domain=RectDomain(-1.0, 1.0, -1.0, 1.0),
        F=F,
        partials=partials,
        exact=exact,
        exact_grad=grad,
        exact_hess=hess,
        singular=lambda x, y: (x == 0.0) | (y == 0.0),
    )


def _switching_source(x, y, t):
    s = np.where((x < 0) & (y < 0), 2.0 * t**2, np.where((x > 0) & (y > 0), -4.0 * t**2, 0.0))
    return s + 2.0 * t * (x * np.abs(x) + y * np.abs(y))


def _hjb_dynamic() -> PdeProblem:
    # t^2 (x|x| + y|y|) is the field consistent with the source below; the
    # time derivative 2t(x|x| + y|y|) and the switching term s both follow from it.
    def exact(x, y, t=0.0):
        return t**2 * (x * np.abs(x) + y * np.abs(y))

    return PdeProblem(
        name="hjb-dynamic",
        domain=RectDomain(-1.0, 1.0, -1.0, 1.0),
        F=lambda P, q, v, x, y, t: _hjb_min(P)[0] - _switching_source(x, y, t),
        partials=lambda P, q, v, x, y, t: _hjb_partials(P),
        exact=exact,
        exact_grad=lambda x, y, t=0.0: (2 * t**2 * np.abs(x), 2 * t**2 * np.abs(y)),
        exact_hess=lambda x, y, t=0.0: (2 * t**2 * np.sign(x), 0.0 * x, 2 * t**2 * np.sign(y)),
        parabolic=True,
        singular=lambda x, y: (x == 0.0) | (y == 0.0),
    )


def poisson(f: Callable, exact: Callable | None = None, domain: RectDomain | None = None) -> PdeProblem:
    """Linear ``-Laplace(u) = f``; handy for solver and stepping checks."""

    def partials(P, q, v, x, y, t):
        n = P.shape[0]
        dP = np.zeros((n, 2, 2))
        dP[:, 0, 0] = dP[:, 1, 1] = -1.0
        return dP, np.zeros((n, 2)), np.zeros(n)

    return PdeProblem(
        name="poisson",
        domain=domain or RectDomain(0.0, 1.0, 0.0, 1.0),
        F=lambda P, q, v, x, y, t: -(P[:, 0, 0] + P[:, 1, 1]) - f(x, y, t),
        partials=partials,
        exact=exact,
        boundary=None if exact is not None else (lambda x, y, t: 0.0 * x),
    )


def heat(exact: Callable, domain: RectDomain | None = None) -> PdeProblem:
    """``u_t - Laplace(u) = f`` with ``f`` manufactured from a smooth exact field.

    ``exact(x, y, t)`` must come with analytic time and space derivatives via
    ``exact.ut`` and ``exact.lap`` attributes.
    """
    prob = poisson(lambda x, y, t: exact.ut(x, y, t) - exact.lap(x, y, t), exact, domain)
    return PdeProblem(**{**prob.__dict__, "name": "heat", "parabolic": True})


_EXAMPLES = {
    1: _monge_ampere_smooth,
    2: _monge_ampere_kink,
    3: _hjb_static,
    4: _infinity_laplacian,
    5: _hjb_dynamic,
}


def make_example(example_id: int) -> PdeProblem:
    try:
        return _EXAMPLES[int(example_id)]()
    except KeyError:
        raise ValueError(f"unknown example {example_id!r}; choose from {sorted(_EXAMPLES)}") from None
