"""Lax-Friedrichs-like numerical operator and its structural checks.

``F_hat`` takes the four Hessian approximations, both gradient approximations,
the value and the point.  It evaluates ``F`` at the averaged mixed Hessian and
averaged gradient, then adds two stabilisers:

* the numerical moment ``alpha : (P++ - P+- - P-+ + P--)``;
* the numerical viscosity ``beta . (q- - q+)``.

The viscosity sign is the one that makes ``F_hat`` nonincreasing in ``q+``
and nondecreasing in ``q-``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problems import PdeProblem

HESSIAN_KEYS = ("++", "+-", "-+", "--")
# +1: F_hat must be nondecreasing in that argument, -1: nonincreasing.
MONOTONE_SIGNS = {"P++": 1, "P+-": -1, "P-+": -1, "P--": 1, "q+": -1, "q-": 1, "v": 1}


@dataclass(frozen=True)
class NumOpConfig:
    alpha: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).reshape(2, 2)
        b = np.asarray(self.beta, dtype=float).reshape(2)
        if np.any(b < 0):
            raise ValueError("viscosity weights must be nonnegative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def scaled_identity(cls, c: float, beta: float = 0.0) -> "NumOpConfig":
        return cls(c * np.eye(2), beta * np.ones(2))

    @classmethod
    def scaled_ones(cls, c: float, beta: float = 0.0) -> "NumOpConfig":
        return cls(c * np.ones((2, 2)), beta * np.ones(2))

    @property
    def moment_sign(self) -> str:
        eig = np.linalg.eigvalsh(0.5 * (self.alpha + self.alpha.T))
        if np.all(eig >= -1e-14):
            return "psd"
        if np.all(eig <= 1e-14):
            return "nsd"
        return "indefinite"


def eval_fhat(
    cfg: NumOpConfig,
    problem: PdeProblem,
    Ppp, Ppm, Pmp, Pmm, qp, qm, v, x, t: float = 0.0,
) -> np.ndarray:
    """Vectorised ``F_hat``; matrices ``(n, 2, 2)``, vectors ``(n, 2)``, ``x = (xs, ys)``."""
    Ppp, Ppm, Pmp, Pmm = (np.asarray(P, dtype=float).reshape(-1, 2, 2) for P in (Ppp, Ppm, Pmp, Pmm))
    n = Ppp.shape[0]
    qp = np.asarray(qp, dtype=float).reshape(n, 2)
    qm = np.asarray(qm, dtype=float).reshape(n, 2)
    v = np.broadcast_to(np.asarray(v, dtype=float), (n,))
    xs = np.broadcast_to(np.asarray(x[0], dtype=float), (n,))
    ys = np.broadcast_to(np.asarray(x[1], dtype=float), (n,))
    val = problem.F(0.5 * (Pmp + Ppm), 0.5 * (qm + qp), v, xs, ys, t)
    jump2 = (Ppp - Ppm) - (Pmp - Pmm)
    val = val + np.einsum("ij,nij->n", cfg.alpha, jump2)
    val = val + (qm - qp) @ cfg.beta
    return val


@dataclass
class ConsistencyReport:
    samples: int
    max_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


@dataclass
class MonotonicityReport:
    samples: int
    checks: int
    violations: dict[str, int]
    worst: float  # most negative signed change seen

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    @property
    def passed(self) -> bool:
        return self.total_violations == 0


def _sample_states(problem: PdeProblem, rng, n, box):
    P_lo, P_hi = box.get("P", (-3.0, 3.0))
    q_lo, q_hi = box.get("q", (-2.0, 2.0))
    v_lo, v_hi = box.get("v", (-2.0, 2.0))
    d = problem.domain
    P = rng.uniform(P_lo, P_hi, size=(n, 2, 2))
    if "P_off" in box:
        # separate range for the off-diagonal entries
        off = rng.uniform(*box["P_off"], size=(n, 2))
        P[:, 0, 1], P[:, 1, 0] = off[:, 0], off[:, 1]
    if box.get("symmetric", True):
        P = 0.5 * (P + P.transpose(0, 2, 1))
    q = rng.uniform(q_lo, q_hi, size=(n, 2))
    v = rng.uniform(v_lo, v_hi, size=n)
    xs = rng.uniform(d.x_lo, d.x_hi, size=n)
    ys = rng.uniform(d.y_lo, d.y_hi, size=n)
    t = float(box.get("t", 0.5 if problem.parabolic else 0.0))
    return P, q, v, xs, ys, t


def check_consistency(
    cfg: NumOpConfig, problem: PdeProblem, samples: int = 1000, seed: int = 0, tol: float = 1e-12,
    box: dict | None = None,
) -> ConsistencyReport:
    """Compare ``F_hat(P, P, P, P, q, q, v, x)`` with ``F(P, q, v, x)`` at random states."""
    rng = np.random.default_rng(seed)
    P, q, v, xs, ys, t = _sample_states(problem, rng, samples, box or {})
    fhat = eval_fhat(cfg, problem, P, P, P, P, q, q, v, (xs, ys), t)
    f = problem.F(P, q, v, xs, ys, t)
    return ConsistencyReport(samples, float(np.max(np.abs(fhat - f))), tol)


def _directions(mode: str):
    """Unit perturbations of one matrix argument."""
    if mode == "entrywise":
        for i in range(2):
            for j in range(2):
                E = np.zeros((2, 2))
                E[i, j] = 1.0
                yield f"{i}{j}", E
    elif mode == "loewner":
        # rank-one PSD directions covering the cone generators used in practice
        for name, w in (("e1", (1, 0)), ("e2", (0, 1)), ("d+", (1, 1)), ("d-", (1, -1))):
            w = np.asarray(w, dtype=float)
            yield name, np.outer(w, w) / (w @ w)
    else:
        raise ValueError(f"unknown perturbation mode {mode!r}")


def check_gmonotonicity(
    cfg: NumOpConfig,
    problem: PdeProblem,
    box: dict | None = None,
    samples: int = 1000,
    step: float = 1e-3,
    seed: int = 0,
    mode: str = "entrywise",
    tol: float = 1e-12,
) -> MonotonicityReport:
    """Perturb each argument upward by ``step`` and count sign-pattern violations.

    ``mode="entrywise"`` perturbs matrix arguments one component at a time, as
    in the componentwise ordering of the monotonicity definition.
    ``mode="loewner"`` instead perturbs by positive semi-definite rank-one
    matrices, the order in which elliptic operators are monotone.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(seed)
    box = box or {}
    P, q, v, xs, ys, t = _sample_states(problem, rng, samples, box)
    args = {"P++": P, "P+-": P.copy(), "P-+": P.copy(), "P--": P.copy()}
    # independent draws for each Hessian slot make the check stronger
    for key in ("P+-", "P-+", "P--"):
        args[key] = _sample_states(problem, rng, samples, box)[0]
    args["q+"] = q
    args["q-"] = _sample_states(problem, rng, samples, box)[1]
    args["v"] = v

    def fhat(a):
        return eval_fhat(cfg, problem, a["P++"], a["P+-"], a["P-+"], a["P--"], a["q+"], a["q-"], a["v"], (xs, ys), t)

    base = fhat(args)
    scale = 1.0 + np.abs(base)
    violations: dict[str, int] = {}
    worst = 0.0
    checks = 0
    for name, sign in MONOTONE_SIGNS.items():
        if name.startswith("P"):
            perts = [(f"{name}[{tag}]", E[None]) for tag, E in _directions(mode)]
        elif name.startswith("q"):
            perts = [(f"{name}[{i}]", np.eye(2)[i][None]) for i in range(2)]
        else:
            perts = [(name, 1.0)]
        for label, E in perts:
            shifted = dict(args)
            shifted[name] = args[name] + step * E
            change = sign * (fhat(shifted) - base) / step
            bad = change < -tol * scale / step
            checks += samples
            violations[label] = int(np.count_nonzero(bad))
            worst = min(worst, float(change.min()))
    return MonotonicityReport(samples, checks, violations, worst)
