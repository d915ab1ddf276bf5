import numpy as np
import pytest

from nsldg.mesh import build_mesh
from nsldg.problems import eval_F, eval_F_partials, heat, make_example, poisson
from nsldg.space import DgSpace

EXAMPLES = [1, 2, 3, 4, 5]


def random_states(problem, n, seed=0):
    rng = np.random.default_rng(seed)
    d = problem.domain
    P = rng.uniform(-2, 2, size=(n, 2, 2))
    P = 0.5 * (P + P.transpose(0, 2, 1))
    q = rng.uniform(-2, 2, size=(n, 2))
    v = rng.uniform(-1, 1, size=n)
    xs = rng.uniform(d.x_lo, d.x_hi, size=n)
    ys = rng.uniform(d.y_lo, d.y_hi, size=n)
    return P, q, v, xs, ys


def exact_args(problem, x, y, t):
    uxx, uxy, uyy = problem.exact_hess(x, y, t)
    ux, uy = problem.exact_grad(x, y, t)
    P = np.stack([np.stack([uxx, uxy], -1), np.stack([uxy, uyy], -1)], -2)
    q = np.stack([ux + 0 * x, uy + 0 * x], -1)
    return P, q, problem.exact(x, y, t)


def test_unknown_example_rejected():
    with pytest.raises(ValueError):
        make_example(6)


def test_example_1_closed_forms():
    p = make_example(1)
    assert eval_F(p, np.zeros((2, 2)), [0, 0], 0.0, (0.0, 0.0))[0] == pytest.approx(1.0)  # -f(0,0)
    assert p.exact(1.0, 1.0) == pytest.approx(np.e)
    assert eval_F(p, np.eye(2), [3.0, -1.0], 0.0, (0.0, 0.0))[0] == pytest.approx(0.0, abs=1e-15)


def test_example_3_patch_source():
    p = make_example(3)
    x, y = np.pi / 4, -np.pi / 4
    # F at P = 0 is -f; the point lies in the doubled patch
    assert eval_F(p, np.zeros((2, 2)), [0, 0], 0.0, (x, y))[0] == pytest.approx(1.0)
    # outside the patch the source is the plain cos x sin y
    assert eval_F(p, np.zeros((2, 2)), [0, 0], 0.0, (np.pi / 4, np.pi / 4))[0] == pytest.approx(-0.5)


@pytest.mark.parametrize("pval", [-1.5, 0.0, 2.0])
def test_example_3_min_of_laplacians(pval):
    p = make_example(3)
    x, y = 1.0, 1.0  # outside the doubled patch
    f = np.cos(x) * np.sin(y)
    got = eval_F(p, pval * np.eye(2), [0, 0], 0.0, (x, y))[0]
    assert got == pytest.approx(min(-2 * pval, -pval) - f)


def test_example_5_source():
    p = make_example(5)
    # u_t = 0 state: F(0) at (-0.5, -0.5, t = 1) is -f = -(2 + 2 * (-0.5)) = -1
    assert eval_F(p, np.zeros((2, 2)), [0, 0], 0.0, (-0.5, -0.5), t=1.0)[0] == pytest.approx(-1.0)
    assert p.parabolic
    np.testing.assert_allclose(p.u0()(np.array([0.3, -0.8]), np.array([0.1, 0.9])), 0.0)


@pytest.mark.parametrize("k", [1, 2])
def test_monge_ampere_at_zero_hessian(k):
    p = make_example(k)
    x, y = 0.3, 0.6
    f = -(1 + x**2 + y**2) * np.exp(x**2 + y**2) if k == 1 else 0.0
    assert eval_F(p, np.zeros((2, 2)), [1, 1], 0.0, (x, y))[0] == pytest.approx(-f)


def test_monge_ampere_partials_at_identity():
    dP, dq, dv = eval_F_partials(make_example(2), np.eye(2), [0, 0], 0.0, (0.1, 0.2))
    np.testing.assert_allclose(dP[0], -np.eye(2))
    assert not np.any(dq) and not np.any(dv)


def test_hjb_partials_active_branch_and_tie():
    p = make_example(3)
    dP, _, _ = eval_F_partials(p, np.eye(2), [0, 0], 0.0, (1.0, 0.5))  # -tr P < -tr P / 2
    np.testing.assert_allclose(dP[0], -np.eye(2))
    dP, _, _ = eval_F_partials(p, -np.eye(2), [0, 0], 0.0, (1.0, 0.5))
    np.testing.assert_allclose(dP[0], -0.5 * np.eye(2))
    dP, _, _ = eval_F_partials(p, np.zeros((2, 2)), [0, 0], 0.0, (1.0, 0.5))  # tie goes to -tr P
    np.testing.assert_allclose(dP[0], -np.eye(2))


@pytest.mark.parametrize("k", EXAMPLES + ["poisson"])
def test_partials_match_central_differences(k):
    p = poisson(lambda x, y, t: x * y) if k == "poisson" else make_example(k)
    P, q, v, xs, ys = random_states(p, 100, seed=7)
    t = 0.6
    dP, dq, dv = p.partials(P, q, v, xs, ys, t)
    eps = 1e-6

    def F(P_, q_, v_):
        return p.F(P_, q_, v_, xs, ys, t)

    def close(a, b):
        assert np.max(np.abs(a - b) / (1.0 + np.abs(b))) <= 1e-5

    for i in range(2):
        for j in range(2):
            E = np.zeros((1, 2, 2))
            E[0, i, j] = eps
            fd = (F(P + E, q, v) - F(P - E, q, v)) / (2 * eps)
            # the HJB min is only piecewise smooth; skip states within eps of the switch
            ok = np.abs(P[:, 0, 0] + P[:, 1, 1]) > 1e-4
            close(dP[ok, i, j], fd[ok])
        e = np.zeros((1, 2))
        e[0, i] = eps
        fd = (F(P, q + e, v) - F(P, q - e, v)) / (2 * eps)
        close(dq[:, i], fd)
    fd = (F(P, q, v + eps) - F(P, q, v - eps)) / (2 * eps)
    close(np.broadcast_to(dv, fd.shape), fd)


@pytest.mark.parametrize("k", EXAMPLES)
def test_exact_solutions_solve_the_pde(k):
    p = make_example(k)
    V = DgSpace(build_mesh(p.domain, 7, 9), 2)
    x, y = (a.ravel() for a in V.quad_points)
    if p.singular is not None:
        keep = ~p.singular(x, y)
        x, y = x[keep], y[keep]
    t = 0.7 if p.parabolic else 0.0
    P, q, v = exact_args(p, x, y, t)
    res = p.F(P, q, v, x, y, t)
    if p.parabolic:
        res = res + 2 * t * (x * np.abs(x) + y * np.abs(y))  # u_t
    assert np.max(np.abs(res)) <= 1e-10


@pytest.mark.parametrize("k", EXAMPLES)
def test_ellipticity_along_exact_solutions(k):
    p = make_example(k)
    V = DgSpace(build_mesh(p.domain, 6, 6), 1)
    x, y = (a.ravel() for a in V.quad_points)
    t = 0.5 if p.parabolic else 0.0
    P, q, v = exact_args(p, x, y, t)
    dP, _, _ = p.partials(P, q, v, x, y, t)
    eig = np.linalg.eigvalsh(0.5 * (dP + dP.transpose(0, 2, 1)))
    assert eig.max() <= 1e-12


def test_boundary_defaults_to_exact_solution():
    p = make_example(2)
    x = np.array([-1.0, 0.25])
    np.testing.assert_allclose(p.g()(x, 0 * x), np.abs(x))
    lap = poisson(lambda x, y, t: 0 * x)
    np.testing.assert_allclose(lap.g()(x, x), 0.0)
    with pytest.raises(ValueError):
        lap.exact_at()


def test_heat_problem_from_manufactured_field():
    def exact(x, y, t):
        return np.exp(-t) * np.sin(np.pi * x) * np.sin(np.pi * y)

    exact.ut = lambda x, y, t: -exact(x, y, t)
    exact.lap = lambda x, y, t: -2 * np.pi**2 * exact(x, y, t)
    p = heat(exact)
    assert p.parabolic and p.name == "heat"
    x, y, t = np.array([0.3]), np.array([0.6]), 0.4
    P = np.array([[[exact.lap(x, y, t)[0] / 2, 0], [0, exact.lap(x, y, t)[0] / 2]]])
    # u_t - lap u - f = 0 with f = u_t - lap u, so F(D^2 u) = -u_t
    assert p.F(P, np.zeros((1, 2)), 0.0, x, y, t)[0] == pytest.approx(-exact.ut(x, y, t)[0])
