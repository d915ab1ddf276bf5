import numpy as np
import pytest

from nsldg.checks import shipped_configs
from nsldg.mesh import build_mesh
from nsldg.numop import NumOpConfig
from nsldg.operators import LdgOperators
from nsldg.problems import make_example, poisson
from nsldg.space import DgSpace
from nsldg.system import FIELD_NAMES, DiscreteSystem

SHIPPED = [(int(name[-1]), cfg) for name, cfg in shipped_configs()]


def system_for(k, r, cfg, n=4, t=0.5):
    p = make_example(k)
    V = DgSpace(build_mesh(p.domain, n, n), r)
    return DiscreteSystem(p, V, cfg, t=t if p.parabolic else 0.0)


def random_state(system, seed=0, scale=0.3):
    return scale * np.random.default_rng(seed).standard_normal(system.space.ndofs)


def test_operators_for_other_space_rejected():
    p = make_example(1)
    V = DgSpace(build_mesh(p.domain, 3, 3), 1)
    W = DgSpace(build_mesh(p.domain, 3, 3), 1)
    with pytest.raises(ValueError):
        DiscreteSystem(p, V, NumOpConfig(), ops=LdgOperators(W))


def test_fields_shape():
    s = system_for(1, 1, NumOpConfig())
    vals = s.fields(np.zeros(s.space.ndofs))
    assert vals.shape == (len(FIELD_NAMES), 16, s.space.B.shape[0])


@pytest.mark.parametrize("r", [0, 1, 2])
@pytest.mark.parametrize("k, cfg", SHIPPED)
def test_reduced_residual_matches_full_evaluation(k, r, cfg):
    cfg = NumOpConfig(cfg.alpha + np.array([[0.0, 0.5], [0.25, 0.0]]), [0.3, 0.7])
    s = system_for(k, r, cfg)
    u = random_state(s, seed=k + 10 * r)
    full = s.residual_full(u)
    assert np.max(np.abs(s.residual(u) - full)) <= 1e-10 * max(1.0, np.max(np.abs(full)))


@pytest.mark.parametrize("r", [0, 1])
@pytest.mark.parametrize("k, cfg", SHIPPED)
def test_jacobian_matches_finite_differences(k, r, cfg):
    s = system_for(k, r, cfg)
    # keep HJB states away from the switch of the min by adding a smooth field
    u = random_state(s, seed=k) + s.space.l2_project(lambda x, y: 0.4 * x**2 + 0.2 * y**2).coeffs
    J = s.jacobian(u).toarray()
    Jfd = s.jacobian_fd(u)
    err = np.abs(J - Jfd).max(axis=0) / np.maximum(1.0, np.abs(Jfd).max(axis=0))
    assert err.max() <= 1e-5


def test_linear_problem_has_constant_jacobian():
    p = poisson(lambda x, y, t: 1.0 + x)
    V = DgSpace(build_mesh(p.domain, 4, 4), 1)
    s = DiscreteSystem(p, V, NumOpConfig.scaled_identity(1.0))
    J0 = s.jacobian(np.zeros(V.ndofs)).toarray()
    J1 = s.jacobian(random_state(s)).toarray()
    np.testing.assert_allclose(J0, J1, atol=1e-12)
    u = random_state(s, seed=2)
    np.testing.assert_allclose(s.residual(u), s.residual(np.zeros_like(u)) + J0 @ u, atol=1e-10)


def test_set_time_rebinds_offsets_only():
    s = system_for(5, 1, NumOpConfig.scaled_identity(2.0), t=0.2)
    before = s.derivs
    off = before.P("+", "-", 0, 0).offset.copy()
    s.set_time(0.9)
    assert s.t == 0.9
    assert all(before.hess[key].matrix is s.derivs.hess[key].matrix for key in before.hess)
    assert not np.allclose(off, s.derivs.P("+", "-", 0, 0).offset)


def test_exact_projection_nearly_solves_smooth_problem():
    p = make_example(1)
    res = []
    for n in (4, 8):
        V = DgSpace(build_mesh(p.domain, n, n), 2)
        s = DiscreteSystem(p, V, NumOpConfig.scaled_identity(1.0))
        res.append(np.linalg.norm(s.residual(V.l2_project(p.exact_at()).coeffs)))
    assert res[1] < res[0]
