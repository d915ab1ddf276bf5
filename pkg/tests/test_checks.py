import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsldg.checks import (
    JUMP_SIGN,
    fd_equivalence_check,
    hessian_sign_census,
    jump_identity_check,
    rewritten_residual,
    shipped_configs,
)
from nsldg.mesh import RectDomain, build_mesh
from nsldg.numop import NumOpConfig
from nsldg.operators import LdgOperators
from nsldg.problems import make_example
from nsldg.solvers import newton_reduced
from nsldg.space import DgSpace
from nsldg.system import DiscreteSystem

UNIT = RectDomain(0.0, 1.0, 0.0, 1.0)


def test_jump_check_rejects_piecewise_constants():
    with pytest.raises(ValueError):
        jump_identity_check(DgSpace(build_mesh(UNIT, 3, 3), 0), np.zeros(9))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**20))
def test_jump_identities_on_random_functions(r, seed):
    V = DgSpace(build_mesh(RectDomain(-1.0, 0.5, 0.0, 2.0), 4, 3), r)
    u = np.random.default_rng(seed).standard_normal(V.ndofs)
    assert jump_identity_check(V, u).worst <= 1e-11


def test_opposite_sign_fails():
    V = DgSpace(build_mesh(UNIT, 4, 4), 1)
    u = np.random.default_rng(0).standard_normal(V.ndofs)
    assert jump_identity_check(V, u, sign=-JUMP_SIGN).worst > 1.0


def test_continuous_function_has_no_jump_terms():
    V = DgSpace(build_mesh(UNIT, 4, 4), 1)
    u = V.l2_project(lambda x, y: 2 - x + 3 * y)
    rep = jump_identity_check(V, u)
    assert rep.worst <= 1e-12
    d = LdgOperators(V).bind(None)
    for i in (0, 1):
        assert np.max(np.abs(d.q("+", i)(u.coeffs) - d.q("-", i)(u.coeffs))) <= 1e-12


def test_unit_jump_across_one_edge():
    V = DgSpace(build_mesh(UNIT, 2, 1), 1)
    u = V.l2_project(lambda x, y: np.where(x > 0.5, 1.0, 0.0)).coeffs
    d = LdgOperators(V).bind(None)
    visc = d.q("+", 0)(u) - d.q("-", 0)(u)
    # -<[u], [phi]> with [u] = -1: the edge integral of phi from the left cell,
    # minus the one from the right cell
    east = V.face_basis["east"].T @ V.face_weights("east")
    west = V.face_basis["west"].T @ V.face_weights("west")
    np.testing.assert_allclose(visc, np.concatenate([east, -west]), atol=1e-12)


@pytest.mark.parametrize("name, cfg", shipped_configs())
def test_rewritten_residual(name, cfg):
    p = make_example(int(name[-1]))
    V = DgSpace(build_mesh(p.domain, 4, 4), 1)
    cfg = NumOpConfig(cfg.alpha + np.array([[0.0, 0.5], [0.25, 0.0]]), [0.3, 0.7])
    s = DiscreteSystem(p, V, cfg, t=0.5 if p.parabolic else 0.0)
    u = np.random.default_rng(1).standard_normal(V.ndofs)
    assert rewritten_residual(s, u) <= 1e-11
    assert rewritten_residual(s, u, moment_sign=-JUMP_SIGN) > 1e-3


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fd_equivalence(seed):
    rep = fd_equivalence_check(seed=seed)
    assert rep.gradient <= 1e-12
    assert rep.laplacian <= 1e-10
    assert rep.moment <= 1e-10
    assert rep.mixed_diag <= 1e-10
    assert rep.mixed_diag_reversed > 1.0
    assert set(rep.as_dict()) == {"gradient", "laplacian", "moment", "mixed_diag", "mixed_diag_reversed"}


def test_fd_equivalence_with_ones_moment_on_square():
    rep = fd_equivalence_check(nx=10, ny=10, alpha=-12 * np.ones((2, 2)), domain=UNIT)
    assert rep.moment <= 1e-9


def test_census_of_convex_solution():
    p = make_example(1)
    V = DgSpace(build_mesh(p.domain, 10, 10), 0)
    cfg = NumOpConfig.scaled_identity(24.0)
    u, _ = newton_reduced(p, V, cfg)
    neg, pos = hessian_sign_census(DiscreteSystem(p, V, cfg), u.coeffs)
    assert pos >= 0.9 and neg + pos <= 1.0


def test_census_of_concave_quadratic():
    # D~^2 reproduces quadratics exactly for r >= 2, boundary cells included
    f = lambda x, y: -(x**2) - 2 * y**2  # noqa: E731
    p = dataclasses.replace(make_example(1), domain=UNIT, boundary=lambda x, y, t: f(x, y))
    V = DgSpace(build_mesh(UNIT, 6, 6), 2)
    neg, pos = hessian_sign_census(DiscreteSystem(p, V, NumOpConfig()), V.l2_project(f).coeffs)
    assert (neg, pos) == (1.0, 0.0)
