import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsldg.checks import EXACT_HESSIAN_BOX_EX1
from nsldg.mesh import RectDomain
from nsldg.numop import (
    MONOTONE_SIGNS,
    NumOpConfig,
    check_consistency,
    check_gmonotonicity,
    eval_fhat,
)
from nsldg.problems import PdeProblem, make_example, poisson

ZERO = PdeProblem(
    name="zero",
    domain=RectDomain(0.0, 1.0, 0.0, 1.0),
    F=lambda P, q, v, x, y, t: 0.0 * v,
    partials=None,
)
LAPLACE = poisson(lambda x, y, t: 0.0 * x)
ORIGIN = (np.zeros(1), np.zeros(1))

finite = st.floats(-5, 5, allow_nan=False)
mat = arrays(np.float64, (2, 2), elements=finite)
vec = arrays(np.float64, (2,), elements=finite)


def test_config_validation_and_constructors():
    with pytest.raises(ValueError):
        NumOpConfig(np.eye(2), [-1.0, 0.0])
    cfg = NumOpConfig.scaled_ones(-12.0)
    np.testing.assert_array_equal(cfg.alpha, -12 * np.ones((2, 2)))
    assert cfg.moment_sign == "nsd"
    assert NumOpConfig.scaled_identity(24.0).moment_sign == "psd"
    assert NumOpConfig(np.diag([1.0, -1.0])).moment_sign == "indefinite"


def test_moment_frobenius_product():
    one = np.eye(2)[None]
    zero = np.zeros((1, 2, 2))
    val = eval_fhat(NumOpConfig.scaled_identity(1.0), ZERO, one, zero, zero, zero, [0, 0], [0, 0], 0.0, ORIGIN)
    assert val[0] == pytest.approx(2.0)


@pytest.mark.parametrize("beta", [0.0, 0.5, 3.0])
def test_monge_ampere_consistency_at_identity(beta):
    P = np.eye(2)[None]
    p = make_example(2)
    val = eval_fhat(NumOpConfig.scaled_identity(5.0, beta), p, P, P, P, P, [1, 2], [1, 2], 0.0, ORIGIN)
    assert val[0] == pytest.approx(-1.0)


def test_viscosity_is_increasing_in_q_minus():
    cfg = NumOpConfig(np.zeros((2, 2)), [0.5, 2.0])
    zero = np.zeros((1, 2, 2))
    val = eval_fhat(cfg, ZERO, zero, zero, zero, zero, [0, 0], [1.0, 1.0], 0.0, ORIGIN)
    assert val[0] == pytest.approx(2.5)


@settings(max_examples=60)
@given(mat, vec, finite, st.floats(-30, 30), st.floats(0, 5))
def test_consistency_property(P, q, v, a, b):
    P = 0.5 * (P + P.T)
    cfg = NumOpConfig(a * np.array([[1.0, 0.3], [0.3, 1.0]]), [b, 2 * b])
    p = make_example(1)
    x = (np.array([0.2]), np.array([0.7]))
    got = eval_fhat(cfg, p, P, P, P, P, q, q, v, x)
    assert got[0] == pytest.approx(p.F(P[None], q[None], np.array([v]), *x, 0.0)[0], abs=1e-12)


@settings(max_examples=40)
@given(mat, mat, mat, mat, vec, vec, finite)
def test_without_moment_outer_hessians_are_ignored(Ppp, Ppm, Pmp, Pmm, qp, qm, v):
    cfg = NumOpConfig(np.zeros((2, 2)), [1.0, 1.0])
    p = make_example(4)
    a = eval_fhat(cfg, p, Ppp, Ppm, Pmp, Pmm, qp, qm, v, ORIGIN)
    b = eval_fhat(cfg, p, 0 * Ppp, Ppm, Pmp, 3 * Pmm + 1, qp, qm, v, ORIGIN)
    assert a[0] == b[0]


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("cfg", [NumOpConfig(), NumOpConfig.scaled_identity(24.0, beta=1.0),
                                 NumOpConfig.scaled_ones(-12.0)])
def test_consistency_on_shipped_problems(k, cfg):
    rep = check_consistency(cfg, make_example(k), samples=1000, seed=k)
    assert rep.passed, rep.max_deviation


def test_laplace_is_monotone_entrywise_over_any_box():
    for box in ({}, {"P": (-50, 50), "q": (-9, 9)}):
        rep = check_gmonotonicity(NumOpConfig.scaled_identity(1.0), LAPLACE, box=box, samples=300)
        assert rep.passed
        assert set(rep.violations) >= {f"P++[{i}{j}]" for i in range(2) for j in range(2)}


def test_monge_ampere_without_stabilization_is_not_monotone():
    rep = check_gmonotonicity(NumOpConfig(), make_example(1), box=EXACT_HESSIAN_BOX_EX1, samples=300)
    assert not rep.passed
    assert rep.worst < 0


def test_monge_ampere_with_moment_is_loewner_monotone():
    rep = check_gmonotonicity(NumOpConfig.scaled_identity(24.0), make_example(1), box=EXACT_HESSIAN_BOX_EX1,
                              samples=500, mode="loewner")
    assert rep.passed


def test_diagonal_moment_leaves_off_diagonal_entries_unstabilized():
    # alpha = 24 I adds nothing to the off-diagonal partials, so the entrywise
    # sign pattern of -det fails in the mixed slots whenever P21 > 0
    rep = check_gmonotonicity(NumOpConfig.scaled_identity(24.0), make_example(1), box=EXACT_HESSIAN_BOX_EX1,
                              samples=500)
    bad = {k for k, v in rep.violations.items() if v}
    assert bad and all(k[:3] in ("P+-", "P-+") for k in bad)
    assert all(not rep.violations[f"{k}[00]"] and not rep.violations[f"{k}[11]"] for k in ("P+-", "P-+"))


def test_monotone_signs_pattern():
    assert [MONOTONE_SIGNS[k] for k in ("P++", "P+-", "P-+", "P--", "q+", "q-", "v")] == [1, -1, -1, 1, -1, 1, 1]


def test_bad_step_and_mode_rejected():
    with pytest.raises(ValueError):
        check_gmonotonicity(NumOpConfig(), LAPLACE, step=0.0)
    with pytest.raises(ValueError):
        check_gmonotonicity(NumOpConfig(), LAPLACE, mode="diagonal")


def test_monotonicity_report_is_seed_reproducible():
    a = check_gmonotonicity(NumOpConfig(), make_example(1), samples=200, seed=4)
    b = check_gmonotonicity(NumOpConfig(), make_example(1), samples=200, seed=4)
    assert a.violations == b.violations and a.worst == b.worst
