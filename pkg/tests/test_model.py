import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hivadapt.model import (PATIENT_CTL, CtlParams, ModelParams, adjoint_jacobian, adjoint_rhs,
                            ctl_d, ctl_e0, ctl_f, rhs, rhs_jacobian)
from hivadapt.errors import InvalidArgument

P = ModelParams()


def test_rhs_examples():
    np.testing.assert_array_equal(rhs((1e6, 0, 0), 3.0, 0.26), [0, 0, 0])
    np.testing.assert_array_equal(rhs((0, 0, 0), 1.0, 0.26), [1e4, 0, 0])
    # hand calculation: beta1*u1*u3 = 0.027
    np.testing.assert_allclose(rhs((1.125e6, 0, 1), 1.0, 0.26), [-1250.027, 0.027, -2.427], rtol=1e-12)


def test_params_positive():
    with pytest.raises(InvalidArgument):
        ModelParams(mu=0.0)


def test_jacobian_at_origin():
    J = rhs_jacobian((0, 0, 0), 2.0, 0.3)
    np.testing.assert_allclose(J, [[-P.mu, 0, 0], [0, -0.6, 0], [0, P.rho, -P.c]])


def test_jacobian_nonsingular_at_initial_data():
    assert abs(np.linalg.det(rhs_jacobian((1.125e6, 0, 1), 1.0, 0.26))) > 0


def _fd_jac(x, e, d):
    x = np.asarray(x, float)
    J = np.empty((3, 3))
    for j in range(3):
        eps = 1e-3 * max(1.0, abs(x[j]))
        dx = np.zeros(3)
        dx[j] = eps
        J[:, j] = (rhs(x + dx, e, d) - rhs(x - dx, e, d)) / (2 * eps)
    return J


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.floats(0, np.log10(2e6)) for _ in range(3)]), st.floats(1, 10))
def test_jacobian_matches_fd(logx, e):
    x = 10.0 ** np.asarray(logx) - 1.0   # log-uniform in [0, 2e6]
    J = rhs_jacobian(x, e, 0.26)
    Jfd = _fd_jac(x, e, 0.26)
    scale = np.abs(J).max()
    np.testing.assert_allclose(J, Jfd, rtol=1e-6, atol=1e-6 * scale)


def test_adjoint_rhs_examples():
    x = (1.125e6, 300.0, 5e4)
    np.testing.assert_array_equal(adjoint_rhs((0, 0, 0), x, 1.0, 0.26, 0.0, 0.0), 0.0)
    np.testing.assert_allclose(adjoint_rhs((0, 0, 0), x, 1.0, 0.26, 0.7, -0.2), [0.7, 0.7, -0.2])
    u1, u3 = x[0], x[2]
    expect = np.array([[P.beta1 * u3 + P.mu, -P.beta1 * u3, P.beta2 * u3],
                       [0, 0.26, -P.rho],
                       [P.beta1 * u1, -P.beta1 * u1, P.c + P.beta2 * u1]])
    lam0 = np.array([0.3, -1.2, 2.0])
    Jfd = np.empty((3, 3))
    for j in range(3):
        dl = np.zeros(3)
        dl[j] = 1e-3
        Jfd[:, j] = (adjoint_rhs(lam0 + dl, x, 1.0, 0.26, 0.1, 0.2)
                     - adjoint_rhs(lam0 - dl, x, 1.0, 0.26, 0.1, 0.2)) / 2e-3
    np.testing.assert_allclose(Jfd, expect, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(adjoint_jacobian(x, 1.0, 0.26), expect)


def test_adjoint_rhs_componentwise_formula():
    lam = np.array([0.5, -2.0, 1.5])
    x = (9e5, 2e3, 1e5)
    u1, u3 = x[0], x[2]
    e, d, m1, m2 = 1.7, 0.3, 0.01, -0.02
    l1, l2, l3 = lam
    expect = [l1 * P.beta1 * u3 + l1 * P.mu - l2 * P.beta1 * u3 + P.beta2 * l3 * u3 + m1,
              -l3 * P.rho + d * l2 * e + m1,
              l1 * P.beta1 * u1 - l2 * P.beta1 * u1 + P.c * l3 + l3 * P.beta2 * u1 + m2]
    np.testing.assert_allclose(adjoint_rhs(lam, x, e, d, m1, m2), expect, rtol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_adjoint_rhs_affine(alpha, v):
    x = (8e5, 1e3, 2e4)
    l, lp = np.array(v[:3]), np.array(v[3:])
    forcing = np.array([0.2, 0.2, -0.1])
    f = lambda y: adjoint_rhs(y, x, 1.3, 0.26, 0.2, -0.1)
    lhs = f(alpha * l + lp)
    rhs_ = alpha * (f(l) - forcing) + f(lp)
    np.testing.assert_allclose(lhs, rhs_, rtol=1e-9, atol=1e-9 * (1 + np.abs(lhs).max()))


def test_ctl_f_examples():
    same = CtlParams(beta_ctl=0.05, delta_t1=3.0, delta_t2=3.0, t1=4.0, t2=4.0)
    np.testing.assert_array_equal(ctl_f(np.linspace(0, 300, 50), same), 0.0)
    p2 = PATIENT_CTL[2]
    assert p2.kappa == 10001.0
    with mpmath.workdps(40):
        ref = mpmath.mpf("0.1") / (1 + 10001) - mpmath.mpf("0.1") / (1 + 10001 * mpmath.exp(mpmath.mpf("9.8")))
    assert float(ctl_f(1.0, p2)) == pytest.approx(float(ref), rel=1e-12)
    # positive bump between t1 and t2, vanishing far out
    assert ctl_f(30.0, p2) > 0
    assert abs(ctl_f(1e4, p2)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 400), st.sampled_from([1, 2, 3, 4]))
def test_ctl_f_bounded(t, n):
    cp = PATIENT_CTL[n]
    assert abs(float(ctl_f(t, cp))) <= cp.beta_ctl


def test_ctl_d_and_e0():
    cp = PATIENT_CTL[1]
    assert cp.kappa == 1501.0
    assert ctl_d(0.5, 7.0, cp) == 0.26
    assert ctl_e0(0.5, 7.0, cp) == 1.0
    t = np.linspace(0, 363, 100)
    np.testing.assert_array_equal(ctl_d(t, 0.0, cp), 0.26)
    lv = np.full_like(t, 5.0)
    np.testing.assert_allclose(ctl_e0(t, lv, cp), 1.0 + np.where(t >= 1, ctl_f(t, cp) * 5.0, 0.0))
    e04 = PATIENT_CTL[4]
    assert ctl_e0(0.0, 3.0, e04) == 1.4


def test_u1_relaxes_to_equilibrium_without_infection():
    from hivadapt.forward import solve_forward
    from hivadapt.mesh import PiecewiseFn, uniform_mesh
    m = uniform_mesh(363, 1)
    for u0 in (2e5, 3e6):
        tr = solve_forward(PiecewiseFn.constant(m, 1), PiecewiseFn.constant(m, 0.26), (u0, 0, 0), m, n_sub=1)
        gap = np.abs(tr.u1 - 1e6)
        assert np.all(np.diff(gap) <= 0)
