import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatial_logistic import special_math as sm
from spatial_logistic.errors import InvalidParameterError
from spatial_logistic.meanfield import MeanFieldTrajectory, exponent, integral_q, j_hat, q_at

from conftest import gaussian_params


def rk4_logistic(kp, m, km, q0, t_end, h=1e-3):
    qs = (kp - m) / km
    f = lambda q: km * q * (qs - q)  # noqa: E731
    q = q0
    for _ in range(int(round(t_end / h))):
        k1 = f(q)
        k2 = f(q + 0.5 * h * k1)
        k3 = f(q + 0.5 * h * k2)
        k4 = f(q + h * k3)
        q += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return q


@pytest.fixture
def traj():
    return MeanFieldTrajectory(gaussian_params(1), 0.25)


@pytest.fixture
def traj2():
    return MeanFieldTrajectory(gaussian_params(1, kp=2.0, m=1.0), 0.5)


def test_default_q0_is_half_q_star():
    t = MeanFieldTrajectory(gaussian_params(2))
    assert t.q0 == 0.25


@pytest.mark.parametrize("q0", [0.0, 0.5, 0.7, -0.1])
def test_q0_must_lie_below_q_star(q0):
    with pytest.raises(InvalidParameterError):
        MeanFieldTrajectory(gaussian_params(1), q0)


def test_q_at_half_start(traj):
    for t in (0.0, 1.0, 7.5):
        assert q_at(traj, t) == pytest.approx(0.5 / (1 + math.exp(-0.5 * t)), rel=1e-15)
    assert q_at(traj, 0.0) == 0.25


def test_q_limit_against_rk4(traj2):
    # [DERIVED] RK4 oracle of the logistic ODE
    assert abs(rk4_logistic(2.0, 1.0, 1.0, 0.5, 20.0) - q_at(traj2, 20.0)) < 1e-10
    assert abs(q_at(traj2, 20.0) - 1.0) < 1e-8


def test_integral_q(traj2):
    assert integral_q(traj2, 2.0, 2.0) == 0.0
    oracle = sm.adaptive_simpson(lambda t: float(q_at(traj2, t)), 0.0, 3.0, tol=1e-13)
    assert integral_q(traj2, 0.0, 3.0) == pytest.approx(oracle, abs=1e-10)


def test_integral_q_constant_limit():
    p = gaussian_params(1)
    t = MeanFieldTrajectory(p, p.q_star * (1 - 1e-12))
    assert integral_q(t, 1.0, 4.0) == pytest.approx(p.q_star * 3.0, rel=1e-10)


def test_j_hat_examples(traj):
    xi = math.sqrt(math.log(2) / (2 * math.pi**2))  # a+^(xi) = a-^(xi) = 0.5
    assert j_hat(traj, 0.0, xi) == pytest.approx(-0.375, abs=1e-15)
    assert j_hat(traj, 200.0, 0.0) == pytest.approx(-0.5, abs=1e-15)
    tiny = MeanFieldTrajectory(gaussian_params(1), 1e-14)
    assert j_hat(tiny, 0.0, 0.3) == pytest.approx(float(tiny.params.a_plus.fourier(0.3)) - 0.5, abs=1e-13)


def test_exponent_examples(traj):
    assert exponent(traj, 2.0, 2.0, 0.4) == 0.0
    expected = -0.5 * 3.0 + 2 * math.log(q_at(traj, 4.0) / q_at(traj, 1.0))
    assert exponent(traj, 1.0, 4.0, 0.0) == pytest.approx(expected, rel=1e-14)
    oracle = sm.adaptive_simpson(lambda t: float(j_hat(traj, t, 0.37)), 0.5, 6.0, tol=1e-13)
    assert exponent(traj, 0.5, 6.0, 0.37) == pytest.approx(oracle, abs=1e-10)


def test_logistic_residual(traj2):
    rng = np.random.default_rng(1)
    p = traj2.params
    for t in rng.uniform(0, 20, 100):
        h = 1e-6
        dq = (q_at(traj2, t + h) - q_at(traj2, t - h)) / (2 * h) if t > h else (q_at(traj2, t + h) - q_at(traj2, t)) / h
        q = q_at(traj2, t)
        assert abs(dq - p.kappa_minus * q * (traj2.q_star - q)) <= 1e-6 * p.kappa_plus


@given(st.lists(st.floats(0, 60), min_size=2, max_size=20, unique=True))
def test_q_strictly_increasing(times):
    tr = MeanFieldTrajectory(gaussian_params(1), 0.1)
    ts = np.sort(np.array(times))
    q = q_at(tr, ts)
    assert np.all(np.diff(q) >= 0)
    assert np.all(q[ts > 1e-6] > 0.1) and np.all(q[ts < 30] < tr.q_star)
    distinct = np.diff(ts) > 1e-6
    assert np.all(np.diff(q)[distinct & (ts[1:] < 30)] > 0)


def test_exponent_decay_bound():
    rng = np.random.default_rng(2)
    for dim in (1, 2):
        tr = MeanFieldTrajectory(gaussian_params(dim, sigma_minus=0.8), 0.05)
        p = tr.params
        for _ in range(500):
            s, t = np.sort(rng.uniform(0, 30, 2))
            xi = rng.normal(size=dim) * rng.uniform(0, 2)
            xi = xi[0] if dim == 1 else xi
            lhs = 2 * exponent(tr, s, t, xi)
            rhs = 4 * math.log(tr.q_star / tr.q0) - 2 * (p.kappa_plus - p.mortality) * (t - s)
            assert lhs <= rhs + 1e-12
