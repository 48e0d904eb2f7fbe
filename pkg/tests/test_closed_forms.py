import math

import numpy as np
import pytest
from scipy import integrate

from martinpot import (
    BallSpec,
    ball_expected_exit,
    ball_green,
    ball_martin_kernel,
    ball_poisson_kernel,
    exit_time_constant,
    green_constant,
    poisson_constant,
    poisson_normalization,
    poisson_radial_tail,
    riesz_constant,
    riesz_green,
)

UNIT = BallSpec((0.0, 0.0), 1.0, 1.0, 2)


def test_known_constant_values():
    # d = 2, alpha = 1: c(2,1) = Gamma(1)/(2 Gamma(3/2)^2) = 2/pi
    assert exit_time_constant(2, 1.0) == pytest.approx(2.0 / math.pi)
    assert poisson_constant(2, 1.0) == pytest.approx(1.0 / math.pi**2)
    with pytest.raises(ValueError):
        riesz_constant(2, 2.0)


@pytest.mark.parametrize("alpha,d", [(0.5, 2), (1.0, 2), (1.5, 3)])
def test_poisson_kernel_normalizes_center(alpha, d):
    ball = BallSpec((0.0,) * d, 1.0, alpha, d)
    assert poisson_normalization(ball, np.zeros(d)) == pytest.approx(1.0, abs=1e-6)


def test_poisson_kernel_normalizes_off_center():
    x = np.array([0.4, 0.1])
    assert poisson_normalization(UNIT, x) == pytest.approx(1.0, abs=1e-5)


def test_radial_tail_matches_kernel_quadrature():
    # integral of the kernel over {|z| > rho} vs the Beta-law tail
    rho = 1.7

    def radial(s):
        z = np.array([s, 0.0])
        return s * ball_poisson_kernel(UNIT, np.zeros(2), z)

    val, _ = integrate.quad(radial, rho, np.inf, epsrel=1e-10, limit=200)
    val *= 2.0 * math.pi
    assert val == pytest.approx(poisson_radial_tail(UNIT, rho), rel=1e-8)


@pytest.mark.parametrize("alpha,d", [(1.0, 2), (1.5, 3), (0.5, 3)])
def test_green_integrates_to_exit_time(alpha, d):
    ball = BallSpec((0.0,) * d, 1.0, alpha, d)
    x = np.zeros(d)
    x[0] = 0.3
    area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)

    def radial(s):
        # average the Green function over the sphere |y| = s
        def ang(t):  # t = polar angle from the x-axis
            y = np.zeros(d)
            y[0] = s * math.cos(t)
            y[1] = s * math.sin(t)
            g = ball_green(ball, x, y)
            w = math.sin(t) ** (d - 2) if d > 2 else 1.0
            return g * w
        v, _ = integrate.quad(ang, 0.0, math.pi, epsrel=1e-8, limit=200)
        norm, _ = integrate.quad(
            lambda t: math.sin(t) ** (d - 2) if d > 2 else 1.0, 0.0, math.pi
        )
        return s ** (d - 1) * area * v / norm

    val, _ = integrate.quad(radial, 0.0, 1.0, epsrel=1e-7, limit=200, points=[0.3])
    assert val == pytest.approx(float(ball_expected_exit(ball, x)), rel=1e-4)


def test_green_symmetry():
    x = np.array([0.3, 0.2])
    y = np.array([-0.5, 0.1])
    assert ball_green(UNIT, x, y) == pytest.approx(ball_green(UNIT, y, x), rel=1e-12)


def test_green_rejects_bad_points():
    with pytest.raises(ValueError):
        ball_green(UNIT, np.array([1.5, 0.0]), np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        ball_green(UNIT, np.array([0.2, 0.0]), np.array([0.2, 0.0]))


def test_martin_kernel_is_green_ratio_limit():
    x = np.array([0.3, 0.2])
    x0 = np.zeros(2)
    z = np.array([0.0, 1.0])
    target = ball_martin_kernel(UNIT, x, z, x0)
    assert ball_martin_kernel(UNIT, x0, z, x0) == pytest.approx(1.0)
    ratios = []
    for h in (1e-3, 1e-4, 1e-5):
        v = z * (1.0 - h)
        ratios.append(ball_green(UNIT, x, v) / ball_green(UNIT, x0, v))
    errs = [abs(r - target) for r in ratios]
    assert errs[2] < errs[0]
    assert ratios[2] == pytest.approx(target, rel=1e-4)


def test_exit_time_profile():
    ball = BallSpec((1.0, 0.0), 2.0, 1.5, 2)
    x = np.array([1.0, 1.0])
    expect = exit_time_constant(2, 1.5) * (4.0 - 1.0) ** 0.75
    assert float(ball_expected_exit(ball, x)) == pytest.approx(expect)
    with pytest.raises(ValueError):
        ball_expected_exit(ball, (3.0, 0.0))


def test_large_ball_green_approaches_riesz():
    # transient case alpha < d: the ball Green function converges to the
    # Riesz kernel as the radius grows
    x = np.array([0.3, 0.0, 0.0])
    y = np.array([-0.4, 0.2, 0.0])
    target = riesz_green(1.0, 3, x, y)
    vals = []
    for r in (10.0, 100.0, 1000.0):
        ball = BallSpec((0.0, 0.0, 0.0), r, 1.0, 3)
        vals.append(float(ball_green(ball, x, y)))
    assert abs(vals[2] - target) < abs(vals[0] - target)
    assert vals[2] == pytest.approx(target, rel=1e-3)


def test_green_constant_profile_consistency():
    # alpha >= d branch (d = 1 interval): quadrature profile must agree
    # with the incomplete-beta fast path at alpha slightly below d
    ball_lo = BallSpec((0.0,), 1.0, 0.999, 1)
    ball_hi = BallSpec((0.0,), 1.0, 1.001, 1)
    x = np.array([0.2])
    y = np.array([-0.3])
    glo = ball_green(ball_lo, x, y)
    ghi = ball_green(ball_hi, x, y)
    assert glo == pytest.approx(ghi, rel=2e-2)
    assert green_constant(2, 1.0) > 0
