import math

import numpy as np
import pytest

from martinpot import (
    Ball,
    Halfspace,
    LogPowerProfile,
    PowerProfile,
    classify,
    finite_point_test,
    growth_probe,
    infinity_test,
    locate_thorn_flip,
    make_stable,
    thorn_finite_test,
    thorn_infinity_test,
)

SPEC31 = make_stable(1.0, 3)


def test_classify_geometric_series_converges():
    partials = np.cumsum([2.0 ** (-k) for k in range(10)])
    assert classify(partials) == "convergent"


def test_classify_harmonic_growth_diverges():
    # partial integrals growing like log(T_k) with geometric T_k: equal
    # increments forever
    partials = [float(k + 1) for k in range(10)]
    assert classify(partials) == "divergent"


def test_classify_slow_decay_is_inconclusive():
    # increments 1/(k log^2 k)-like: decaying but not geometrically
    incs = [1.0 / (k * math.log(k + 1.0)) for k in range(1, 12)]
    assert classify(np.cumsum(incs)) == "inconclusive"


def test_classify_input_validation():
    with pytest.raises(ValueError):
        classify([1.0, 2.0, 3.0])  # too few levels
    with pytest.raises(ValueError):
        classify([1.0, 2.0, 1.5, 2.5])  # not nondecreasing


def test_thorn_infinity_log_power_thresholds():
    # d = 3, alpha = 1: the borderline exponent for t |log t|^(-beta) is
    # beta* = 1/(d - 1 + alpha) = 1/3
    div = thorn_infinity_test(SPEC31, LogPowerProfile(0.2))
    conv = thorn_infinity_test(SPEC31, LogPowerProfile(0.5))
    assert div.verdict == "divergent"
    assert conv.verdict == "convergent"
    assert div.growth_exponent > 0
    assert conv.growth_exponent < 0


def test_thorn_finite_log_power_thresholds():
    div = thorn_finite_test(SPEC31, LogPowerProfile(0.2))
    conv = thorn_finite_test(SPEC31, LogPowerProfile(0.5))
    assert div.verdict == "divergent"
    assert conv.verdict == "convergent"


def test_thorn_power_profiles():
    # f(t) = t/2 keeps the thorn conical: accessible (divergent integral);
    # f(t) = sqrt(t) narrows too fast
    assert thorn_infinity_test(SPEC31, PowerProfile(1.0, 0.5)).verdict == "divergent"
    assert thorn_infinity_test(SPEC31, PowerProfile(0.5)).verdict == "convergent"


def test_thorn_rejects_bad_profiles():
    with pytest.raises(ValueError):
        thorn_infinity_test(SPEC31, PowerProfile(1.0, 2.0))  # f(t) > t


def test_locate_flip_brackets_one_third():
    lo, hi = locate_thorn_flip(SPEC31, LogPowerProfile, 0.15, 0.6)
    assert lo < hi
    assert abs(0.5 * (lo + hi) - 1.0 / 3.0) < 0.1


def test_infinity_test_halfspace_accessible():
    spec = make_stable(1.0, 2)
    h = Halfspace((0.0, 1.0), 0.0)
    verdict = infinity_test(spec, h, mc_n=150, seed=3)
    assert verdict.verdict == "accessible"
    assert verdict.target == "infinity"


def test_infinity_test_requires_unbounded():
    spec = make_stable(1.0, 2)
    with pytest.raises(ValueError):
        infinity_test(spec, Ball((0.0, 0.0), 1.0), seed=0)


def test_finite_point_test_rejects_interior_point():
    spec = make_stable(1.0, 2)
    with pytest.raises(ValueError):
        finite_point_test(spec, Ball((0.0, 0.0), 1.0), (0.5, 0.0), seed=0)


def test_growth_probe_halfspace_vs_ball():
    spec = make_stable(1.0, 2)
    h = Halfspace((0.0, 1.0), 0.0)
    rep = growth_probe(
        spec, h, (0.0, 1.0), [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        10_000, seed=5, max_steps=2000,
    )
    assert rep.verdict == "divergent"
    ball = Ball((0.0, 0.0), 1.0)
    edges = [0.0, 0.125, 0.25, 0.5, 1.0, 2.0]
    rep = growth_probe(spec, ball, (0.0, 0.3), edges, 10_000, seed=5)
    assert rep.verdict == "convergent"
