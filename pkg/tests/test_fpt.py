import math

import numpy as np
import pytest
from scipy.special import digamma as scipy_digamma
from scipy.special import gammaln

from oracles import passage_moments_quad
from oupairs.errors import DomainError
from oupairs.fpt import (
    SERIES_DOMAIN_MAX,
    Levels,
    cycle_mean,
    cycle_var,
    mean_primitive,
    passage_mean,
    passage_var,
    series_diagnostics,
    var_primitive,
)

# 80-digit reference values (z, mean_primitive, var_primitive)
_HIPREC_FIXTURE = [
    (-8.0, -2.7222611906073315, 8.6293546565881217),
    (-7.0, -2.5910025397300631, 7.9275468570365047),
    (-6.0, -2.440298102637227, 7.1627099119882051),
    (-5.0, -2.2635529185287261, 6.3208175269901425),
    (-4.5, -2.1623636792233439, 5.8652289053700612),
    (-4.0, -2.050265000137721, 5.382626871884107),
    (-3.0, -1.7823528326252319, 4.321116110059591),
    (-2.0, -1.4252045655377997, 3.0981534929820966),
    (-1.0, -0.9019080126528065, 1.6645217665666946),
    (-0.5, -0.52339009591409671, 0.8568802933182502),
    (-0.1, -0.12053226866665025, 0.17362598601883204),
    (0.1, 0.13054895757936985, -0.17360928597513711),
    (0.5, 0.78416349605798616, -0.84592530254545106),
    (1.0, 2.0934066496783218, -1.4596764015016254),
    (2.0, 10.428409397995949, 3.47651902339184),
    (3.0, 86.931619898888341, 132.72564065990366),
    (4.0, 2018.3923836466465, 4849.4640269901373),
    (5.0, 140741.0004734983, 416885.86221294215),
    (6.0, 28267502.870282846, 95413097.449560301),
    (7.0, 15979967516.481883, 59287947752.873361),
    (8.0, 25147650336153.806, 100427540942193.4),
]

EULER_GAMMA = 0.5772156649015329


def _series_terms_reference(z, weight):
    """Slow reference summation built directly on scipy special functions.

    All 399 terms are summed; the log-space term construction underflows to
    zero long before the cap for |z| <= 8.
    """
    total = 0.0
    sign = 1.0 if z >= 0 else -1.0
    log_abs_z = math.log(abs(z)) if z != 0.0 else -math.inf
    for k in range(1, 400):
        log_term = 0.5 * k * math.log(2.0) + k * log_abs_z + gammaln(k / 2.0) - gammaln(k + 1.0)
        total += sign**k * math.exp(log_term) * weight(k)
    return total


def w_form_cycle_var(a, b):
    """Independent route: quadratic/odd-series form plus the digamma
    correction tied to the cycle mean."""
    w1 = lambda z: mean_primitive(z) ** 2 - mean_primitive(-z) ** 2
    w2 = lambda z: _series_terms_reference(
        z, lambda k: scipy_digamma(k / 2.0) if k % 2 == 1 else 0.0
    )
    et = cycle_mean(Levels(a, b))
    return w1(a) - w1(b) - w2(a) + w2(b) - EULER_GAMMA * et


class TestSeries:
    def test_zero_argument(self):
        assert mean_primitive(0.0) == 0.0
        assert var_primitive(0.0) == 0.0

    @pytest.mark.parametrize("z,phi1,phi2", _HIPREC_FIXTURE)
    def test_high_precision_fixture(self, z, phi1, phi2):
        assert mean_primitive(z) == pytest.approx(phi1, rel=1e-10)
        assert var_primitive(z) == pytest.approx(phi2, rel=1e-10)

    def test_stopping_rule_postcondition(self):
        for z in (-4.0, -1.0, 0.3, 2.0, 5.0, 8.0):
            value, n_terms, last_ratio = series_diagnostics(z)
            assert n_terms <= 400
            assert last_ratio < 1e-14
            assert value == pytest.approx(mean_primitive(z), rel=1e-15)

    def test_domain_bound(self):
        with pytest.raises(DomainError):
            mean_primitive(SERIES_DOMAIN_MAX + 1e-9)
        with pytest.raises(DomainError):
            var_primitive(-SERIES_DOMAIN_MAX - 1e-9)
        with pytest.raises(DomainError):
            cycle_mean(Levels(9.0, -1.0))

    def test_reference_summation_agrees(self):
        # independent scipy-based summation of the same series
        for z in (0.5, 1.0, 2.0, 3.0):
            ref = 0.5 * _series_terms_reference(z, lambda k: 1.0)
            assert mean_primitive(z) == pytest.approx(ref, rel=1e-12)


class TestPassages:
    def test_zero_width(self):
        assert passage_mean(1.0, 1.0) == 0.0
        assert passage_var(0.3, 0.3) == 0.0

    def test_reflection_symmetry(self):
        # downward a -> b equals upward -a -> -b
        assert passage_mean(1.0, -0.5) == pytest.approx(passage_mean(-1.0, 0.5), rel=1e-14)
        assert passage_var(1.0, -0.5) == pytest.approx(passage_var(-1.0, 0.5), rel=1e-14)

    @pytest.mark.parametrize("start,level", [(-1.0, 1.0), (0.0, 2.0), (-2.0, 0.5)])
    def test_against_quadrature(self, start, level):
        mean_q, var_q = passage_moments_quad(start, level)
        assert passage_mean(start, level) == pytest.approx(mean_q, rel=1e-8)
        assert passage_var(start, level) == pytest.approx(var_q, rel=1e-6)


class TestCycles:
    def test_degenerate_cycle(self):
        assert cycle_mean(Levels(1.0, 1.0)) == 0.0
        assert cycle_var(Levels(1.0, 1.0)) == 0.0

    def test_symmetric_levels_double_one_leg(self):
        lv = Levels(1.0, -1.0)
        assert cycle_mean(lv) == pytest.approx(2 * passage_mean(-1.0, 1.0), rel=1e-12)

    def test_mean_decomposition_identity(self):
        # direct odd-series route vs the primitive-difference route
        for a in np.arange(0.0, 3.01, 0.5):
            for b in np.arange(-3.0, a + 1e-9, 0.5):
                lv = Levels(a, b)
                direct = cycle_mean(lv)
                decomposed = (
                    mean_primitive(-b) - mean_primitive(-a) + mean_primitive(a) - mean_primitive(b)
                )
                assert direct == pytest.approx(decomposed, rel=1e-12, abs=1e-13)

    def test_var_equals_independent_leg_sum(self):
        lv = Levels(1.0, -0.5)
        legs = passage_var(1.0, -0.5) + passage_var(-0.5, 1.0)
        assert cycle_var(lv) == pytest.approx(legs, rel=1e-10)
        assert cycle_var(lv) == pytest.approx(w_form_cycle_var(1.0, -0.5), rel=1e-10)

    def test_monotonicity_and_nonnegativity(self):
        entries = np.arange(0.0, 3.01, 0.25)
        for a in entries:
            prev = None
            for b in np.arange(a, -3.01, -0.25):
                lv = Levels(a, b)
                m = cycle_mean(lv)
                assert m >= 0.0
                assert cycle_var(lv) >= 0.0
                if prev is not None:
                    assert m > prev - 1e-15  # widening the cycle downward
                prev = m
        # widening upward at fixed exit
        for b in (-1.0, 0.0):
            means = [cycle_mean(Levels(a, b)) for a in np.arange(max(b, 0.0), 3.01, 0.25)]
            assert all(x < y for x, y in zip(means, means[1:]))


@pytest.mark.slow
class TestMonteCarlo:
    def test_cycle_moments_against_monte_carlo(self, mc_cycles):
        for (a, b), legs in ((k, v) for k, v in mc_cycles.items() if k != "elapsed"):
            total = legs[0] + legs[1]
            lv = Levels(a, b)
            assert cycle_mean(lv) == pytest.approx(total.mean(), rel=0.02)
            assert cycle_var(lv) == pytest.approx(total.var(ddof=1), rel=0.05)

    def test_leg_moments_against_monte_carlo(self, mc_cycles):
        t_down, t_up = mc_cycles[(1.0, -1.0)]
        # upward leg -1 -> 1: mean via primitives, variance via the
        # digamma-weighted primitives
        up_mean = mean_primitive(1.0) - mean_primitive(-1.0)
        up_var = (
            mean_primitive(1.0) ** 2
            - var_primitive(1.0)
            + var_primitive(-1.0)
            - mean_primitive(-1.0) ** 2
        )
        assert up_mean == pytest.approx(t_up.mean(), rel=0.02)
        assert up_var == pytest.approx(t_up.var(ddof=1), rel=0.05)
        assert passage_mean(1.0, -1.0) == pytest.approx(t_down.mean(), rel=0.02)
