import math

import numpy as np
import pytest

from ksgrowup import (MatchingPath, b_of, closed_rate, gamma_monotone_check,
                      gamma_of_a, gamma_onset_time, integrate_a)
from ksgrowup.errors import InvalidKError, RangeError


class TestClosedRate:
    def test_values(self):
        assert abs(closed_rate(0.0) - math.exp(2.5)) < 1e-12
        assert abs(closed_rate(50.0) - math.exp(12.5)) < 1e-7 * math.exp(12.5)

    def test_square_identity(self):
        t = np.array([0.3, 7.0, 123.0])
        lhs = closed_rate(t) ** 2
        rhs = math.exp(5.0) * np.exp(2.0 * np.sqrt(2.0 * t))
        assert np.allclose(lhs, rhs, rtol=1e-13)


class TestIntegration:
    def test_initial_slope(self, path_k5):
        s0 = 1.0 / math.log(2.0)
        expected = 2.0 * s0 * (1.0 + 2.5 * s0 + 5.0 * s0 * s0)
        assert abs(path_k5.a_prime_at(0.0) - expected) < 1e-12
        assert abs(expected - 43.32) < 0.01
        # tiny-step cross-check (first-order in eps through a''(0))
        eps = 1e-4
        assert abs((path_k5.a_at(eps) - 2.0) / eps - expected) < 0.2

    def test_start_value(self, path_k5):
        assert abs(path_k5.a_at(0.0) - 2.0) < 1e-12
        assert path_k5.a[0] == pytest.approx(2.0, abs=1e-12)

    def test_log_bound(self, path_k5):
        t = np.linspace(0.0, 1000.0, 500)
        assert np.all(path_k5.loga_at(t) >= np.sqrt(2.0 * t) - 1e-10)

    def test_deviation_bracket_and_trend(self, path_k5):
        t = np.linspace(100.0, 1000.0, 200)
        dev = path_k5.loga_at(t) - np.sqrt(2.0 * t)
        assert dev.min() > 2.0 and dev.max() < 3.0
        assert np.all(np.diff(np.abs(dev - 2.5)) <= 1e-12)

    def test_step_halving(self):
        a1 = integrate_a(5.0, 1000.0, sigma_step=0.005).a_at(1000.0)
        a2 = integrate_a(5.0, 1000.0, sigma_step=0.0025).a_at(1000.0)
        assert abs(a1 - a2) / a2 < 1e-8

    def test_invalid_k(self):
        with pytest.raises(InvalidKError):
            integrate_a(-3.0, 10.0)
        integrate_a(-2.0, 10.0)  # still admissible

    def test_range_guard(self, path_k5):
        with pytest.raises(RangeError):
            path_k5.a_at(2000.0)

    def test_path_monotone(self, path_k5):
        assert np.all(np.diff(path_k5.a) > 0)
        assert np.all(path_k5.a_prime > 0)


class TestDerivedQuantities:
    def test_gamma_closed_form_value(self):
        # H(0.1) for K = 6: 0.1 (1 + 0.5 + 0.18) / (1 + 0.25 + 0.06)
        got = gamma_of_a(math.exp(10.0), 6.0)
        assert abs(got - 0.1 * 1.68 / 1.31) < 1e-12
        assert abs(got - 0.1282) < 2e-4

    def test_gamma_domain(self):
        with pytest.raises(RangeError):
            gamma_of_a(0.5, 5.0)

    def test_gamma_matches_difference_quotient(self, path_k5):
        # gamma = (a/a')' along the path
        for t in (5.0, 50.0, 400.0):
            d = 1e-3 * max(t, 1.0)
            q = (path_k5.a_at(t + d) / path_k5.a_prime_at(t + d)
                 - path_k5.a_at(t - d) / path_k5.a_prime_at(t - d)) / (2 * d)
            assert abs(q - path_k5.gamma_at(t)) < 1e-5 * max(1.0, abs(q))

    def test_gamma_small_s_expansion(self):
        # H(s) = s + O(s^2): relative deviation scales linearly in s
        s = np.array([0.02, 0.01])
        vals = gamma_of_a(np.exp(1.0 / s), 5.0)
        rel = np.abs(vals / s - 1.0)
        assert np.all(rel < 3.0 * s)
        assert rel[1] < 0.6 * rel[0]

    def test_gamma_equivalent_to_inverse_log(self, path_k5):
        t = 1000.0
        g = path_k5.gamma_at(t)
        assert abs(g * path_k5.loga_at(t) - 1.0) < 0.15

    def test_b_identity_and_positivity(self, path_k5):
        b = b_of(path_k5)
        assert np.allclose(b, path_k5.b, rtol=1e-14)
        assert np.all(b > 0)

    def test_b_a_loga_bracket(self, path_k5):
        # b a log a = 1 + 5/(2 log a) + K/log^2 a; inside [0.9, 1.1] once
        # log a is large enough (t >= 400 for K = 5), approaching 1
        t = np.linspace(400.0, 1000.0, 60)
        vals = path_k5.b_at(t) * path_k5.a_at(t) * path_k5.loga_at(t)
        assert np.all((vals > 0.9) & (vals < 1.1))
        assert np.all(np.diff(vals) < 0)

    def test_b_prime_identity(self, path_k5):
        # b' = -(1 + gamma) a b^2
        for t in (10.0, 200.0):
            d = 1e-3 * t
            bp = (path_k5.b_at(t + d) - path_k5.b_at(t - d)) / (2 * d)
            rhs = -(1.0 + path_k5.gamma_at(t)) * path_k5.a_at(t) * path_k5.b_at(t) ** 2
            assert abs(bp - rhs) < 1e-4 * abs(rhs)

    def test_epsilon_equals_gamma(self, path_k5):
        assert np.array_equal(path_k5.epsilon, path_k5.gamma)

    def test_gamma_monotone(self, path_k6):
        assert gamma_monotone_check(path_k6)
        assert gamma_onset_time(path_k6) <= path_k6.t[1]

    def test_gamma_monotone_constant_path(self):
        t = np.linspace(0, 10, 20)
        path = MatchingPath(K=5.0, t=t, a=np.exp(t + 1), a_prime=np.exp(t + 1),
                            b=np.exp(-(t + 1)), gamma=np.full_like(t, 0.25),
                            epsilon=np.full_like(t, 0.25),
                            sigma_knots=np.array([0.0, 1.0]),
                            ell_knots=np.array([math.log(2.0), 2.0]))
        assert gamma_monotone_check(path)

    def test_gamma_prime_scale(self, path_k5):
        # gamma' * log^3 a -> -1 (slowly); finite differences agree with the
        # closed form
        t = 1000.0
        d = 1.0
        fd = (path_k5.gamma_at(t + d) - path_k5.gamma_at(t - d)) / (2 * d)
        assert abs(fd - path_k5.gamma_prime_at(t)) < 1e-9
        scaled = path_k5.gamma_prime_at(t) * path_k5.loga_at(t) ** 3
        assert -1.5 < scaled < -0.8

    def test_integrated_ode_relation_bounded(self, path_k5):
        # (log a)^2/2 - (5/2) log a - t stays within a fixed desk-scale band
        # on [1, 1000]; its only drift is logarithmic (slope -K/(4t) summed)
        t = np.geomspace(1.0, 1000.0, 200)
        ell = path_k5.loga_at(t)
        q = 0.5 * ell ** 2 - 2.5 * ell - t
        assert np.max(np.abs(q)) < 12.0
        A = np.vstack([np.ones_like(t), np.log(t)]).T
        coef, *_ = np.linalg.lstsq(A, q, rcond=None)
        resid = q - A @ coef
        assert np.max(np.abs(resid)) < 0.5  # log-linear to good accuracy

    def test_rate_ratio_decay(self, path_k5):
        # |a/A - 1| shrinks; quadrupling t roughly halves it (log-corrected)
        dev = np.abs(path_k5.a_at(np.array([250.0, 1000.0]))
                     / closed_rate(np.array([250.0, 1000.0])) - 1.0)
        assert dev[1] < dev[0]
        assert dev[1] / dev[0] < 0.7
