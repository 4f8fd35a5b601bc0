import math

import numpy as np
import pytest

from eprsim.stats import (
    ChainCounts,
    CoincidenceCounts,
    PairEstimate,
    binomial_stderr,
    chsh_report,
    conditional_detection,
    estimate_correlation,
    order_invariance_test,
)


class TestCorrelationEstimator:
    def test_perfect_correlation(self):
        e, stderr = estimate_correlation(CoincidenceCounts(50, 0, 0, 50))
        assert e == 1.0
        assert stderr == 0.0

    def test_no_correlation(self):
        e, stderr = estimate_correlation(CoincidenceCounts(25, 25, 25, 25))
        assert e == 0.0
        assert stderr == pytest.approx(math.sqrt(1.0 / 100))

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            estimate_correlation(CoincidenceCounts(0, 0, 0, 0))

    def test_stderr_formula(self):
        counts = CoincidenceCounts(40, 10, 10, 40)
        e, stderr = estimate_correlation(counts)
        assert e == pytest.approx(0.6)
        assert stderr == pytest.approx(math.sqrt((1 - 0.36) / 100))

    def test_from_outcomes(self):
        out_a = np.array([1, 1, -1, -1, 1], dtype=np.int8)
        out_b = np.array([1, -1, 1, -1, 1], dtype=np.int8)
        counts = CoincidenceCounts.from_outcomes(out_a, out_b)
        assert counts == CoincidenceCounts(2, 1, 1, 1)

    def test_counts_are_mergeable(self):
        a = CoincidenceCounts(1, 2, 3, 4)
        b = CoincidenceCounts(10, 20, 30, 40)
        assert a + b == CoincidenceCounts(11, 22, 33, 44)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            CoincidenceCounts(-1, 0, 0, 0)


def _pair(a, b, e, n=1_000_000):
    """A pair estimate with correlation ~e from balanced synthetic counts."""
    n_agree = round(n * (1 + e) / 2)
    n_pp = n_agree // 2
    n_pm = (n - n_agree) // 2
    counts = CoincidenceCounts(n_pp, n_pm, n - n_agree - n_pm, n_agree - n_pp)
    return PairEstimate.from_counts(a, b, counts)


class TestChshReport:
    def test_s_is_recomputable_from_pairs(self):
        a, b, a2, b2 = 0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8
        report = chsh_report(
            _pair(a, b, 0.7), _pair(a, b2, -0.7), _pair(a2, b, 0.7), _pair(a2, b2, 0.7)
        )
        recomputed = (
            report.pairs[0].e - report.pairs[1].e + report.pairs[2].e + report.pairs[3].e
        )
        assert report.s == recomputed  # exact, not approximate

    def test_verdicts(self):
        a, b, a2, b2 = 0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8
        quantum = chsh_report(
            _pair(a, b, 0.707), _pair(a, b2, -0.707), _pair(a2, b, 0.707), _pair(a2, b2, 0.707)
        )
        assert quantum.violates_classical
        assert quantum.within_tsirelson
        classical = chsh_report(
            _pair(a, b, 0.5), _pair(a, b2, -0.5), _pair(a2, b, 0.5), _pair(a2, b2, 0.5)
        )
        assert not classical.violates_classical
        assert classical.within_tsirelson

    def test_stderr_combines_in_quadrature(self):
        a, b, a2, b2 = 0.0, 0.1, 0.2, 0.3
        pairs = [_pair(a, b, 0.0), _pair(a, b2, 0.0), _pair(a2, b, 0.0), _pair(a2, b2, 0.0)]
        report = chsh_report(*pairs)
        want = math.sqrt(sum(p.e_stderr**2 for p in pairs))
        assert report.s_stderr == pytest.approx(want)

    def test_mismatched_settings_rejected(self):
        a, b, a2, b2 = 0.0, 0.1, 0.2, 0.3
        with pytest.raises(ValueError):
            chsh_report(
                _pair(a, b, 0.0), _pair(a, b2, 0.0), _pair(a2, 0.9, 0.0), _pair(a2, b2, 0.0)
            )

    def test_settings_echo(self):
        a, b, a2, b2 = 0.0, 0.1, 0.2, 0.3
        report = chsh_report(
            _pair(a, b, 0.0), _pair(a, b2, 0.0), _pair(a2, b, 0.0), _pair(a2, b2, 0.0)
        )
        assert report.settings == (a, b, a2, b2)


class TestConditionalDetection:
    def test_certain_conditional(self):
        p, stderr = conditional_detection(ChainCounts(500, 500, 500, 1000))
        assert p == 1.0
        assert stderr == 0.0

    def test_half_conditional(self):
        p, stderr = conditional_detection(ChainCounts(1000, 1000, 500, 2000))
        assert p == 0.5
        assert stderr == pytest.approx(math.sqrt(0.25 / 1000))

    def test_requires_conditioning_events(self):
        with pytest.raises(ValueError):
            conditional_detection(ChainCounts(0, 10, 0, 100))

    def test_from_flags(self):
        det_a = np.array([1, 1, 0, 0, 1], dtype=np.uint8)
        det_b = np.array([1, 0, 1, 0, 1], dtype=np.uint8)
        counts = ChainCounts.from_flags(det_a, det_b)
        assert counts == ChainCounts(3, 3, 2, 5)


class TestOrderInvariance:
    def test_identical_histograms(self):
        counts = CoincidenceCounts(5000, 2500, 1500, 1000)
        result = order_invariance_test(counts, counts)
        assert result.chi_square == 0.0
        assert result.consistent

    def test_multinomial_noise_passes(self):
        rng = np.random.default_rng(4)
        p = (0.45, 0.05, 0.05, 0.45)
        a = rng.multinomial(1_000_000, p)
        b = rng.multinomial(1_000_000, p)
        result = order_invariance_test(CoincidenceCounts(*a), CoincidenceCounts(*b))
        assert result.consistent

    def test_constructed_difference_fails(self):
        a = CoincidenceCounts(5000, 0, 0, 5000)
        b = CoincidenceCounts(2500, 2500, 2500, 2500)
        result = order_invariance_test(a, b)
        assert not result.consistent
        assert result.p_value < 0.01

    def test_sample_size_precondition(self):
        small = CoincidenceCounts(10, 10, 10, 10)
        with pytest.raises(ValueError):
            order_invariance_test(small, small)

    def test_concentrated_identical_histograms(self):
        a = CoincidenceCounts(10_000, 0, 0, 0)
        result = order_invariance_test(a, a)
        assert result.consistent


def test_binomial_stderr():
    assert binomial_stderr(0.5, 100) == pytest.approx(0.05)
    assert binomial_stderr(1.0, 100) == 0.0
    with pytest.raises(ValueError):
        binomial_stderr(0.5, 0)
