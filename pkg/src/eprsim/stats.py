"""Estimators and verdicts for coincidence-counting experiments.

Counts are exact integers and merge by component-wise addition, so statistics
accumulated over any partition of a run equal a single sequential pass
exactly. Probabilities and correlations are always derived from counts, never
accumulated as floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
CLASSICAL_BOUND = 2.0


@dataclass(frozen=True)
class CoincidenceCounts:
    """Joint two-channel outcome counts for one settings pair."""

    n_pp: int
    n_pm: int
    n_mp: int
    n_mm: int

    def __post_init__(self) -> None:
        for name in ("n_pp", "n_pm", "n_mp", "n_mm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    def __add__(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        return CoincidenceCounts(
            self.n_pp + other.n_pp,
            self.n_pm + other.n_pm,
            self.n_mp + other.n_mp,
            self.n_mm + other.n_mm,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.n_pp, self.n_pm, self.n_mp, self.n_mm], dtype=np.int64)

    @classmethod
    def from_outcomes(cls, out_a: np.ndarray, out_b: np.ndarray) -> "CoincidenceCounts":
        """Count joint outcomes from per-trial +1/-1 channel arrays."""
        a_bit = (1 - out_a.astype(np.int64)) // 2
        b_bit = (1 - out_b.astype(np.int64)) // 2
        counts = np.bincount(a_bit * 2 + b_bit, minlength=4)  # pp, pm, mp, mm
        return cls(int(counts[0]), int(counts[1]), int(counts[2]), int(counts[3]))


@dataclass(frozen=True)
class ChainCounts:
    """Detection counts behind per-arm element chains."""

    n_det_a: int
    n_det_b: int
    n_det_both: int
    n_total: int

    def __add__(self, other: "ChainCounts") -> "ChainCounts":
        return ChainCounts(
            self.n_det_a + other.n_det_a,
            self.n_det_b + other.n_det_b,
            self.n_det_both + other.n_det_both,
            self.n_total + other.n_total,
        )

    @classmethod
    def from_flags(cls, det_a: np.ndarray, det_b: np.ndarray) -> "ChainCounts":
        both = int(np.count_nonzero(det_a.astype(bool) & det_b.astype(bool)))
        return cls(
            int(np.count_nonzero(det_a)),
            int(np.count_nonzero(det_b)),
            both,
            int(det_a.size),
        )


def estimate_correlation(counts: CoincidenceCounts) -> tuple[float, float]:
    """Correlation estimate E and its binomial standard error.

    E = (N_pp + N_mm - N_pm - N_mp) / N_total, stderr = sqrt((1 - E^2) / N).
    """
    n = counts.total
    if n < 1:
        raise ValueError("cannot estimate a correlation from zero counts")
    e = (counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp) / n
    stderr = math.sqrt(max(1.0 - e * e, 0.0) / n)
    return e, stderr


@dataclass(frozen=True)
class PairEstimate:
    """Correlation estimate at one analyzer settings pair (angles in radians)."""

    a: float
    b: float
    counts: CoincidenceCounts
    e: float
    e_stderr: float

    @classmethod
    def from_counts(cls, a: float, b: float, counts: CoincidenceCounts) -> "PairEstimate":
        e, stderr = estimate_correlation(counts)
        return cls(a=a, b=b, counts=counts, e=e, e_stderr=stderr)


@dataclass(frozen=True)
class ChshReport:
    """The four-pair correlation combination with verdicts.

    ``s = E(a,b) - E(a,b') + E(a',b) + E(a',b')``; the stored pair estimates
    let the combination be recomputed exactly. ``violates_classical`` means
    |S| exceeds 2 by at least ``k_sigma`` standard errors; ``within_tsirelson``
    means |S| does not exceed 2*sqrt(2) by more than that.
    """

    pairs: tuple[PairEstimate, PairEstimate, PairEstimate, PairEstimate]
    s: float
    s_stderr: float
    k_sigma: float
    violates_classical: bool
    within_tsirelson: bool

    @property
    def settings(self) -> tuple[float, float, float, float]:
        """(a, b, a', b') in radians."""
        return (self.pairs[0].a, self.pairs[0].b, self.pairs[2].a, self.pairs[1].b)


def chsh_report(
    pair_ab: PairEstimate,
    pair_ab2: PairEstimate,
    pair_a2b: PairEstimate,
    pair_a2b2: PairEstimate,
    k_sigma: float = 3.0,
) -> ChshReport:
    """Combine four pair estimates laid out as (a,b), (a,b'), (a',b), (a',b')."""
    if not (
        math.isclose(pair_ab.a, pair_ab2.a)
        and math.isclose(pair_a2b.a, pair_a2b2.a)
        and math.isclose(pair_ab.b, pair_a2b.b)
        and math.isclose(pair_ab2.b, pair_a2b2.b)
    ):
        raise ValueError("pair estimates do not share the (a, b, a', b') structure")
    s = pair_ab.e - pair_ab2.e + pair_a2b.e + pair_a2b2.e
    s_stderr = math.sqrt(
        pair_ab.e_stderr**2 + pair_ab2.e_stderr**2 + pair_a2b.e_stderr**2 + pair_a2b2.e_stderr**2
    )
    return ChshReport(
        pairs=(pair_ab, pair_ab2, pair_a2b, pair_a2b2),
        s=s,
        s_stderr=s_stderr,
        k_sigma=k_sigma,
        violates_classical=(abs(s) - CLASSICAL_BOUND) >= k_sigma * s_stderr,
        within_tsirelson=abs(s) <= TSIRELSON_BOUND + k_sigma * s_stderr,
    )


def conditional_detection(counts: ChainCounts) -> tuple[float, float]:
    """P(arm-B detection | arm-A detection) with its binomial standard error."""
    if counts.n_det_a < 1:
        raise ValueError("no arm-A detections to condition on")
    p = counts.n_det_both / counts.n_det_a
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / counts.n_det_a)
    return p, stderr


@dataclass(frozen=True)
class OrderInvarianceResult:
    chi_square: float
    p_value: float
    degrees_of_freedom: int
    consistent: bool


MIN_ORDER_TEST_TRIALS = 10_000


def order_invariance_test(
    counts_first: CoincidenceCounts,
    counts_second: CoincidenceCounts,
    alpha: float = 0.01,
) -> OrderInvarianceResult:
    """Pearson chi-square homogeneity test between two joint-outcome histograms.

    Both samples must hold at least 10^4 trials. ``consistent`` is True when
    the p-value exceeds ``alpha``, i.e. the two measurement orders produced
    statistically indistinguishable distributions.
    """
    if counts_first.total < MIN_ORDER_TEST_TRIALS or counts_second.total < MIN_ORDER_TEST_TRIALS:
        raise ValueError(f"order test needs at least {MIN_ORDER_TEST_TRIALS} trials per ordering")
    table = np.vstack([counts_first.as_array(), counts_second.as_array()])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.shape[1] < 2:
        # Both runs concentrated on one category: identical by construction.
        return OrderInvarianceResult(0.0, 1.0, 0, True)
    if np.array_equal(table[0], table[1]):
        return OrderInvarianceResult(0.0, 1.0, int(table.shape[1] - 1), True)
    chi2, p_value, dof, _ = _scipy_stats.chi2_contingency(table, correction=False)
    return OrderInvarianceResult(float(chi2), float(p_value), int(dof), bool(p_value > alpha))


def binomial_stderr(p: float, n: int) -> float:
    """Standard error of a proportion estimated from n trials."""
    if n < 1:
        raise ValueError("n must be positive")
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)
