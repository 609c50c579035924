"""Statistical test kit turning limit laws into pass/fail checks.

Kolmogorov-Smirnov statistics are computed from order statistics here;
only the limiting null distributions (Kolmogorov, chi-square) come from
scipy.  All p-values are asymptotic, which every caller in this package
can afford: acceptance sample sizes start in the hundreds.  The default
significance level is deliberately small so a full verification run has
a low false-alarm rate; the verification harness additionally retries a
failed statistical check once on a fresh derived seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats as scipy_stats

DEFAULT_LEVEL = 0.001


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test at a fixed significance level.

    ``sample_sizes`` is (n1, n2) for two-sample tests, (n, 0) for
    one-sample tests, and (total count, bins) for chi-square.
    """

    statistic: float
    p_value: float
    sample_sizes: tuple[int, int]
    level: float
    verdict: str

    __test__ = False  # not a pytest collection target

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value must lie in [0, 1], got {self.p_value}")
        if self.verdict not in ("pass", "fail"):
            raise ValueError(f"verdict must be 'pass' or 'fail', got {self.verdict!r}")


def _report(statistic: float, p_value: float, sizes: tuple[int, int], level: float) -> TestReport:
    verdict = "pass" if p_value > level else "fail"
    return TestReport(float(statistic), float(p_value), sizes, float(level), verdict)


@dataclass(frozen=True)
class ReplicaSummary:
    """Mean with normal-theory error bars across replicas."""

    mean: float
    std_error: float
    count: int
    ci95: tuple[float, float]


def ks_two_sample(xs, ys, level: float = DEFAULT_LEVEL) -> TestReport:
    """Two-sample Kolmogorov-Smirnov test with asymptotic p-value."""
    xs = np.sort(np.asarray(xs, dtype=float))
    ys = np.sort(np.asarray(ys, dtype=float))
    n1, n2 = xs.size, ys.size
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([xs, ys])
    ecdf1 = np.searchsorted(xs, grid, side="right") / n1
    ecdf2 = np.searchsorted(ys, grid, side="right") / n2
    d = float(np.max(np.abs(ecdf1 - ecdf2)))
    en = n1 * n2 / (n1 + n2)
    p = float(special.kolmogorov(math.sqrt(en) * d))
    return _report(d, p, (n1, n2), level)


def ks_one_sample(xs, cdf, level: float = DEFAULT_LEVEL) -> TestReport:
    """One-sample Kolmogorov-Smirnov test against a callable cdf."""
    xs = np.sort(np.asarray(xs, dtype=float))
    n = xs.size
    if n == 0:
        raise ValueError("sample must be nonempty")
    f = np.asarray(cdf(xs), dtype=float)
    steps = np.arange(1, n + 1) / n
    d_plus = float(np.max(steps - f))
    d_minus = float(np.max(f - (steps - 1.0 / n)))
    d = max(d_plus, d_minus)
    p = float(special.kolmogorov(math.sqrt(n) * d))
    return _report(d, p, (n, 0), level)


def chi_square_gof(
    observed,
    expected_probs,
    level: float = DEFAULT_LEVEL,
    min_expected: float = 5.0,
) -> TestReport:
    """Pearson goodness-of-fit test with right-tail pooling.

    ``observed`` are counts per category; ``expected_probs`` must sum to
    one.  Categories are pooled from the right until the last bin's
    expected count reaches ``min_expected`` (the tail of a count
    distribution is where expected mass gets thin); any other bin still
    below the threshold is an error, not a silent approximation.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    if obs.ndim != 1 or obs.size != probs.size or obs.size < 2:
        raise ValueError("observed and expected_probs must be 1-d of equal length >= 2")
    if np.any(obs < 0) or np.any(probs < 0):
        raise ValueError("counts and probabilities must be nonnegative")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise ValueError("expected_probs must sum to 1")
    total = float(obs.sum())
    expected = probs * total
    obs = list(obs)
    expected = list(expected)
    while len(expected) > 1 and expected[-1] < min_expected:
        tail_expected = expected.pop()
        tail_observed = obs.pop()
        expected[-1] += tail_expected
        obs[-1] += tail_observed
    expected_arr = np.array(expected)
    obs_arr = np.array(obs)
    if np.any(expected_arr < min_expected):
        raise ValueError(
            f"expected count below {min_expected} outside the pooled tail; "
            "coarsen the binning"
        )
    statistic = float(np.sum((obs_arr - expected_arr) ** 2 / expected_arr))
    dof = expected_arr.size - 1
    p = float(scipy_stats.chi2.sf(statistic, dof))
    return _report(statistic, p, (int(round(total)), expected_arr.size), level)


def summarize(values) -> ReplicaSummary:
    """Mean, standard error, and 95% confidence interval of replica values."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("summarize needs at least 2 values")
    mean = float(arr.mean())
    se = float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return ReplicaSummary(mean, se, int(arr.size), (mean - 1.96 * se, mean + 1.96 * se))
