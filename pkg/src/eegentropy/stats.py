"""Group statistics: Mann-Whitney U test and per-feature summaries."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .signal_io import FeatureMatrix, Label

EXACT_MAX_TOTAL = 25


@dataclass(frozen=True)
class UTestResult:
    u: float
    z: float
    p_two_sided: float
    n1: int
    n2: int
    tie_correction_applied: bool
    method: str


def _exact_rank_sum_counts(doubled_ranks: np.ndarray, n1: int) -> np.ndarray:
    """Number of size-``n1`` subsets with each doubled rank sum."""
    total = int(doubled_ranks.sum())
    dp = np.zeros((n1 + 1, total + 1), dtype=object)
    dp[0, 0] = 1
    for v in doubled_ranks:
        v = int(v)
        # descending k keeps each item used at most once
        for k in range(n1, 0, -1):
            dp[k, v:] = dp[k, v:] + dp[k - 1, :total + 1 - v]
    return dp[n1]


def mann_whitney_u(a, b, method: str = "auto") -> UTestResult:
    """Two-sided Mann-Whitney U test with midranks for ties.

    ``method="exact"`` enumerates the permutation distribution of the rank
    sum (ties included); ``"asymptotic"`` uses the normal approximation
    with continuity and tie corrections. ``"auto"`` is exact when
    ``len(a) + len(b) <= 25``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise ValueError("both groups must be non-empty")
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "exact" if n1 + n2 <= EXACT_MAX_TOTAL else "asymptotic"

    n = n1 + n2
    ranks = rankdata(np.concatenate([a, b]))
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    _, tie_counts = np.unique(ranks, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))

    mu = n1 * n2 / 2.0
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var > 0:
        dev = max(abs(u1 - mu) - 0.5, 0.0)
        z = math.copysign(dev / math.sqrt(var), u1 - mu)
    else:
        z = 0.0

    if method == "exact":
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_rank_sum_counts(doubled, n1)
        centre = n1 * (n + 1)  # doubled expected rank sum
        obs = abs(int(round(2 * r1)) - centre)
        sums = np.arange(counts.size)
        extreme = np.abs(sums - centre) >= obs
        p = float(sum(counts[extreme]) / math.comb(n, n1))
    else:
        p = math.erfc(abs(z) / math.sqrt(2.0)) if var > 0 else 1.0
    p = min(1.0, p)
    return UTestResult(min(u1, u2), z, p, n1, n2, has_ties, method)


@dataclass(frozen=True)
class FeatureSummary:
    feature: str
    healthy_mean: float
    healthy_sd: float
    patient_mean: float
    patient_sd: float
    p_value: float
    u: float
    z: float
    n_healthy: int
    n_patient: int


@dataclass(frozen=True)
class GroupSummary:
    rows: tuple[FeatureSummary, ...]

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, feature: str) -> FeatureSummary:
        for row in self.rows:
            if row.feature == feature:
                return row
        raise KeyError(feature)

    def as_records(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def _sd(v: np.ndarray) -> float:
    return float(np.std(v, ddof=1)) if v.size > 1 else 0.0


def group_summary(matrix: FeatureMatrix) -> GroupSummary:
    """Mean, sample SD and Mann-Whitney p per column, healthy vs epileptic.

    Non-finite entries are dropped column by column.
    """
    healthy = matrix.labels == Label.HEALTHY
    patient = matrix.labels == Label.EPILEPTIC
    if not healthy.any() or not patient.any():
        raise ValueError("group summary needs both healthy and epileptic rows")
    rows = []
    for j, name in enumerate(matrix.columns):
        col = matrix.values[:, j]
        h = col[healthy & np.isfinite(col)]
        s = col[patient & np.isfinite(col)]
        if h.size == 0 or s.size == 0:
            rows.append(FeatureSummary(name, math.nan, math.nan, math.nan, math.nan,
                                       math.nan, math.nan, math.nan, h.size, s.size))
            continue
        test = mann_whitney_u(h, s)
        rows.append(FeatureSummary(name, float(h.mean()), _sd(h), float(s.mean()), _sd(s),
                                   test.p_two_sided, test.u, test.z, h.size, s.size))
    return GroupSummary(tuple(rows))
