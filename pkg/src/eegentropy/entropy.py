"""Entropy measures applied to wavelet coefficient vectors.

Template-matching entropies (AppEn, SampEn, FuzzyEn) use the Chebyshev
distance. Tolerances passed as ``r_abs`` are absolute; ``EntropyParams``
expresses them as fractions of the input's standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ENTROPY_NAMES = ("AppEn", "SampEn", "PermEn", "FuzzyEn", "ShanEn",
                 "SpectralEn", "NormEn", "ThreshEn", "LogEn", "SureEn")

_BLOCK = 512


class UndefinedEntropyError(ArithmeticError):
    """SampEn has no matching template pairs at one of the two lengths."""

    def __init__(self, a: int, b: int):
        self.a, self.b = a, b
        super().__init__(f"sample entropy undefined: A={a} matches at m+1, B={b} at m")


@dataclass(frozen=True)
class EntropyParams:
    m: int = 2
    r: float = 0.2
    fuzzy_r: float = 0.15
    fuzzy_n: int = 2
    r_absolute: bool = False
    perm_order: int = 3
    perm_delay: int = 1
    norm_p: float = 2.0
    thresh_P: float = 0.2
    sure_eps: float = 3.0
    shan_bins: int = 16

    def __post_init__(self):
        checks = [
            (self.m >= 1, "m >= 1"),
            (self.r > 0, "r > 0"),
            (self.fuzzy_r > 0, "fuzzy_r > 0"),
            (self.fuzzy_n >= 1, "fuzzy_n >= 1"),
            (self.perm_order >= 2, "perm_order >= 2"),
            (self.perm_delay >= 1, "perm_delay >= 1"),
            (self.norm_p >= 1, "norm_p >= 1"),
            (self.thresh_P > 0, "thresh_P > 0"),
            (self.sure_eps > 0, "sure_eps > 0"),
            (self.shan_bins >= 2, "shan_bins >= 2"),
        ]
        failed = [msg for ok, msg in checks if not ok]
        if failed:
            raise ValueError("invalid entropy parameters: need " + ", ".join(failed))

    def as_dict(self) -> dict:
        return asdict(self)


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D vector")
    return x


def _check_template_args(x: np.ndarray, m: int, r_abs: float) -> None:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if x.size < m + 2:
        raise ValueError(f"need at least m+2={m + 2} samples, got {x.size}")
    if not r_abs > 0:
        raise ValueError(f"tolerance must be positive, got {r_abs}")


def _match_counts(x: np.ndarray, m: int, r: float, n_templates: int,
                  with_next: bool) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-template match counts at length m (and m+1), self included.

    Only the first ``n_templates`` templates take part on either side.
    """
    cm = np.empty(n_templates, dtype=np.int64)
    cm1 = np.empty(n_templates, dtype=np.int64) if with_next else None
    cols = np.arange(n_templates)
    for start in range(0, n_templates, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n_templates))
        dist = np.abs(x[rows[:, None]] - x[cols[None, :]])
        for k in range(1, m):
            np.maximum(dist, np.abs(x[rows[:, None] + k] - x[cols[None, :] + k]), out=dist)
        within = dist <= r
        cm[rows] = within.sum(axis=1)
        if with_next:
            within &= np.abs(x[rows[:, None] + m] - x[cols[None, :] + m]) <= r
            cm1[rows] = within.sum(axis=1)
    return cm, cm1


def _phi(x: np.ndarray, m: int, r: float) -> float:
    n_t = x.size - m + 1
    counts, _ = _match_counts(x, m, r, n_t, with_next=False)
    return float(np.mean(np.log(counts / n_t)))


def app_en(x, m: int = 2, r_abs: float = 0.2) -> float:
    """Approximate entropy ``phi^m(r) - phi^{m+1}(r)``; self-matches counted."""
    x = _as_vector(x)
    _check_template_args(x, m, r_abs)
    return _phi(x, m, r_abs) - _phi(x, m + 1, r_abs)


def samp_en(x, m: int = 2, r_abs: float = 0.2) -> float:
    """Sample entropy ``-ln(A/B)`` over the first N-m templates, no self-matches.

    Raises:
        UndefinedEntropyError: if no pairs match at length m or m+1.
    """
    x = _as_vector(x)
    _check_template_args(x, m, r_abs)
    n_t = x.size - m
    cm, cm1 = _match_counts(x, m, r_abs, n_t, with_next=True)
    b = int((cm.sum() - n_t) // 2)
    a = int((cm1.sum() - n_t) // 2)
    if a == 0 or b == 0:
        raise UndefinedEntropyError(a, b)
    return math.log(b / a)


def samp_en_upper_bound(n: int, m: int) -> float:
    """Largest finite SampEn for length ``n``: one match among all template pairs."""
    pairs = (n - m) * (n - m - 1) // 2
    return math.log(pairs) if pairs > 1 else 0.0


def _fuzzy_phi(x: np.ndarray, m: int, n: int, r: float, n_t: int) -> float:
    templates = sliding_window_view(x, m)[:n_t]
    base = templates.mean(axis=1)
    total = 0.0
    cols = np.arange(n_t)
    for start in range(0, n_t, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n_t))
        offset = base[rows][:, None] - base[None, :]
        dist = np.abs(x[rows[:, None]] - x[cols[None, :]] - offset)
        for k in range(1, m):
            np.maximum(dist, np.abs(x[rows[:, None] + k] - x[cols[None, :] + k] - offset),
                       out=dist)
        sim = np.exp(-(dist ** n) / r ** n)
        sim[np.arange(rows.size), rows] = 0.0
        total += float(np.sum(sim.sum(axis=1) / (n_t - 1)))
    return total / n_t


def fuzzy_en(x, m: int = 2, n: int = 2, r_abs: float = 0.15) -> float:
    """Fuzzy entropy ``ln(phi^m) - ln(phi^{m+1})``.

    Templates are baseline-removed; similarity is ``exp(-d^n / r^n)``. Both
    orders use the first N-m templates.
    """
    x = _as_vector(x)
    _check_template_args(x, m, r_abs)
    if n < 1:
        raise ValueError(f"fuzzy gradient n must be >= 1, got {n}")
    n_t = x.size - m
    return math.log(_fuzzy_phi(x, m, n, r_abs, n_t)) - math.log(_fuzzy_phi(x, m + 1, n, r_abs, n_t))


def histogram_counts(x, bins: int) -> np.ndarray:
    """Equal-width occupancy counts over ``[min, max]``; max falls in the last bin."""
    x = _as_vector(x)
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise ValueError("histogram undefined for a constant input")
    idx = np.minimum(np.floor((x - lo) / (hi - lo) * bins).astype(np.intp), bins - 1)
    return np.bincount(idx, minlength=bins)


def shannon_en(x, bins: int = 16) -> float:
    """Shannon entropy (bits) of the equal-width amplitude histogram."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    counts = histogram_counts(x, bins)
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def spectral_en(x) -> float:
    """Normalized spectral entropy in [0, 1].

    Power comes from the one-sided periodogram of the mean-removed signal,
    DC excluded; the entropy is divided by ``ln`` of the number of bins.
    """
    x = _as_vector(x)
    if x.size < 8:
        raise ValueError(f"need at least 8 samples, got {x.size}")
    power = np.abs(np.fft.rfft(x - x.mean()))[1:] ** 2
    total = power.sum()
    if not total > 0:
        raise ValueError("spectral entropy undefined for a constant input")
    p = power[power > 0] / total
    return float(-np.sum(p * np.log(p)) / math.log(power.size))


def ordinal_patterns(x, order: int, delay: int) -> np.ndarray:
    """Rank pattern of each window; ties ranked by time (earlier is lower)."""
    x = _as_vector(x)
    span = (order - 1) * delay + 1
    windows = sliding_window_view(x, span)[:, ::delay]
    return np.argsort(windows, axis=1, kind="stable")


def perm_en(x, order: int = 3, delay: int = 1) -> float:
    """Permutation entropy in bits (not normalized)."""
    x = _as_vector(x)
    if order < 2 or delay < 1:
        raise ValueError(f"need order >= 2 and delay >= 1, got {order}, {delay}")
    if x.size < order * delay + 1:
        raise ValueError(f"need at least {order * delay + 1} samples, got {x.size}")
    patterns = ordinal_patterns(x, order, delay)
    codes = patterns @ (order ** np.arange(order - 1, -1, -1))
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def norm_en(x, p: float = 2.0) -> float:
    """Sum of ``|x_i|^p``."""
    if p < 1:
        raise ValueError(f"norm entropy needs p >= 1, got {p}")
    return float(np.sum(np.abs(_as_vector(x)) ** p))


def thresh_en(x, P: float = 0.2) -> float:
    """Number of samples with ``|x_i| > P``."""
    if not P > 0:
        raise ValueError(f"threshold must be positive, got {P}")
    return float(np.count_nonzero(np.abs(_as_vector(x)) > P))


def sure_en(x, eps: float = 3.0) -> float:
    """``N - #{|x_i| <= eps} + sum(min(x_i^2, eps^2))``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = _as_vector(x)
    small = np.count_nonzero(np.abs(x) <= eps)
    return float(x.size - small + np.sum(np.minimum(x * x, eps * eps)))


def log_energy_en(x) -> float:
    """Sum of ``ln(x_i^2)``; zero coefficients contribute 0."""
    x = _as_vector(x)
    nz = np.abs(x[x != 0])
    return float(np.sum(2.0 * np.log(nz)))


def entropy_features(x, params: EntropyParams = EntropyParams()) -> dict[str, float]:
    """All ten measures for one coefficient vector, keyed by ``ENTROPY_NAMES``.

    SampEn is NaN when undefined. Relative tolerances scale with the
    population SD of ``x`` itself.
    """
    x = _as_vector(x)
    sd = float(np.std(x))
    scale = 1.0 if params.r_absolute else sd
    r_abs = params.r * scale
    fr_abs = params.fuzzy_r * scale
    try:
        se = samp_en(x, params.m, r_abs)
    except UndefinedEntropyError:
        se = math.nan
    values = {
        "AppEn": app_en(x, params.m, r_abs),
        "SampEn": se,
        "PermEn": perm_en(x, params.perm_order, params.perm_delay),
        "FuzzyEn": fuzzy_en(x, params.m, params.fuzzy_n, fr_abs),
        "ShanEn": shannon_en(x, params.shan_bins),
        "SpectralEn": spectral_en(x),
        "NormEn": norm_en(x, params.norm_p),
        "ThreshEn": thresh_en(x, params.thresh_P),
        "LogEn": log_energy_en(x),
        "SureEn": sure_en(x, params.sure_eps),
    }
    return {name: values[name] for name in ENTROPY_NAMES}
