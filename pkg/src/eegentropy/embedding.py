"""Delay-embedding parameters: AMI delay, FNN dimension, and trajectories."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


class EmbeddingFallbackWarning(UserWarning):
    """A selection rule found no qualifying value and fell back."""


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    m: int
    tau: int

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class EmbeddingParams:
    tau: int
    m: int
    ami_curve: np.ndarray
    fnn_curve: np.ndarray
    tau_is_local_min: bool = True
    m_reached_drop: bool = True


def reconstruct_state_space(x, m: int, tau: int) -> Trajectory:
    """Row ``t`` is ``(x[t], x[t + tau], ..., x[t + (m-1) tau])``."""
    x = np.asarray(x, dtype=np.float64)
    if m < 1 or tau < 1:
        raise ValueError(f"need m >= 1 and tau >= 1, got m={m}, tau={tau}")
    n_rows = x.size - (m - 1) * tau
    if n_rows < 1:
        raise ValueError(f"signal of length {x.size} too short for m={m}, tau={tau}")
    idx = np.arange(n_rows)[:, None] + tau * np.arange(m)[None, :]
    return Trajectory(x[idx], m, tau)


def _bin_indices(x: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise ValueError("mutual information undefined for a constant signal")
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.intp)
    return np.minimum(idx, bins - 1)


def _ami_from_indices(idx: np.ndarray, tau: int, bins: int) -> float:
    a = idx[: idx.size - tau]
    b = idx[tau:]
    joint = np.bincount(a * bins + b, minlength=bins * bins).reshape(bins, bins)
    p = joint / a.size
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    nz = p > 0
    outer = np.outer(px, py)
    return float(max(0.0, np.sum(p[nz] * np.log(p[nz] / outer[nz]))))


def average_mutual_information(x, tau: int, bins: int = 16) -> float:
    """Mutual information (nats) between ``x[n]`` and ``x[n + tau]``.

    Probabilities come from a ``bins x bins`` equal-width histogram spanning
    the signal's range.
    """
    x = np.asarray(x, dtype=np.float64)
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if not 0 <= tau < x.size:
        raise ValueError(f"tau={tau} out of range for a signal of length {x.size}")
    return _ami_from_indices(_bin_indices(x, bins), tau, bins)


def ami_curve(x, tau_max: int, bins: int = 16) -> np.ndarray:
    """``I(tau)`` for ``tau = 0..tau_max``."""
    x = np.asarray(x, dtype=np.float64)
    if not 1 <= tau_max < x.size:
        raise ValueError(f"tau_max={tau_max} out of range for a signal of length {x.size}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    idx = _bin_indices(x, bins)
    return np.array([_ami_from_indices(idx, t, bins) for t in range(tau_max + 1)])


def delay_from_ami_curve(curve) -> tuple[int, bool]:
    """First local minimum of ``curve[1:]``; falls back to the global argmin.

    Returns ``(tau, found_local_minimum)``.
    """
    curve = np.asarray(curve, dtype=float)
    tau_max = curve.size - 1
    if tau_max < 2:
        raise ValueError("AMI curve must cover at least tau = 0..2")
    for t in range(1, tau_max):
        if curve[t] < curve[t - 1] and curve[t] <= curve[t + 1]:
            return t, True
    return int(np.argmin(curve[1:])) + 1, False


def optimal_delay(x, tau_max: int = 50, bins: int = 16) -> int:
    """Delay at the first local minimum of the AMI curve."""
    if tau_max < 2:
        raise ValueError(f"tau_max must be >= 2, got {tau_max}")
    tau, found = delay_from_ami_curve(ami_curve(x, tau_max, bins))
    if not found:
        warnings.warn(f"AMI has no local minimum up to tau={tau_max}; using argmin tau={tau}",
                      EmbeddingFallbackWarning, stacklevel=2)
    return tau


def _nearest_excluding(points: np.ndarray, exclusion: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest neighbour of each point ignoring indices within ``exclusion`` of it."""
    n = points.shape[0]
    tree = cKDTree(points)
    # At most 2*exclusion+1 indices are excluded, so this many neighbours
    # always contains an admissible one.
    k = min(n, 2 * exclusion + 2)
    dist, nbr = tree.query(points, k=k)
    dist = dist.reshape(n, k)
    nbr = nbr.reshape(n, k)
    ok = np.abs(nbr - np.arange(n)[:, None]) > exclusion
    first = np.argmax(ok, axis=1)
    has = ok[np.arange(n), first]
    if not np.all(has):
        raise ValueError("no admissible neighbour outside the temporal exclusion window")
    rows = np.arange(n)
    return nbr[rows, first], dist[rows, first] ** 2


def fnn_fraction(x, tau: int, D: int, r_tol: float = 10.0,
                 exclusion: int | None = None) -> float:
    """Fraction of false nearest neighbours when going from dimension D to D+1.

    Neighbours closer in time than ``exclusion`` samples (default ``tau``) are
    skipped. A neighbour is false when
    ``sqrt((R_{D+1}^2 - R_D^2) / R_D^2) > r_tol``.
    """
    x = np.asarray(x, dtype=np.float64)
    if r_tol <= 0:
        raise ValueError(f"r_tol must be positive, got {r_tol}")
    if tau < 1 or D < 1:
        raise ValueError(f"need tau >= 1 and D >= 1, got tau={tau}, D={D}")
    n_pts = x.size - D * tau
    if n_pts < 10:
        raise ValueError(f"too few embedded points ({n_pts}) for D={D}, tau={tau}")
    w = tau if exclusion is None else exclusion
    if n_pts <= 2 * w + 1:
        raise ValueError(f"too few embedded points ({n_pts}) for exclusion window {w}")

    idx = np.arange(n_pts)[:, None] + tau * np.arange(D)[None, :]
    points = x[idx]
    nbr, rd2 = _nearest_excluding(points, w)
    extra = (x[np.arange(n_pts) + D * tau] - x[nbr + D * tau]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sqrt(extra / rd2)
    false = np.where(rd2 > 0, ratio > r_tol, extra > 0)
    return float(np.count_nonzero(false)) / n_pts


def fnn_curve(x, tau: int, d_max: int, r_tol: float = 10.0) -> np.ndarray:
    """FNN fraction for ``D = 1..d_max`` (index 0 holds D=1)."""
    return np.array([fnn_fraction(x, tau, d, r_tol) for d in range(1, d_max + 1)])


def dimension_from_fnn_curve(curve, drop: float) -> tuple[int, bool]:
    """Smallest D whose FNN fraction is at most ``drop``; else ``(d_max, False)``."""
    curve = np.asarray(curve, dtype=float)
    below = np.flatnonzero(curve <= drop)
    if below.size:
        return int(below[0]) + 1, True
    return curve.size, False


def optimal_dimension(x, tau: int, d_max: int = 15, r_tol: float = 10.0,
                      drop: float = 0.01) -> int:
    if d_max < 2:
        raise ValueError(f"d_max must be >= 2, got {d_max}")
    if not 0 < drop < 1:
        raise ValueError(f"drop must lie in (0, 1), got {drop}")
    m, reached = dimension_from_fnn_curve(fnn_curve(x, tau, d_max, r_tol), drop)
    if not reached:
        warnings.warn(f"FNN fraction never fell to {drop} up to D={d_max}",
                      EmbeddingFallbackWarning, stacklevel=2)
    return m


def estimate_embedding(x, tau_max: int = 50, bins: int = 16, d_max: int = 15,
                       r_tol: float = 10.0, drop: float = 0.01) -> EmbeddingParams:
    """Delay by AMI first minimum, then dimension by FNN at that delay.

    The FNN curve is evaluated only up to the selected dimension (the full
    ``1..d_max`` range when the fraction never reaches ``drop``).
    """
    if tau_max < 2:
        raise ValueError(f"tau_max must be >= 2, got {tau_max}")
    if d_max < 2:
        raise ValueError(f"d_max must be >= 2, got {d_max}")
    if not 0 < drop < 1:
        raise ValueError(f"drop must lie in (0, 1), got {drop}")
    ami = ami_curve(x, tau_max, bins)
    tau, tau_ok = delay_from_ami_curve(ami)
    fractions = []
    for d in range(1, d_max + 1):
        fractions.append(fnn_fraction(x, tau, d, r_tol))
        if fractions[-1] <= drop:
            break
    fnn = np.array(fractions)
    m, m_ok = dimension_from_fnn_curve(fnn, drop)
    return EmbeddingParams(tau, m, ami, fnn, tau_ok, m_ok)
